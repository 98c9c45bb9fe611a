####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     options.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+
#
####################################################################################################

import json
import numbers
import os
from enum import Enum

from .errors import SchemaError

script_path = os.path.dirname(os.path.abspath(__file__))
default_options_file = os.path.join(script_path, "default_options.json")

OUTPUT_DIR_VARIABLE = "LIPOPS_OUTPUT_DIR"


class OptionsKeys(Enum):
    Seed = "seed"
    FamilyKind = "family_kind"
    FamilyCount = "family_count"
    GridSize = "grid_size"
    TripleBudget = "triple_budget"
    L2Tolerance = "l2_tolerance"
    L2MaxIterations = "l2_max_iterations"
    LemmaTolerance = "lemma_tolerance"
    ChunkSize = "chunk_size"
    BenchPoints = "bench_points"
    BenchThreads = "bench_threads"
    BenchRepeats = "bench_repeats"


_integer_keys = {OptionsKeys.Seed, OptionsKeys.FamilyCount, OptionsKeys.GridSize, OptionsKeys.TripleBudget,
                 OptionsKeys.L2MaxIterations, OptionsKeys.ChunkSize, OptionsKeys.BenchRepeats}
_real_keys = {OptionsKeys.L2Tolerance, OptionsKeys.LemmaTolerance}
_list_keys = {OptionsKeys.BenchPoints, OptionsKeys.BenchThreads}


class Options:
    """ Numeric defaults for every verb, read from a json file """

    def __init__(self, values):
        self.values = values

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name)

    @staticmethod
    def parse_options_from_file(options_json_file_path):
        with open(options_json_file_path) as f:
            try:
                options = json.load(f)
            except ValueError as e:
                raise SchemaError("options file {} is not valid json: {}".format(options_json_file_path, e))
        return Options.from_dict(options)

    @staticmethod
    def from_dict(options):
        valid_keys = {key.value: key for key in OptionsKeys}
        unrecognized = [key for key in options if key not in valid_keys]
        if unrecognized:
            raise SchemaError("Unrecognized option keys: {}, valid options are {}".format(
                unrecognized, list(valid_keys.keys())), unrecognized[0])
        missing = [key for key in valid_keys if key not in options]
        if missing:
            raise SchemaError("Missing option keys: {}".format(missing), missing[0])

        def is_integer(value):
            return isinstance(value, numbers.Integral) and not isinstance(value, bool)

        for name, value in options.items():
            key = valid_keys[name]
            if key in _integer_keys and not is_integer(value):
                raise SchemaError("option '{}' must be an integer, got {!r}".format(name, value), name)
            if key in _real_keys and (isinstance(value, bool) or not isinstance(value, numbers.Real) or value <= 0):
                raise SchemaError("option '{}' must be a positive number, got {!r}".format(name, value), name)
            if key in _list_keys and (not isinstance(value, list) or not value or
                                      not all(is_integer(v) and v > 0 for v in value)):
                raise SchemaError("option '{}' must be a list of positive integers".format(name), name)
        return Options(dict(options))


def load_options(path=None):
    return Options.parse_options_from_file(path or default_options_file)


def add_options_args(arg_parser):
    arg_parser.add_argument("--options", help="Path to an options json file overriding the numeric defaults",
                            default=default_options_file)


def output_directory():
    return os.environ.get(OUTPUT_DIR_VARIABLE) or os.getcwd()


def resolve_output_path(out, default_name):
    """ A bare file name (or no name at all) lands in the directory named by LIPOPS_OUTPUT_DIR """
    if out is None:
        return os.path.join(output_directory(), default_name)
    if not os.path.dirname(out) and os.environ.get(OUTPUT_DIR_VARIABLE):
        return os.path.join(os.environ[OUTPUT_DIR_VARIABLE], out)
    return out


def _render(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


class RunConfig:
    """
    The verb and the result-relevant parameters of one run. Output paths, thread counts and logging are not
    recorded.
    """

    def __init__(self, verb, parameters):
        self.verb = tuple(verb)
        self.parameters = dict(parameters)

    @staticmethod
    def from_args(args, names):
        return RunConfig(args.verb, [(name, getattr(args, name)) for name in names])

    def to_command(self):
        argv = list(self.verb)
        for name, value in self.parameters.items():
            if value is None or value is False:
                continue
            flag = "--" + name.replace("_", "-")
            if value is True:
                argv.append(flag)
            elif isinstance(value, (list, tuple)):
                argv.append(flag)
                argv.extend(_render(v) for v in value)
            else:
                argv.extend([flag, _render(value)])
        return argv

    def to_dict(self):
        return {"verb": " ".join(self.verb), "parameters": dict(self.parameters), "command": self.to_command()}
