####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     reports.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+, numpy, psutil
#
####################################################################################################

import csv
import datetime
import json
import math
import os
import platform

import numpy as np
import psutil

from . import parallel
from .errors import SchemaError
from .space import descriptor_hash

REPORT_VERSION = 1


def canonical(value):
    """ Plain json types only: numpy scalars unwrapped, tuples as lists, complex as [re, im] and non-finite
    floats as the strings "nan", "inf" and "-inf" """
    if isinstance(value, dict):
        return {str(k): canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonical(v) for v in value]
    if isinstance(value, np.ndarray):
        return canonical(value.tolist())
    if isinstance(value, np.generic):
        return canonical(value.item())
    if isinstance(value, complex):
        return [canonical(value.real), canonical(value.imag)]
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def dumps(document):
    return json.dumps(canonical(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def report_document(kind, space, config, results, passed=True, seed=None):
    return {
        "report": kind,
        "version": REPORT_VERSION,
        "space": None if space is None else {"name": space.name, "points": space.num_points(),
                                             "hash": descriptor_hash(space)},
        "config": config.to_dict(),
        "seed": seed,
        "results": results,
        "pass": passed,
    }


def metadata(extra=None):
    """ Run facts that differ between otherwise identical runs; kept out of the report itself """
    data = {
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "threads": parallel.get_num_workers(),
        "host": platform.node(),
        "python": platform.python_version(),
        "cpu_count_logical": psutil.cpu_count(),
        "cpu_count_physical": psutil.cpu_count(logical=False),
    }
    if extra:
        data.update(extra)
    return data


def metadata_path(path):
    return path + ".meta.json"


def _ensure_directory(path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_report(document, path, extra_metadata=None):
    _ensure_directory(path)
    with open(path, "w", newline="\n") as f:
        f.write(dumps(document))
    with open(metadata_path(path), "w", newline="\n") as f:
        f.write(dumps(metadata(extra_metadata)))
    return path


def read_report(path):
    with open(path, "r") as f:
        try:
            document = json.load(f)
        except ValueError as e:
            raise SchemaError("{} is not a valid report: {}".format(path, e))
    if not isinstance(document, dict) or "config" not in document or "command" not in document["config"]:
        raise SchemaError("{} carries no replayable config".format(path), "config")
    return document


def write_csv(columns, rows, path):
    """ Plot-ready extract: one header line, then one line per row in the given column order """
    _ensure_directory(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([canonical(row.get(column)) for column in columns])
    return path


def write_json(document, path):
    _ensure_directory(path)
    with open(path, "w", newline="\n") as f:
        f.write(dumps(document))
    return path
