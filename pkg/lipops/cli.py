####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     cli.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+
#
####################################################################################################

import argparse
import os
import sys

from . import bench
from . import harness
from . import kernels
from . import logger
from . import operators
from . import parallel
from . import reports
from .errors import LipOpsException, UsageError
from .kernels import KernelClass, KernelSource
from .lipschitz import FamilyKind, constant_function, function_to_document, read_function, test_family
from .options import RunConfig, add_options_args, load_options, resolve_output_path
from .space import (SpaceKind, builtin_parameter_name, builtin_space, check_metric_axioms, estimate_doubling_constant,
                    estimate_growth_constant, read_space, write_space)

EXIT_PASS = 0
EXIT_FAILURE = 1
EXIT_SOFT_VIOLATION = 2
EXIT_USAGE = 64
EXIT_FILE_ERROR = 66

BENCH_OPERATORS = ["pv", "truncated", "fractional", "hypersingular"]


class _UsageParser(argparse.ArgumentParser):
    """ Raises UsageError instead of exiting, so main() owns every exit status """

    def error(self, message):
        raise UsageError("{}\n{}: error: {}".format(self.format_usage().strip(), self.prog, message))


def _common_args():
    common = _UsageParser(add_help=False)
    logger.add_logging_args(common)
    add_options_args(common)
    common.add_argument("--threads", help="Worker threads (results do not depend on it)", type=int, default=1)
    common.add_argument("--out", help="Output file; a bare name lands in $LIPOPS_OUTPUT_DIR", default=None)
    common.add_argument("--emit", help="Also write a csv extract next to the json report", choices=["json", "csv"],
                        default="json")
    return common


def _add_space_arg(parser):
    parser.add_argument("--space", required=True,
                        help="Space file, or a built-in space as kind:size (e.g. cantor4:3, uniform_circle:64)")


def _add_kernel_args(parser):
    parser.add_argument("--kernel", choices=[s.value for s in KernelSource if s is not KernelSource.Table],
                        help="Standard kernel source", default=None)
    parser.add_argument("--kernel-file", help="Table-kernel file (overrides --kernel)", default=None)
    parser.add_argument("--kernel-class", choices=[c.value for c in KernelClass], default=None,
                        help="Declared class of a table kernel")
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--gamma", type=float, default=None)


def _add_family_args(parser):
    parser.add_argument("--family-kind", choices=[k.value for k in FamilyKind], default=None)
    parser.add_argument("--family-count", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)


def _verb(subparsers, name, common, handler, names, help):
    parser = subparsers.add_parser(name, parents=[common], help=help)
    parser.set_defaults(handler=handler, names=names)
    return parser


def build_parser():
    common = _common_args()
    parser = _UsageParser(prog="lipops", description="Fractional, singular and hypersingular integral operators "
                          "on finite metric measure spaces")
    groups = parser.add_subparsers(dest="group", metavar="<group>")
    groups.required = True

    space_group = groups.add_parser("space", help="generate or check spaces").add_subparsers(dest="action")
    space_group.required = True
    gen = _verb(space_group, "gen", common, _space_gen, [], "write a built-in space file")
    gen.add_argument("--kind", required=True, choices=[k.value for k in SpaceKind])
    gen.add_argument("--points", type=int, default=None)
    gen.add_argument("--generation", type=int, default=None)
    gen.add_argument("--levels", type=int, default=None)
    gen.set_defaults(verb=("space", "gen"))

    check = _verb(space_group, "check", common, _space_check, ["space", "n", "r_min", "triple_budget", "seed"],
                  "metric axioms, growth and doubling constants")
    _add_space_arg(check)
    check.add_argument("--n", type=float, default=None)
    check.add_argument("--r-min", type=float, default=None)
    check.add_argument("--triple-budget", type=int, default=None)
    check.add_argument("--seed", type=int, default=None)
    check.set_defaults(verb=("space", "check"))

    kernel_group = groups.add_parser("kernel", help="kernel conditions").add_subparsers(dest="action")
    kernel_group.required = True
    kcheck = _verb(kernel_group, "check", common, _kernel_check,
                   ["space", "kernel", "kernel_file", "kernel_class", "alpha", "gamma", "epsilon", "uniformity",
                    "grid_size"], "size and smoothness constants")
    _add_space_arg(kcheck)
    _add_kernel_args(kcheck)
    kcheck.add_argument("--epsilon", type=float, default=None)
    kcheck.add_argument("--uniformity", action="store_true", help="check every truncation on the epsilon grid")
    kcheck.add_argument("--grid-size", type=int, default=None)
    kcheck.set_defaults(verb=("kernel", "check"))

    op_group = groups.add_parser("op", help="apply operators").add_subparsers(dest="action")
    op_group.required = True
    apply = _verb(op_group, "apply", common, _op_apply,
                  ["space", "operator", "kernel", "kernel_file", "kernel_class", "alpha", "gamma", "epsilon", "x0",
                   "function"], "apply an operator to a sampled function")
    _add_space_arg(apply)
    _add_kernel_args(apply)
    apply.add_argument("--operator", required=True, choices=[k.value for k in operators.OperatorKind])
    apply.add_argument("--epsilon", type=float, default=None)
    apply.add_argument("--x0", type=int, default=None)
    apply.add_argument("--function", default=None, help="Function file (default: the constant 1)")
    apply.set_defaults(verb=("op", "apply"))

    verify_group = groups.add_parser("verify", help="lemma, theorem, L2 and composition checks").add_subparsers(
        dest="action")
    verify_group.required = True
    lemma = _verb(verify_group, "lemma", common, _verify_lemma, ["space", "n", "delta", "r_min", "parts", "tolerance"],
                  "ball-sum estimates with closed-form constants")
    _add_space_arg(lemma)
    lemma.add_argument("--n", type=float, default=None)
    lemma.add_argument("--delta", type=float, required=True)
    lemma.add_argument("--r-min", type=float, default=None)
    lemma.add_argument("--parts", type=int, nargs="+", choices=[1, 2, 3], default=[1, 2, 3])
    lemma.add_argument("--tolerance", type=float, default=None)
    lemma.set_defaults(verb=("verify", "lemma"))

    theorem = _verb(verify_group, "theorem", common, _verify_theorem,
                    ["id", "space", "alpha", "beta", "gamma", "kernel", "kernel_file", "kernel_class", "family_kind",
                     "family_count", "seed", "grid_size", "r0"], "empirical operator norms")
    theorem.add_argument("--id", required=True, type=int, choices=[1, 2, 3, 4])
    _add_space_arg(theorem)
    _add_kernel_args(theorem)
    theorem.add_argument("--beta", type=float, required=True)
    _add_family_args(theorem)
    theorem.add_argument("--grid-size", type=int, default=None)
    theorem.add_argument("--r0", type=float, default=None)
    theorem.set_defaults(verb=("verify", "theorem"))

    krein = _verb(verify_group, "krein", common, _verify_krein,
                  ["space", "kernel", "kernel_file", "kernel_class", "alpha", "gamma", "beta", "family_kind",
                   "family_count", "seed", "grid_size", "tolerance"], "L2 bound from the Lipschitz bounds")
    _add_space_arg(krein)
    _add_kernel_args(krein)
    krein.add_argument("--beta", type=float, required=True)
    _add_family_args(krein)
    krein.add_argument("--grid-size", type=int, default=None)
    krein.add_argument("--tolerance", type=float, default=None)
    krein.set_defaults(verb=("verify", "krein"))

    composition = _verb(verify_group, "composition", common, _verify_composition,
                        ["space", "alpha", "beta", "gamma", "family_kind", "family_count", "seed"],
                        "D^alpha I_alpha and I_alpha D^alpha")
    _add_space_arg(composition)
    composition.add_argument("--alpha", type=float, required=True)
    composition.add_argument("--beta", type=float, required=True)
    composition.add_argument("--gamma", type=float, default=None)
    _add_family_args(composition)
    composition.set_defaults(verb=("verify", "composition"))

    bench_parser = _verb(groups, "bench", common, _bench, ["operator", "points", "thread_counts", "repeats", "seed"],
                         "time operator application")
    bench_parser.add_argument("--operator", choices=BENCH_OPERATORS, default="pv")
    bench_parser.add_argument("--points", type=int, nargs="+", default=None)
    bench_parser.add_argument("--thread-counts", type=int, nargs="+", default=None)
    bench_parser.add_argument("--repeats", type=int, default=None)
    bench_parser.add_argument("--seed", type=int, default=None)
    bench_parser.set_defaults(verb=("bench",))

    replay = _verb(groups, "replay", common, _replay, [], "re-run the command embedded in a report")
    replay.add_argument("--report", required=True)
    replay.set_defaults(verb=("replay",))
    return parser


# ---------------------------------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------------------------------

def _fill_defaults(args, options, mapping):
    for name, key in mapping.items():
        if getattr(args, name, None) is None:
            setattr(args, name, getattr(options, key))


def load_space_arg(value, validate=True, triple_budget=None):
    """ kind:size names a built-in space; anything else is a space file """
    kind, _, size = value.partition(":")
    if kind in [k.value for k in SpaceKind] and size and not os.path.exists(value):
        try:
            size = int(size)
        except ValueError:
            raise UsageError("built-in space size must be an integer, got '{}'".format(size))
        return builtin_space(kind, size)
    if triple_budget is None:
        return read_space(value, validate=validate)
    return read_space(value, triple_budget, validate)


def _kernel(args, space):
    gamma = 1.0 if args.gamma is None else args.gamma
    if args.kernel_file:
        if args.kernel_class is None:
            raise UsageError("--kernel-file needs --kernel-class")
        return kernels.read_table_kernel(args.kernel_file, space, args.kernel_class, space.n, gamma, args.alpha)
    if args.kernel is None:
        raise UsageError("a kernel is required: pass --kernel or --kernel-file")
    return kernels.make_kernel(args.kernel, space.n, args.alpha, gamma)


def _family(args, space, beta):
    return test_family(space, beta, args.family_kind, args.family_count, args.seed)


def _output_path(args, default_name):
    return resolve_output_path(args.out, default_name)


def _default_name(args):
    return "{}.json".format("-".join(args.verb))


def _emit(args, document, csv_extract=None, extra_metadata=None):
    path = reports.write_report(document, _output_path(args, _default_name(args)), extra_metadata)
    if args.emit == "csv" and csv_extract is not None:
        columns, rows = csv_extract
        reports.write_csv(columns, rows, os.path.splitext(path)[0] + ".csv")
    print("{}: {} -> {}".format(" ".join(args.verb), "pass" if document["pass"] else "FAIL", path))
    return path


# ---------------------------------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------------------------------

def _space_gen(args, options):
    parameter = builtin_parameter_name(args.kind)
    size = getattr(args, parameter)
    if size is None:
        raise UsageError("space kind {} needs --{}".format(args.kind, parameter))
    space = builtin_space(args.kind, size)
    path = _output_path(args, "{}.space".format(space.name))
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    write_space(space, path)
    print("space gen: {} points -> {}".format(space.num_points(), path))
    return EXIT_PASS


def _space_check(args, options):
    _fill_defaults(args, options, {"triple_budget": "triple_budget", "seed": "seed"})
    config = RunConfig.from_args(args, args.names)
    space = load_space_arg(args.space, validate=False)
    axioms = check_metric_axioms(space, args.triple_budget, args.seed)
    results = {"axioms": axioms.to_dict(), "num_points": space.num_points(), "total_mass": space.total_mass(),
               "diameter": space.diameter, "h": space.h, "n": space.n}
    extract = None
    if space.num_points() >= 2:
        growth = estimate_growth_constant(space, args.n, args.r_min)
        results["growth"] = growth.to_dict()
        results["doubling"] = estimate_doubling_constant(space).to_dict()
        extract = (["radius", "max_ratio"],
                   [{"radius": r, "max_ratio": v} for r, v in growth.per_radius_profile])
    document = reports.report_document("space check", space, config, results, axioms.ok(), args.seed)
    _emit(args, document, extract)
    return EXIT_PASS if axioms.ok() else EXIT_FAILURE


def _kernel_check(args, options):
    _fill_defaults(args, options, {"grid_size": "grid_size"})
    config = RunConfig.from_args(args, args.names)
    space = load_space_arg(args.space)
    kernel = _kernel(args, space)
    if args.epsilon is not None:
        kernel = kernels.truncate_kernel(kernel, args.epsilon)
    size = kernels.verify_size_condition(kernel, space)
    smoothness = kernels.verify_smoothness_condition(kernel, space)
    results = {"kernel": kernel.to_dict(), "size": size.to_dict(), "smoothness": smoothness.to_dict()}
    passed = True
    extract = (["condition", "constant", "admissible_count"], [size.to_dict(), smoothness.to_dict()])
    if args.uniformity:
        base = kernels.untruncated(kernel)
        c1 = kernels.verify_size_condition(base, space).estimated_constant
        c2 = kernels.verify_smoothness_condition(base, space).estimated_constant
        bound = kernels.truncation_uniformity_bound(c1, c2)
        rows = []
        for epsilon in harness.epsilon_grid(space, args.grid_size):
            measured = kernels.verify_smoothness_condition(kernels.truncate_kernel(base, epsilon), space)
            rows.append({"epsilon": epsilon, "smoothness": measured.estimated_constant, "bound": bound,
                         "holds": measured.estimated_constant <= bound})
        violations = sum(1 for row in rows if not row["holds"])
        results["uniformity"] = {"size_constant": c1, "smoothness_constant": c2, "bound": bound, "grid": rows,
                                 "violations": violations}
        passed = violations == 0
        extract = (["epsilon", "smoothness", "bound", "holds"], rows)
    document = reports.report_document("kernel check", space, config, results, passed)
    _emit(args, document, extract)
    return EXIT_PASS if passed else EXIT_FAILURE


def _op_apply(args, options):
    config = RunConfig.from_args(args, args.names)
    space = load_space_arg(args.space)
    kind = operators.OperatorKind(args.operator)
    kernel = None if kind is operators.OperatorKind.Identity else _kernel(args, space)
    f = constant_function(space) if args.function is None else read_function(args.function, space)
    result = operators.make_operator(kind, kernel, args.epsilon, args.x0)(f)
    path = _output_path(args, "op-apply.function.json")
    reports.write_json(function_to_document(result.output), path)
    document = reports.report_document("op apply", space, config, {"diagnostics": result.diagnostics})
    reports.write_report(document, path + ".diagnostics.json")
    if args.emit == "csv":
        rows = [{"id": i, "re": z.real, "im": z.imag, "terms": t}
                for i, (z, t) in enumerate(zip(result.output.values.tolist(), result.terms_per_point))]
        reports.write_csv(["id", "re", "im", "terms"], rows, os.path.splitext(path)[0] + ".csv")
    print("op apply: {} -> {}".format(kind.value, path))
    return EXIT_PASS


def _verify_lemma(args, options):
    _fill_defaults(args, options, {"tolerance": "lemma_tolerance"})
    config = RunConfig.from_args(args, args.names)
    space = load_space_arg(args.space)
    report = harness.verify_lemma(space, args.n, args.delta, args.r_min, args.parts, args.tolerance)
    parts = [part.to_dict() for part in report.parts]
    document = reports.report_document("verify lemma", space, config, report.to_dict(), report.passed)
    _emit(args, document, (["part", "bound_constant", "max_ratio", "pass"], parts))
    return EXIT_PASS if report.passed else EXIT_FAILURE


def _hypothesis_failure(args, space, config, theorem, violations, seed=None):
    logger.get().error("theorem {} hypotheses violated: {}".format(theorem, "; ".join(violations)))
    document = reports.report_document(" ".join(args.verb), space, config, {"hypotheses": violations}, False, seed)
    _emit(args, document)
    return EXIT_FAILURE


def _ratio_rows(estimate):
    return (["index", "ratio"], [{"index": i, "ratio": r} for i, r in enumerate(estimate["ratios"])])


def _verify_theorem(args, options):
    if args.id in (1, 4) and args.alpha is None:
        raise UsageError("verify theorem --id {} needs --alpha".format(args.id))
    if args.id in (2, 3) and args.kernel is None and args.kernel_file is None:
        raise UsageError("verify theorem --id {} needs --kernel or --kernel-file".format(args.id))
    _fill_defaults(args, options, {"family_kind": "family_kind", "family_count": "family_count", "seed": "seed",
                                   "grid_size": "grid_size"})
    config = RunConfig.from_args(args, args.names)
    space = load_space_arg(args.space)
    gamma = 1.0 if args.gamma is None else args.gamma
    kernel = None
    if args.id in (2, 3):
        kernel = _kernel(args, space)
        violations = harness.validate_hypotheses(args.id, beta=args.beta, gamma=kernel.gamma, n=kernel.n)
    else:
        violations = harness.validate_hypotheses(args.id, alpha=args.alpha, beta=args.beta, gamma=gamma, n=space.n)
    if violations:
        return _hypothesis_failure(args, space, config, args.id, violations, args.seed)

    family = _family(args, space, args.beta)
    extract = None
    if args.id == 1:
        report = harness.verify_theorem1(space, args.alpha, args.beta, family, gamma)
        extract = _ratio_rows(report.quantities["norm_estimate"])
    elif args.id == 2:
        grid = harness.epsilon_grid(space, args.grid_size)
        report = harness.verify_theorem2(space, kernel, args.beta, grid, family)
        extract = (["epsilon", "t_eps_one_norm", "t_eps_one_sup", "norm_estimate"], report.quantities["grid"])
    elif args.id == 3:
        report = harness.verify_theorem3(space, kernel, args.beta, family, args.r0)
        extract = _ratio_rows(report.quantities["norm_estimate"])
    else:
        report = harness.verify_theorem4(space, args.alpha, args.beta, family, gamma)
        extract = _ratio_rows(report.quantities["norm_estimate"])
    document = reports.report_document("verify theorem", space, config, report.to_dict(), report.passed, args.seed)
    _emit(args, document, extract)
    return EXIT_PASS if report.passed else EXIT_FAILURE


def _verify_krein(args, options):
    _fill_defaults(args, options, {"family_kind": "family_kind", "family_count": "family_count", "seed": "seed",
                                   "grid_size": "grid_size", "tolerance": "l2_tolerance"})
    config = RunConfig.from_args(args, args.names)
    space = load_space_arg(args.space)
    kernel = _kernel(args, space)
    violations = harness.validate_hypotheses(harness.Theorem.T2, beta=args.beta, gamma=kernel.gamma, n=kernel.n)
    if violations:
        return _hypothesis_failure(args, space, config, "2", violations, args.seed)
    grid = harness.epsilon_grid(space, args.grid_size)
    report = harness.krein_check(space, kernel, args.beta, grid, _family(args, space, args.beta), args.tolerance,
                                 options.l2_max_iterations)
    document = reports.report_document("verify krein", space, config, report.to_dict(), report.passed, args.seed)
    _emit(args, document, (["epsilon", "c_a", "c_b", "l2_norm", "bound", "holds", "adjoint_defect"],
                           report.quantities["grid"]))
    if not report.passed:
        return EXIT_FAILURE
    return EXIT_SOFT_VIOLATION if report.soft_violations else EXIT_PASS


def _verify_composition(args, options):
    _fill_defaults(args, options, {"family_kind": "family_kind", "family_count": "family_count", "seed": "seed"})
    config = RunConfig.from_args(args, args.names)
    space = load_space_arg(args.space)
    gamma = 1.0 if args.gamma is None else args.gamma
    violations = harness.validate_hypotheses(1, alpha=args.alpha, beta=args.beta, gamma=gamma, n=space.n)
    violations += harness.validate_hypotheses(4, alpha=args.alpha, beta=args.alpha + args.beta, n=space.n)
    if violations:
        return _hypothesis_failure(args, space, config, "1/4", violations, args.seed)
    report = harness.verify_composition(space, args.alpha, args.beta, _family(args, space, args.beta), gamma)
    forward = report.quantities["d_after_i"]["ratios"]
    backward = report.quantities["i_after_d"]["ratios"]
    rows = [{"index": i, "d_after_i": a, "i_after_d": b} for i, (a, b) in enumerate(zip(forward, backward))]
    document = reports.report_document("verify composition", space, config, report.to_dict(), report.passed,
                                       args.seed)
    _emit(args, document, (["index", "d_after_i", "i_after_d"], rows))
    return EXIT_PASS if report.passed else EXIT_FAILURE


def _bench(args, options):
    _fill_defaults(args, options, {"points": "bench_points", "thread_counts": "bench_threads",
                                   "repeats": "bench_repeats", "seed": "seed"})
    if args.repeats < 1 or min(args.thread_counts) < 1 or min(args.points) < 2:
        raise UsageError("bench needs repeats >= 1, thread counts >= 1 and at least 2 points")
    config = RunConfig.from_args(args, args.names)
    timing_rows, digests = bench.run_bench(args.operator, args.points, args.thread_counts, args.repeats, args.seed)
    deterministic = all(len({d["output_sha256"] for d in digests if d["n_points"] == count}) == 1
                        for count in args.points)
    document = reports.report_document("bench", None, config, {"outputs": digests,
                                                               "thread_independent": deterministic},
                                       deterministic, args.seed)
    path = reports.write_report(document, _output_path(args, _default_name(args)), {"timings": timing_rows})
    reports.write_csv(bench.BENCH_COLUMNS, timing_rows, os.path.splitext(path)[0] + ".timing.csv")
    print("bench: {} timing rows -> {}".format(len(timing_rows), path))
    return EXIT_PASS if deterministic else EXIT_FAILURE


def _replay(args, options):
    document = reports.read_report(args.report)
    command = list(document["config"]["command"])
    out = _output_path(args, "replay-" + os.path.basename(args.report))
    logger.get().info("replaying: {}".format(" ".join(command)))
    return main(command + ["--out", out, "--threads", str(args.threads), "--options", args.options])


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_PASS

    log = logger.setup(args)
    try:
        if args.threads < 1:
            raise UsageError("--threads must be at least 1, got {}".format(args.threads))
        options = load_options(args.options)
        parallel.set_num_workers(args.threads)
        parallel.set_chunk_size(options.chunk_size)
        with log.timed(args.handler.__name__.strip("_").replace("_", " ")):
            return args.handler(args, options)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        log.error("file error: {}".format(e))
        return EXIT_FILE_ERROR
    except (LipOpsException, ValueError):
        log.exception(sys.exc_info())
        return EXIT_FAILURE
