####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     bench.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+, numpy
#
####################################################################################################

import hashlib
import time

from . import kernels
from . import logger
from . import operators
from . import parallel
from .lipschitz import test_family
from .space import builtin_space

BENCH_COLUMNS = ["kind", "n_points", "threads", "repeat", "average", "min", "max"]


class TimingResult:
    def __init__(self, key="", raw_results=None):
        self.key = key
        self.result_values = list(raw_results or [])
        self.count = len(self.result_values)
        self.average = 0.0
        self.result_range = ()
        if self.count > 0:
            self.average = sum(self.result_values) / self.count
            self.result_range = (min(self.result_values), max(self.result_values))

    def summary(self):
        return "{}: avg={:.6f}s range={} count={}".format(self.key, self.average, self.result_range, self.count)


def bench_operator(kind, space, seed=0):
    """ An operator closure and an input for timing; circles get the odd kernel, other spaces the positive one """
    kind = operators.OperatorKind(kind)
    if kind is operators.OperatorKind.Fractional:
        kernel = kernels.riesz_fractional(space.n, 0.25)
    elif kind is operators.OperatorKind.Hypersingular:
        kernel = kernels.riesz_hypersingular(space.n, 0.25)
    elif space.geometry == "circle" and space.num_points() % 2 == 0:
        kernel = kernels.odd_circle(space.n)
    else:
        kernel = kernels.riesz_singular(space.n)
    epsilon = 2.0 * space.min_distance if kind is operators.OperatorKind.Truncated else None
    op = operators.make_operator(kind, kernel, epsilon)
    f = test_family(space, 0.5, "anchored_mix", 1, seed)[0]
    return op, f


def output_digest(values):
    return hashlib.sha256(values.tobytes()).hexdigest()


def run_bench(kind, points, threads, repeats, seed=0):
    """
    Time one operator application on uniform_circle(N) for every N and worker count. Returns the timing rows
    and, per (N, threads), a digest of the output, which must not depend on the worker count.
    """
    previous = parallel.get_num_workers()
    timing_rows = []
    digests = []
    try:
        for count in points:
            space = builtin_space("uniform_circle", count)
            op, f = bench_operator(kind, space, seed)
            # warm the kernel cache so only the summation is timed
            op(f)
            for workers in threads:
                parallel.set_num_workers(workers)
                samples = []
                output = None
                for _ in range(repeats):
                    start = time.perf_counter()
                    output = op(f).output.values
                    samples.append(time.perf_counter() - start)
                result = TimingResult("{}/{}/{}".format(kind, count, workers), samples)
                logger.get().info(result.summary())
                timing_rows.append({"kind": kind, "n_points": count, "threads": workers, "repeat": repeats,
                                    "average": result.average, "min": result.result_range[0],
                                    "max": result.result_range[1]})
                digests.append({"kind": kind, "n_points": count, "threads": workers,
                                "output_sha256": output_digest(output)})
    finally:
        parallel.set_num_workers(previous)
    return timing_rows, digests
