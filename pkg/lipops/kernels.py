####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     kernels.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+, numpy
#
####################################################################################################

import hashlib
import json
import numbers
from enum import Enum

import numpy as np

from . import logger
from . import parallel
from .errors import DegenerateSpaceError, KernelError, ParameterRangeError, SchemaError

# sup of the cutoff derivative, attained at s = 3/4
ETA_DERIVATIVE_MAX = 3.0


class KernelClass(Enum):
    Fractional = "fractional"
    Singular = "singular"
    Hypersingular = "hypersingular"


class KernelSource(Enum):
    RieszFractional = "riesz_fractional"
    RieszSingular = "riesz_singular"
    RieszHypersingular = "riesz_hypersingular"
    OddCircle = "odd_circle"
    OddLine = "odd_line"
    Table = "table"


class ConditionId(Enum):
    Size = "size"
    Smoothness = "smoothness"


_source_classes = {
    KernelSource.RieszFractional: KernelClass.Fractional,
    KernelSource.RieszSingular: KernelClass.Singular,
    KernelSource.RieszHypersingular: KernelClass.Hypersingular,
    KernelSource.OddCircle: KernelClass.Singular,
    KernelSource.OddLine: KernelClass.Singular,
}


class KernelSpec:
    """
    A two-point kernel with its declared class (fractional of order alpha, singular, hypersingular of order
    alpha), the growth dimension n and the smoothness exponent gamma. Truncation and adjoint are carried as
    modifiers of the same spec: epsilon (smooth cutoff scale) and adjoint (K*(x,y) = conj K(y,x)).
    """

    def __init__(self, kernel_class, source, n, gamma=1.0, alpha=None, table=None, epsilon=None, adjoint=False):
        self.kernel_class = KernelClass(kernel_class)
        self.source = KernelSource(source)
        if self.source in _source_classes and _source_classes[self.source] is not self.kernel_class:
            raise KernelError("source {} defines a {} kernel, not {}".format(
                self.source.value, _source_classes[self.source].value, self.kernel_class.value))
        if not (isinstance(n, numbers.Real) and n > 0):
            raise ParameterRangeError("kernel dimension n must be positive, got {}".format(n), "n", n)
        if not (isinstance(gamma, numbers.Real) and 0 < gamma <= 1):
            raise ParameterRangeError("gamma must lie in (0, 1], got {}".format(gamma), "gamma", gamma)
        if self.kernel_class is KernelClass.Singular:
            if alpha is not None:
                raise ParameterRangeError("singular kernels take no alpha", "alpha", alpha)
        elif not (isinstance(alpha, numbers.Real) and 0 < alpha < 1):
            raise ParameterRangeError("alpha must lie in (0, 1), got {}".format(alpha), "alpha", alpha)
        if epsilon is not None and not (isinstance(epsilon, numbers.Real) and epsilon > 0):
            raise ParameterRangeError("truncation epsilon must be positive, got {}".format(epsilon), "epsilon",
                                      epsilon)
        self.n = float(n)
        self.gamma = float(gamma)
        self.alpha = None if alpha is None else float(alpha)
        self.epsilon = None if epsilon is None else float(epsilon)
        self.adjoint = bool(adjoint)

        self.table = None
        if self.source is KernelSource.Table:
            if table is None:
                raise KernelError("a table kernel needs its N x N entries")
            table = np.array(table, dtype=complex)
            if table.ndim != 2 or table.shape[0] != table.shape[1]:
                raise KernelError("kernel table must be square, got shape {}".format(table.shape))
            off_diagonal = ~np.eye(table.shape[0], dtype=bool)
            if not np.all(np.isfinite(table[off_diagonal])):
                raise KernelError("kernel table has non-finite off-diagonal entries")
            np.fill_diagonal(table, 0)
            table.flags.writeable = False
            self.table = table
        elif table is not None:
            raise KernelError("only table kernels carry entries")

    @property
    def sigma(self):
        """ Offset of the size exponent: n + sigma is n - alpha, n or n + alpha """
        if self.kernel_class is KernelClass.Fractional:
            return -self.alpha
        if self.kernel_class is KernelClass.Hypersingular:
            return self.alpha
        return 0.0

    @property
    def truncated(self):
        return self.epsilon is not None

    def key(self):
        digest = None
        if self.table is not None:
            digest = hashlib.sha256(self.table.tobytes()).hexdigest()
        return (self.kernel_class.value, self.source.value, self.n, self.gamma, self.alpha, self.epsilon,
                self.adjoint, digest)

    def _replace(self, **changes):
        fields = {"kernel_class": self.kernel_class, "source": self.source, "n": self.n, "gamma": self.gamma,
                  "alpha": self.alpha, "table": self.table, "epsilon": self.epsilon, "adjoint": self.adjoint}
        fields.update(changes)
        return KernelSpec(**fields)

    def to_dict(self):
        result = {
            "class": self.kernel_class.value,
            "source": self.source.value,
            "n": self.n,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "adjoint": self.adjoint,
        }
        if self.table is not None:
            result["table_sha256"] = self.key()[-1]
        return result

    def __repr__(self):
        return "KernelSpec({})".format(", ".join("{}={}".format(k, v) for k, v in self.to_dict().items()))


def riesz_fractional(n, alpha, gamma=1.0):
    return KernelSpec(KernelClass.Fractional, KernelSource.RieszFractional, n, gamma, alpha)


def riesz_singular(n, gamma=1.0):
    return KernelSpec(KernelClass.Singular, KernelSource.RieszSingular, n, gamma)


def riesz_hypersingular(n, alpha, gamma=1.0):
    return KernelSpec(KernelClass.Hypersingular, KernelSource.RieszHypersingular, n, gamma, alpha)


def odd_circle(n=1.0, gamma=1.0):
    return KernelSpec(KernelClass.Singular, KernelSource.OddCircle, n, gamma)


def odd_line(n=1.0, gamma=1.0):
    return KernelSpec(KernelClass.Singular, KernelSource.OddLine, n, gamma)


def table_kernel(table, kernel_class, n, gamma=1.0, alpha=None):
    return KernelSpec(kernel_class, KernelSource.Table, n, gamma, alpha, table=table)


def make_kernel(source, n, alpha=None, gamma=1.0, table=None, kernel_class=None):
    """ Build a kernel by source name; the class follows from the source except for tables """
    source = KernelSource(source)
    if source is KernelSource.Table:
        if kernel_class is None:
            raise KernelError("a table kernel needs an explicit class")
        return table_kernel(table, kernel_class, n, gamma, alpha)
    kernel_class = _source_classes[source]
    return KernelSpec(kernel_class, source, n, gamma, alpha if kernel_class is not KernelClass.Singular else None)


def eta_values(s):
    """ Vectorized C1 cutoff: 0 on [0, 1/2], t^2 (3 - 2t) with t = 2s - 1 on (1/2, 1), 1 on [1, inf) """
    t = np.clip(2.0 * np.asarray(s, dtype=float) - 1.0, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def eta(s):
    if not s >= 0:
        raise ParameterRangeError("cutoff argument must be non-negative, got {}".format(s), "s", s)
    return float(eta_values(s))


def eta_derivative(s):
    if not s >= 0:
        raise ParameterRangeError("cutoff argument must be non-negative, got {}".format(s), "s", s)
    t = min(max(2.0 * s - 1.0, 0.0), 1.0)
    return 12.0 * t * (1.0 - t)


def truncate_kernel(kernel, epsilon):
    """ K_eps(x,y) = eta(d(x,y) / eps) K(x,y), defined (as 0) on the diagonal """
    if not (isinstance(epsilon, numbers.Real) and epsilon > 0):
        raise ParameterRangeError("truncation epsilon must be positive, got {}".format(epsilon), "epsilon", epsilon)
    return kernel._replace(epsilon=float(epsilon))


def adjoint_kernel(kernel):
    return kernel._replace(adjoint=not kernel.adjoint)


def untruncated(kernel):
    return kernel._replace(epsilon=None)


def _base_matrix(kernel, space):
    num_points = space.num_points()
    distances = space.distances
    exponent = kernel.n + kernel.sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        if kernel.source is KernelSource.Table:
            if kernel.table.shape[0] != num_points:
                raise KernelError("kernel table is {0} x {0} but the space has {1} points".format(
                    kernel.table.shape[0], num_points))
            matrix = kernel.table.astype(complex)
        elif kernel.source is KernelSource.OddCircle:
            if space.geometry != "circle":
                raise KernelError("odd_circle needs a circle space, {} is not one".format(space.name))
            if num_points % 2:
                raise KernelError("odd_circle needs an even point count, got {}".format(num_points))
            index = np.arange(num_points)
            offsets = (index[None, :] - index[:, None]) % num_points
            # forward half circle is positive, the antipode gets sign 0
            signs = np.sign(num_points / 2.0 - offsets)
            matrix = (signs / np.power(distances, kernel.n)).astype(complex)
        elif kernel.source is KernelSource.OddLine:
            if space.dimension() != 1:
                raise KernelError("odd_line needs one-dimensional coordinates, {} has none".format(space.name))
            positions = space.coords[:, 0]
            signs = np.sign(positions[None, :] - positions[:, None])
            matrix = (signs / np.power(distances, kernel.n)).astype(complex)
        else:
            matrix = (1.0 / np.power(distances, exponent)).astype(complex)
    np.fill_diagonal(matrix, np.nan)
    return matrix


def kernel_matrix(kernel, space):
    """
    All kernel values on the space as an N x N complex array, cached per space. The diagonal is NaN for base
    kernels (never read) and 0 for truncated kernels.
    """
    def build():
        matrix = _base_matrix(kernel, space)
        if kernel.adjoint:
            matrix = np.conj(matrix.T)
        if kernel.truncated:
            matrix = matrix * eta_values(space.distances / kernel.epsilon)
            np.fill_diagonal(matrix, 0)
        matrix.flags.writeable = False
        return matrix
    return space._cached_kernel(kernel.key(), build)


def eval_kernel(kernel, space, x, y):
    x = space.check_id(x)
    y = space.check_id(y)
    if x == y and not kernel.truncated:
        raise KernelError("kernel {} is undefined on the diagonal (x = y = {})".format(kernel.source.value, x))
    return complex(kernel_matrix(kernel, space)[x, y])


class ConditionReport:
    def __init__(self, condition, estimated_constant, witness, admissible_count):
        self.condition = ConditionId(condition)
        self.estimated_constant = estimated_constant
        self.witness = witness
        self.admissible_count = admissible_count

    def to_dict(self):
        return {
            "condition": self.condition.value,
            "constant": self.estimated_constant,
            "witness": None if self.witness is None else list(self.witness),
            "admissible_count": self.admissible_count,
        }


def verify_size_condition(kernel, space):
    """ Observed best B with |K(x,y)| <= B / d^(n + sigma)(x,y) over ordered pairs x != y """
    num_points = space.num_points()
    if num_points < 2:
        raise DegenerateSpaceError("the size condition needs at least 2 points", num_points)
    matrix = kernel_matrix(kernel, space)
    powers = space.distance_power(kernel.n + kernel.sigma)
    off_diagonal = ~np.eye(num_points, dtype=bool)
    with np.errstate(invalid="ignore"):
        values = np.where(off_diagonal, np.abs(matrix) * powers, -np.inf)
    flat = int(np.argmax(values))
    x, y = divmod(flat, num_points)
    report = ConditionReport(ConditionId.Size, float(values[x, y]), (x, y), num_points * (num_points - 1))
    logger.get().info("size condition for {} on {}: {}".format(kernel.source.value, space.name,
                                                               report.estimated_constant))
    return report


def _smoothness_rows(matrix, distances, outer, inner, start, stop):
    """ Best admissible triple with x1 in start..stop; (x2, y) scanned row-major so ties keep the first """
    num_points = matrix.shape[0]
    index = np.arange(num_points)
    best = None
    admissible = 0
    for x1 in range(start, stop):
        mask = (2.0 * distances[x1][:, None] <= distances[x1][None, :])
        mask &= (index[:, None] != x1) & (index[None, :] != x1) & (index[:, None] != index[None, :])
        count = int(np.count_nonzero(mask))
        if count == 0:
            continue
        admissible += count
        with np.errstate(invalid="ignore", divide="ignore"):
            values = np.abs(matrix[x1][None, :] - matrix) * outer[x1][None, :] / inner[x1][:, None]
        values = np.where(mask, values, -np.inf)
        flat = int(np.argmax(values))
        x2, y = divmod(flat, num_points)
        if best is None or values[x2, y] > best[0]:
            best = (float(values[x2, y]), (x1, x2, y))
    return best, admissible


def verify_smoothness_condition(kernel, space):
    """
    Observed best C with |K(x1,y) - K(x2,y)| <= C d^gamma(x1,x2) / d^(n + sigma + gamma)(x1,y) over pairwise
    distinct triples with 2 d(x1,x2) <= d(x1,y).
    """
    num_points = space.num_points()
    if num_points < 2:
        raise DegenerateSpaceError("the smoothness condition needs at least 2 points", num_points)
    matrix = kernel_matrix(kernel, space)
    outer = space.distance_power(kernel.n + kernel.sigma + kernel.gamma)
    inner = space.distance_power(kernel.gamma)
    results = parallel.map_chunks(
        lambda start, stop: _smoothness_rows(matrix, space.distances, outer, inner, start, stop),
        num_points)
    admissible = sum(count for _, count in results)
    best = parallel.reduce_max(candidate for candidate, _ in results)
    if best is None:
        report = ConditionReport(ConditionId.Smoothness, 0.0, None, 0)
    else:
        report = ConditionReport(ConditionId.Smoothness, best[0], best[1], admissible)
    logger.get().info("smoothness condition for {} on {}: {} over {} triples".format(
        kernel.source.value, space.name, report.estimated_constant, admissible))
    return report


def truncation_uniformity_bound(size_constant, smoothness_constant):
    """ Smoothness bound that every truncation K_eps of a kernel must respect """
    return smoothness_constant + 2.0 * ETA_DERIVATIVE_MAX * size_constant


def table_kernel_to_document(kernel, space):
    return {
        "space_name": space.name,
        "entries": [[[z.real, z.imag] for z in row] for row in kernel.table.tolist()],
        "diagonal_ignored": True,
    }


def load_table_kernel(document, space, kernel_class, n, gamma=1.0, alpha=None):
    if not isinstance(document, dict) or "entries" not in document:
        raise SchemaError("a table-kernel document needs an 'entries' field", "entries")
    name = document.get("space_name")
    if name is not None and name != space.name:
        raise SchemaError("kernel was tabulated on '{}' but the space is '{}'".format(name, space.name),
                          "space_name")
    entries = document["entries"]
    if not isinstance(entries, list) or len(entries) != space.num_points():
        raise SchemaError("'entries' must have one row per point", "entries")
    table = np.zeros((len(entries), len(entries)), dtype=complex)
    for x, row in enumerate(entries):
        if not isinstance(row, list) or len(row) != len(entries):
            raise SchemaError("row {} of 'entries' has the wrong length".format(x), "entries")
        for y, entry in enumerate(row):
            if x == y:
                continue
            if not isinstance(entry, list) or len(entry) != 2 or any(
                    isinstance(v, bool) or not isinstance(v, numbers.Real) for v in entry):
                raise SchemaError("entry ({}, {}) must be an [re, im] number pair".format(x, y), "entries")
            table[x, y] = complex(entry[0], entry[1])
    return table_kernel(table, kernel_class, n, gamma, alpha)


def read_table_kernel(path, space, kernel_class, n, gamma=1.0, alpha=None):
    with open(path, "r") as f:
        return load_table_kernel(json.load(f), space, kernel_class, n, gamma, alpha)


def save_table_kernel(kernel, space, path):
    with open(path, "w") as f:
        json.dump(table_kernel_to_document(kernel, space), f, indent=2, sort_keys=True)
        f.write("\n")
