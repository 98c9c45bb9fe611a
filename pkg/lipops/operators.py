####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     operators.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+, numpy
#
####################################################################################################

import numbers
from enum import Enum

import numpy as np

from . import kernels
from . import logger
from . import parallel
from .errors import DegenerateSpaceError, KernelError, OperatorError, ParameterRangeError
from .kernels import KernelClass
from .lipschitz import SampledFunction
from .summation import ordered_sum


class OperatorKind(Enum):
    Identity = "identity"
    Fractional = "fractional"
    Truncated = "truncated"
    TruncatedAdjoint = "truncated_adjoint"
    PrincipalValue = "pv"
    Hypersingular = "hypersingular"
    NormalizedFractional = "normalized_fractional"
    NormalizedPrincipalValue = "normalized_pv"


class OperatorResult:
    def __init__(self, output, terms_per_point, epsilon=None, epsilon_star=None, notes=None):
        self.output = output
        self.terms_per_point = terms_per_point
        self.epsilon = epsilon
        self.epsilon_star = epsilon_star
        self.notes = list(notes or [])

    @property
    def diagnostics(self):
        return {
            "terms_per_point": list(self.terms_per_point),
            "epsilon": self.epsilon,
            "epsilon_star": None if self.epsilon_star is None else list(self.epsilon_star),
            "notes": self.notes,
        }


def _require_points(space):
    if space.num_points() < 2:
        raise DegenerateSpaceError("operators need a space with at least 2 points, {} has {}".format(
            space.name, space.num_points()), space.num_points())


def _require_class(kernel, expected, operation):
    if kernel.kernel_class is not expected:
        raise KernelError("{} needs a {} kernel, got {}".format(operation, expected.value,
                                                                kernel.kernel_class.value))


def _sum_rows(space, row_terms):
    """ Evaluate every output point as the compensated sum of row_terms(x), in ascending id order """
    def chunk(start, stop):
        return [ordered_sum(row_terms(x)) for x in range(start, stop)]
    values = [value for part in parallel.map_chunks(chunk, space.num_points()) for value in part]
    return SampledFunction(space, values)


def _matrix_apply(kernel, f, excluded=()):
    """ x -> sum over y of K(x,y) f(y) mu(y), with y = x and every y in excluded left out """
    space = f.space
    matrix = kernels.kernel_matrix(kernel, space)
    weighted = f.values * space.weights

    def row_terms(x):
        terms = matrix[x] * weighted
        terms[x] = 0
        for y in excluded:
            terms[y] = 0
        return terms
    return _sum_rows(space, row_terms)


def _full_counts(space, excluded=0):
    return [space.num_points() - 1 - excluded] * space.num_points()


def identity(f):
    return OperatorResult(SampledFunction(f.space, f.values), [0] * f.space.num_points(), notes=["identity"])


def apply_fractional(kernel, f):
    """ L_alpha f(x) = sum over y != x of K(x,y) f(y) mu(y) """
    _require_class(kernel, KernelClass.Fractional, "apply_fractional")
    _require_points(f.space)
    return OperatorResult(_matrix_apply(kernel, f), _full_counts(f.space), notes=["diagonal excluded"])


def apply_truncated(kernel, epsilon, f):
    """ T_eps f(x) = sum over y of eta(d(x,y)/eps) K(x,y) f(y) mu(y); the diagonal contributes 0 """
    _require_class(kernel, KernelClass.Singular, "apply_truncated")
    _require_points(f.space)
    truncated = kernels.truncate_kernel(kernel, epsilon)
    space = f.space
    counts = np.count_nonzero(space.distances > truncated.epsilon / 2.0, axis=1).tolist()
    return OperatorResult(_matrix_apply(truncated, f), counts, epsilon=truncated.epsilon)


def apply_truncated_adjoint(kernel, epsilon, f):
    """ T*_eps with kernel conj K(y,x) """
    return apply_truncated(kernels.adjoint_kernel(kernel), epsilon, f)


def apply_pv(kernel, f):
    """ The principal value on a finite space: the sum over y != x, which every T_eps with eps below the
    nearest distance from x already equals """
    _require_class(kernel, KernelClass.Singular, "apply_pv")
    _require_points(f.space)
    space = f.space
    return OperatorResult(_matrix_apply(kernels.untruncated(kernel), f), _full_counts(space),
                          epsilon_star=space.nearest_distances.tolist())


def apply_hypersingular(kernel, f):
    """ D^alpha f(x) = sum over y != x of D(x,y) (f(y) - f(x)) mu(y) """
    _require_class(kernel, KernelClass.Hypersingular, "apply_hypersingular")
    _require_points(f.space)
    space = f.space
    matrix = kernels.kernel_matrix(kernel, space)

    def row_terms(x):
        terms = matrix[x] * ((f.values - f.values[x]) * space.weights)
        terms[x] = 0
        return terms
    return OperatorResult(_sum_rows(space, row_terms), _full_counts(space))


def _normalized(kernel, x0, f):
    space = f.space
    x0 = space.check_id(x0)
    matrix = kernels.kernel_matrix(kernels.untruncated(kernel), space)
    weighted = f.values * space.weights

    def row_terms(x):
        terms = (matrix[x] - matrix[x0]) * weighted
        terms[x] = 0
        terms[x0] = 0
        return terms
    counts = [space.num_points() - (1 if x == x0 else 2) for x in space.ids()]
    notes = ["y = x0 = {} excluded from every sum (K(x0, x0) is undefined)".format(x0)]
    return _sum_rows(space, row_terms), counts, notes


def normalized_fractional(kernel, x0, f):
    """ L'_alpha f(x) = sum over y not in {x, x0} of (K(x,y) - K(x0,y)) f(y) mu(y) """
    _require_class(kernel, KernelClass.Fractional, "normalized_fractional")
    _require_points(f.space)
    output, counts, notes = _normalized(kernel, x0, f)
    return OperatorResult(output, counts, notes=notes)


def normalized_pv(kernel, x0, f):
    _require_class(kernel, KernelClass.Singular, "normalized_pv")
    _require_points(f.space)
    output, counts, notes = _normalized(kernel, x0, f)
    return OperatorResult(output, counts, epsilon_star=f.space.nearest_distances.tolist(), notes=notes)


def compose(outer, inner, f):
    first = inner(f)
    second = outer(first.output)
    if second.output.space is not f.space:
        raise OperatorError("composed operators must act on one space")
    counts = [a + b for a, b in zip(first.terms_per_point, second.terms_per_point)]
    return OperatorResult(second.output, counts, notes=first.notes + second.notes)


def weighted_inner_product(f, g):
    """ <f, g> = sum of f conj(g) mu, compensated and in id order """
    if f.space is not g.space:
        raise OperatorError("inner product of functions on different spaces")
    return ordered_sum(f.values * np.conj(g.values) * f.space.weights)


def make_operator(kind, kernel=None, epsilon=None, x0=None):
    """ A closure f -> OperatorResult, the form consumed by compose and the harness """
    kind = OperatorKind(kind)
    if kind is OperatorKind.Identity:
        return identity
    if kernel is None:
        raise OperatorError("operator '{}' needs a kernel".format(kind.value))
    if kind in (OperatorKind.Truncated, OperatorKind.TruncatedAdjoint) and epsilon is None:
        raise OperatorError("operator '{}' needs epsilon".format(kind.value))
    if kind in (OperatorKind.NormalizedFractional, OperatorKind.NormalizedPrincipalValue) and x0 is None:
        raise OperatorError("operator '{}' needs x0".format(kind.value))
    table = {
        OperatorKind.Fractional: lambda f: apply_fractional(kernel, f),
        OperatorKind.Truncated: lambda f: apply_truncated(kernel, epsilon, f),
        OperatorKind.TruncatedAdjoint: lambda f: apply_truncated_adjoint(kernel, epsilon, f),
        OperatorKind.PrincipalValue: lambda f: apply_pv(kernel, f),
        OperatorKind.Hypersingular: lambda f: apply_hypersingular(kernel, f),
        OperatorKind.NormalizedFractional: lambda f: normalized_fractional(kernel, x0, f),
        OperatorKind.NormalizedPrincipalValue: lambda f: normalized_pv(kernel, x0, f),
    }
    return table[kind]


class AnnulusReport:
    def __init__(self, maximum, center, r1, r2, per_center):
        self.maximum = maximum
        # r1 = 0.0 stands for any inner radius below the nearest distance
        self.center = center
        self.r1 = r1
        self.r2 = r2
        self.per_center = per_center

    def to_dict(self):
        return {"maximum": self.maximum, "witness": {"center": self.center, "r1": self.r1, "r2": self.r2},
                "per_center": list(self.per_center)}


def _annulus_rows(matrix, space, start, stop):
    best = None
    per_center = []
    for x in range(start, stop):
        row = space.distances[x]
        others = np.delete(np.arange(space.num_points()), x)
        levels, inverse = np.unique(row[others], return_inverse=True)
        terms = matrix[x, others] * space.weights[others]
        sums = [ordered_sum(terms[inverse == level]) for level in range(levels.size)]
        prefix = np.concatenate([[0j], np.cumsum(sums)])
        gaps = np.abs(prefix[None, :] - prefix[:, None])
        upper = np.triu(np.ones(gaps.shape, dtype=bool), k=1)
        gaps = np.where(upper, gaps, -np.inf)
        flat = int(np.argmax(gaps))
        a, b = divmod(flat, prefix.size)
        value = float(gaps[a, b])
        per_center.append(value)
        if best is None or value > best[0]:
            r1 = 0.0 if a == 0 else float(levels[a - 1])
            best = (value, (x, r1, float(levels[b - 1])))
    return best, per_center


def check_annulus_cancellation(kernel, space):
    """
    M = max over centers x and radii 0 < r1 < r2 of |sum over r1 < d(x,y) <= r2 of K(x,y) mu(y)|. Annulus sums
    only change at distance values, so scanning every pair of distance levels is exact.
    """
    _require_points(space)
    matrix = kernels.kernel_matrix(kernel, space)
    results = parallel.map_chunks(lambda start, stop: _annulus_rows(matrix, space, start, stop), space.num_points())
    per_center = [value for _, part in results for value in part]
    maximum, (center, r1, r2) = parallel.reduce_max(best for best, _ in results)
    logger.get().info("annulus cancellation for {} on {}: M={} at center {}".format(
        kernel.source.value, space.name, maximum, center))
    return AnnulusReport(maximum, center, r1, r2, per_center)


class LimitReport:
    def __init__(self, r0, values, thresholds):
        self.r0 = r0
        self.values = values
        self.thresholds = thresholds

    def to_dict(self):
        return {"r0": self.r0, "values": [[z.real, z.imag] for z in self.values.tolist()],
                "epsilon_star": self.thresholds.tolist()}


def default_r0(space):
    return min(1.0, space.diameter)


def check_s4_limit(kernel, space, r0=None):
    """ Per point: sum over 0 < d(x,y) < R0 of K(x,y) mu(y), the value at which the eps -> 0 limit has settled
    once eps drops below the nearest distance from x """
    r0 = default_r0(space) if r0 is None else r0
    if not (isinstance(r0, numbers.Real) and r0 > 0):
        raise ParameterRangeError("R0 must be positive, got {}".format(r0), "r0", r0)
    matrix = kernels.kernel_matrix(kernel, space)

    def row_terms(x):
        inside = (space.distances[x] < r0)
        inside[x] = False
        return np.where(inside, matrix[x] * space.weights, 0)
    values = _sum_rows(space, row_terms).values
    return LimitReport(float(r0), values, space.nearest_distances)
