####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     harness.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+, numpy, scipy
#
####################################################################################################

import math
import numbers
from enum import Enum

import numpy as np
from scipy.linalg import svdvals

from . import kernels
from . import logger
from . import operators
from . import parallel
from .errors import ConvergenceError, DegenerateSpaceError, OperatorError, ParameterRangeError
from .kernels import KernelClass
from .lipschitz import SampledFunction, constant_function, lambda_norm, lip_norm
from .space import estimate_growth_constant

LEMMA_TOLERANCE = 1e-9
DEFAULT_GRID_SIZE = 16
L2_TOLERANCE = 1e-10
L2_MAX_ITERATIONS = 20000
KREIN_SLACK = 1e-9


class Theorem(Enum):
    T1 = "1"
    T2 = "2"
    T3 = "3"
    T4 = "4"


def _is_number(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool) and math.isfinite(value)


def validate_hypotheses(theorem, alpha=None, beta=None, gamma=None, n=None):
    """ Parameter ranges a theorem assumes; returns the list of named violations (empty when they hold) """
    if not isinstance(theorem, Theorem):
        theorem = Theorem(str(theorem).upper().lstrip("T"))
    needed = {Theorem.T1: ("alpha", "beta", "gamma", "n"), Theorem.T2: ("beta", "gamma", "n"),
              Theorem.T3: ("beta", "gamma", "n"), Theorem.T4: ("alpha", "beta", "n")}[theorem]
    given = {"alpha": alpha, "beta": beta, "gamma": gamma, "n": n}
    missing = ["{} is required".format(name) for name in needed if not _is_number(given[name])]
    if missing:
        return missing

    violations = []
    if theorem is Theorem.T1:
        if not 0 < alpha:
            violations.append("0<α fails")
        if not alpha < gamma:
            violations.append("α<γ fails")
        if not gamma <= 1:
            violations.append("γ≤1 fails")
        if not 0 < beta:
            violations.append("0<β fails")
        if not beta < 1:
            violations.append("β<1 fails")
        if n > 1 and not alpha + beta <= 1:
            violations.append("α+β≤1 fails")
        if n <= 1 and not alpha + beta < n:
            violations.append("α+β<n fails")
    elif theorem in (Theorem.T2, Theorem.T3):
        if not 0 < beta:
            violations.append("0<β fails")
        if not beta < min(n, gamma):
            violations.append("β < min(n,γ) fails")
    else:
        if not 0 < alpha:
            violations.append("0<α fails")
        if not alpha < beta:
            violations.append("α<β fails")
        if not beta <= 1:
            violations.append("β≤1 fails")
        if not beta - alpha < n:
            violations.append("β−α<n fails")
    return violations


def require_hypotheses(theorem, **parameters):
    violations = validate_hypotheses(theorem, **parameters)
    if violations:
        label = theorem.value if isinstance(theorem, Theorem) else theorem
        raise ParameterRangeError("theorem {} hypotheses violated: {}".format(label, "; ".join(violations)),
                                  "hypotheses", violations)


def epsilon_grid(space, count=DEFAULT_GRID_SIZE):
    """ Log-spaced truncation scales from half the minimum distance (stabilized PV) to twice the diameter
    (identically zero) """
    if space.num_points() < 2:
        raise DegenerateSpaceError("an epsilon grid needs at least 2 points", space.num_points())
    return np.geomspace(space.min_distance / 2.0, 2.0 * space.diameter, count).tolist()


# ---------------------------------------------------------------------------------------------------
# lemma
# ---------------------------------------------------------------------------------------------------

class LemmaPart:
    def __init__(self, part, bound_constant, max_ratio, witness, tolerance):
        self.part = part
        self.bound_constant = bound_constant
        self.max_ratio = max_ratio
        # (center, radius, "at" or "right_limit")
        self.witness = witness
        self.passed = max_ratio <= 1.0 + tolerance

    def to_dict(self):
        center, radius, limit = self.witness
        return {"part": self.part, "bound_constant": self.bound_constant, "max_ratio": self.max_ratio,
                "witness": {"center": center, "radius": radius, "limit": limit}, "pass": self.passed}


class LemmaReport:
    def __init__(self, delta, n, a_estimate, r_min, parts):
        self.delta = delta
        self.n = n
        self.a_estimate = a_estimate
        self.r_min = r_min
        self.parts = parts

    @property
    def passed(self):
        return all(part.passed for part in self.parts)

    def to_dict(self):
        return {"delta": self.delta, "n": self.n, "a_estimate": self.a_estimate, "r_min": self.r_min,
                "parts": [part.to_dict() for part in self.parts], "pass": self.passed}


def lemma_constants(a, n, delta):
    return {
        1: a * 2.0 ** n / (2.0 ** delta - 1.0),
        2: a * 2.0 ** n * 2.0 ** delta / (2.0 ** delta - 1.0),
        3: a * 2.0 ** n,
    }


def _lemma_rows(space, n, delta, radii, constants, parts, start, stop):
    """ Worst ratio per part for centers start..stop, at every candidate radius and its right limit """
    best = {part: None for part in parts}
    num_radii = radii.size
    halves = radii / 2.0
    for x in range(start, stop):
        row = np.delete(space.distances[x], x)
        weights = np.delete(space.weights, x)
        order = np.argsort(row, kind="stable")
        ds, ws = row[order], weights[order]
        cut = {side: np.searchsorted(ds, radii, side=side) for side in ("left", "right")}
        half_cut = {side: np.searchsorted(ds, halves, side=side) for side in ("left", "right")}
        ratios = {}
        if 1 in parts:
            prefix = np.concatenate([[0.0], np.cumsum(ds ** (delta - n) * ws)])
            bound = constants[1] * radii ** delta
            ratios[1] = np.concatenate([prefix[cut["left"]], prefix[cut["right"]]]) / np.tile(bound, 2)
        if 2 in parts:
            suffix = np.concatenate([np.cumsum((ds ** (-(n + delta)) * ws)[::-1])[::-1], [0.0]])
            bound = constants[2] * radii ** (-delta)
            ratios[2] = np.concatenate([suffix[cut["left"]], suffix[cut["right"]]]) / np.tile(bound, 2)
        if 3 in parts:
            prefix = np.concatenate([[0.0], np.cumsum(ds ** (-n) * ws)])
            at = prefix[cut["left"]] - prefix[half_cut["left"]]
            right = prefix[cut["right"]] - prefix[half_cut["right"]]
            ratios[3] = np.concatenate([at, right]) / constants[3]
        for part, values in ratios.items():
            k = int(np.argmax(values))
            if best[part] is None or values[k] > best[part][0]:
                limit = "at" if k < num_radii else "right_limit"
                best[part] = (float(values[k]), (x, float(radii[k % num_radii]), limit))
    return best


def verify_lemma(space, n=None, delta=0.5, r_min=None, parts=(1, 2, 3), tolerance=LEMMA_TOLERANCE):
    """
    Check the three ball-sum estimates implied by the growth condition with their closed-form constants,
    at every center and every radius r >= r_min. Sums are piecewise constant in r with jumps at distances
    and their doubles, so evaluating each of those at r and as the right limit covers every real r.
    """
    n = space.n if n is None else float(n)
    parts = tuple(sorted(set(parts)))
    if not set(parts) <= {1, 2, 3}:
        raise ParameterRangeError("lemma parts are 1, 2 and 3, got {}".format(parts), "parts", parts)
    if 1 in parts and not 0 < delta < n:
        raise ParameterRangeError("lemma part 1 needs 0 < delta < n, got delta={} n={}".format(delta, n),
                                  "delta", delta)
    if not delta > 0:
        raise ParameterRangeError("lemma part 2 needs delta > 0, got {}".format(delta), "delta", delta)
    growth = estimate_growth_constant(space, n, r_min)
    constants = lemma_constants(growth.a_estimate, n, delta)
    distances = space.distinct_distances()
    radii = np.unique(np.concatenate([distances, 2.0 * distances, [growth.r_min]]))
    radii = radii[radii >= growth.r_min]

    results = parallel.map_chunks(
        lambda start, stop: _lemma_rows(space, n, delta, radii, constants, parts, start, stop), space.num_points())
    lemma_parts = []
    for part in parts:
        ratio, witness = parallel.reduce_max(best[part] for best in results)
        lemma_parts.append(LemmaPart(part, constants[part], ratio, witness, tolerance))
    report = LemmaReport(float(delta), n, growth.a_estimate, growth.r_min, lemma_parts)
    logger.get().info("lemma on {} with delta={}: {}".format(space.name, delta, "pass" if report.passed else "FAIL"))
    return report


# ---------------------------------------------------------------------------------------------------
# operator norms
# ---------------------------------------------------------------------------------------------------

class NormEstimate:
    def __init__(self, source_beta, target_beta, ratios, estimate, witness):
        self.source_beta = source_beta
        self.target_beta = target_beta
        self.ratios = ratios
        self.estimate = estimate
        self.witness = witness

    def to_dict(self):
        return {"source_beta": self.source_beta, "target_beta": self.target_beta, "ratios": list(self.ratios),
                "estimate": self.estimate, "witness": self.witness}


def estimate_operator_norm(op, space, source_beta, target_beta, family):
    """ max over the family of ||Tf||_target / ||f||_source, a lower bound on the operator norm """
    family = list(family)
    if not family:
        raise ParameterRangeError("the test family is empty", "family", 0)
    ratios = []
    for index, f in enumerate(family):
        if f.space is not space:
            raise OperatorError("test function {} is sampled on another space".format(index))
        denominator = lambda_norm(f, source_beta).total
        if denominator == 0:
            raise OperatorError("test function {} has zero norm".format(index))
        ratios.append(lambda_norm(op(f).output, target_beta).total / denominator)
    estimate, witness = parallel.reduce_max((value, index) for index, value in enumerate(ratios))
    logger.get().debug("operator norm estimate {} over {} functions".format(estimate, len(ratios)))
    return NormEstimate(float(source_beta), float(target_beta), ratios, estimate, witness)


def operator_matrix(op, space):
    """ Matrix of a linear operator closure, built column by column from point indicators """
    num_points = space.num_points()
    matrix = np.zeros((num_points, num_points), dtype=complex)
    for j in range(num_points):
        indicator = np.zeros(num_points, dtype=complex)
        indicator[j] = 1.0
        matrix[:, j] = op(SampledFunction(space, indicator)).output.values
    return matrix


def _weighted_matrix(op, space):
    root = np.sqrt(space.weights)
    return root[:, None] * operator_matrix(op, space) / root[None, :]


def l2_norm_oracle(op, space):
    """ Largest singular value of W^1/2 T W^-1/2 by full decomposition """
    return float(svdvals(_weighted_matrix(op, space))[0])


def power_iteration_norm(matrix, tolerance=L2_TOLERANCE, max_iterations=L2_MAX_ITERATIONS, seed=0):
    """ Spectral norm of matrix from Rayleigh quotients of B^H B, stopping on relative residual """
    gram = np.conj(matrix.T) @ matrix
    rng = np.random.default_rng(seed)
    vector = rng.normal(size=gram.shape[0]) + 1j * rng.normal(size=gram.shape[0])
    vector /= np.linalg.norm(vector)
    value = 0.0
    for iteration in range(1, max_iterations + 1):
        image = gram @ vector
        value = float(np.real(np.vdot(vector, image)))
        size = np.linalg.norm(image)
        if size == 0:
            return 0.0
        if np.linalg.norm(image - value * vector) <= tolerance * abs(value):
            logger.get().debug("power iteration converged after {} steps".format(iteration))
            return math.sqrt(max(value, 0.0))
        vector = image / size
    raise ConvergenceError("power iteration did not converge in {} steps".format(max_iterations), max_iterations,
                           math.sqrt(max(value, 0.0)))


def weighted_l2_norm(op, space, tolerance=L2_TOLERANCE, max_iterations=L2_MAX_ITERATIONS, fallback=True):
    """ Operator norm on L2(mu) with <f, g> = sum f conj(g) mu """
    if not tolerance > 0:
        raise ParameterRangeError("tolerance must be positive, got {}".format(tolerance), "tolerance", tolerance)
    matrix = _weighted_matrix(op, space)
    try:
        return power_iteration_norm(matrix, tolerance, max_iterations)
    except ConvergenceError as e:
        if not fallback:
            raise
        logger.get().warning("{}; using the full decomposition instead".format(e))
        return float(svdvals(matrix)[0])


class AdjointCheck:
    def __init__(self, forward, backward):
        self.forward = forward
        self.backward = backward
        scale = max(abs(forward), abs(backward))
        self.relative_defect = 0.0 if scale == 0 else abs(forward - backward) / scale

    def to_dict(self):
        return {"forward": [self.forward.real, self.forward.imag], "backward": [self.backward.real,
                                                                                self.backward.imag],
                "relative_defect": self.relative_defect}


def adjoint_identity_check(space, kernel, epsilon, f, g):
    """ Compare <T_eps f, g> with <f, T*_eps g> """
    forward = operators.weighted_inner_product(operators.apply_truncated(kernel, epsilon, f).output, g)
    backward = operators.weighted_inner_product(f, operators.apply_truncated_adjoint(kernel, epsilon, g).output)
    return AdjointCheck(forward, backward)


# ---------------------------------------------------------------------------------------------------
# theorems
# ---------------------------------------------------------------------------------------------------

class VerificationReport:
    """ Outcome of one verification: parameters, measured quantities and flags """

    def __init__(self, check, parameters, quantities, passed, soft_violations=0):
        self.check = check
        self.parameters = parameters
        self.quantities = quantities
        self.passed = passed
        self.soft_violations = soft_violations

    def to_dict(self):
        return {"check": self.check, "parameters": self.parameters, "quantities": self.quantities,
                "pass": self.passed, "soft_violations": self.soft_violations}


def _finite(*values):
    return all(math.isfinite(v) for v in values)


def _with_constant(space, family):
    return [constant_function(space)] + list(family)


def verify_theorem1(space, alpha, beta, family, gamma=1.0):
    """ Fractional integral I_alpha: Lambda_beta -> Lambda_(alpha+beta), with the measured norm of I_alpha 1
    as the hypothesis; f = 1 leads the family so the converse direction shows in the first ratio """
    require_hypotheses(Theorem.T1, alpha=alpha, beta=beta, gamma=gamma, n=space.n)
    kernel = kernels.riesz_fractional(space.n, alpha, gamma)
    op = operators.make_operator(operators.OperatorKind.Fractional, kernel)
    one_norm = lambda_norm(op(constant_function(space)).output, alpha + beta)
    estimate = estimate_operator_norm(op, space, beta, alpha + beta, _with_constant(space, family))
    quantities = {"i_alpha_one_norm": one_norm.to_dict(), "norm_estimate": estimate.to_dict()}
    return VerificationReport("theorem1", {"alpha": alpha, "beta": beta, "gamma": gamma, "n": space.n}, quantities,
                              _finite(one_norm.total, estimate.estimate))


def verify_theorem2(space, kernel, beta, grid, family):
    """
    Smooth truncations T_eps on Lambda_beta across the grid, plus the annulus cancellation bound assembled from
    the uniform bound on T_eps 1: M <= 2 sup_eps sup|T_eps 1| + 2 C1 A 2^n.
    """
    if kernel.kernel_class is not KernelClass.Singular:
        raise ParameterRangeError("theorem 2 needs a singular kernel", "kernel", kernel.source.value)
    require_hypotheses(Theorem.T2, beta=beta, gamma=kernel.gamma, n=kernel.n)
    base = kernels.untruncated(kernel)
    probes = _with_constant(space, family)
    rows = []
    for epsilon in grid:
        op = operators.make_operator(operators.OperatorKind.Truncated, base, epsilon)
        one = op(constant_function(space)).output
        estimate = estimate_operator_norm(op, space, beta, beta, probes)
        rows.append({"epsilon": epsilon, "t_eps_one_norm": lambda_norm(one, beta).total, "t_eps_one_sup": one.sup(),
                     "norm_estimate": estimate.estimate, "witness": estimate.witness})

    size = kernels.verify_size_condition(base, space)
    growth = estimate_growth_constant(space, kernel.n)
    annulus = operators.check_annulus_cancellation(base, space)
    sup_one = max(row["t_eps_one_sup"] for row in rows)
    bound = 2.0 * sup_one + 2.0 * size.estimated_constant * growth.a_estimate * 2.0 ** kernel.n
    quantities = {
        "grid": rows,
        "sup_t_eps_one_norm": max(row["t_eps_one_norm"] for row in rows),
        "sup_norm_estimate": max(row["norm_estimate"] for row in rows),
        "annulus": {"maximum": annulus.maximum, "bound": bound, "size_constant": size.estimated_constant,
                    "a_estimate": growth.a_estimate, "holds": annulus.maximum <= bound,
                    "witness": annulus.to_dict()["witness"]},
    }
    passed = annulus.maximum <= bound and _finite(quantities["sup_t_eps_one_norm"], quantities["sup_norm_estimate"])
    return VerificationReport("theorem2", {"beta": beta, "kernel": kernel.to_dict(), "grid_size": len(grid)},
                              quantities, passed)


def verify_theorem3(space, kernel, beta, family, r0=None):
    """ Principal value K on Lip_beta with the norm of K1 as the hypothesis """
    if kernel.kernel_class is not KernelClass.Singular:
        raise ParameterRangeError("theorem 3 needs a singular kernel", "kernel", kernel.source.value)
    require_hypotheses(Theorem.T3, beta=beta, gamma=kernel.gamma, n=kernel.n)
    base = kernels.untruncated(kernel)
    annulus = operators.check_annulus_cancellation(base, space)
    limit = operators.check_s4_limit(base, space, r0)
    op = operators.make_operator(operators.OperatorKind.PrincipalValue, base)
    one_norm = lip_norm(op(constant_function(space)).output, beta)
    estimate = estimate_operator_norm(op, space, beta, beta, _with_constant(space, family))
    limit_sup = float(np.max(np.abs(limit.values)))
    quantities = {
        "annulus_maximum": annulus.maximum,
        "s4_r0": limit.r0,
        "s4_sup": limit_sup,
        "k_one_norm": one_norm.to_dict(),
        "norm_estimate": estimate.to_dict(),
    }
    passed = _finite(annulus.maximum, limit_sup, one_norm.total, estimate.estimate)
    return VerificationReport("theorem3", {"beta": beta, "kernel": kernel.to_dict(), "r0": limit.r0}, quantities,
                              passed)


def verify_theorem4(space, alpha, beta, family, gamma=1.0):
    """ Hypersingular D^alpha: Lambda_beta -> Lambda_(beta-alpha); it annihilates constants, so no
    hypothesis on D^alpha 1 is needed """
    require_hypotheses(Theorem.T4, alpha=alpha, beta=beta, n=space.n)
    kernel = kernels.riesz_hypersingular(space.n, alpha, gamma)
    op = operators.make_operator(operators.OperatorKind.Hypersingular, kernel)
    estimate = estimate_operator_norm(op, space, beta, beta - alpha, family)
    return VerificationReport("theorem4", {"alpha": alpha, "beta": beta, "gamma": gamma, "n": space.n},
                              {"norm_estimate": estimate.to_dict()}, _finite(estimate.estimate))


def krein_check(space, kernel, beta, grid, family, tolerance=L2_TOLERANCE, max_iterations=L2_MAX_ITERATIONS):
    """
    For each eps: the L2(mu) norm of T_eps against sqrt(C_A C_B), where C_A and C_B are the estimated
    Lambda_beta norms of T_eps and its adjoint. The estimates are lower bounds, so a failure is counted as a
    soft violation (the family may be too poor) rather than a hard failure.
    """
    if kernel.kernel_class is not KernelClass.Singular:
        raise ParameterRangeError("the L2 bridge needs a singular kernel", "kernel", kernel.source.value)
    base = kernels.untruncated(kernel)
    probes = _with_constant(space, family)
    rows = []
    soft = 0
    for epsilon in grid:
        forward = operators.make_operator(operators.OperatorKind.Truncated, base, epsilon)
        backward = operators.make_operator(operators.OperatorKind.TruncatedAdjoint, base, epsilon)
        c_a = estimate_operator_norm(forward, space, beta, beta, probes).estimate
        c_b = estimate_operator_norm(backward, space, beta, beta, probes).estimate
        l2 = weighted_l2_norm(forward, space, tolerance, max_iterations)
        bound = math.sqrt(c_a * c_b)
        holds = l2 <= bound * (1.0 + KREIN_SLACK)
        if not holds:
            soft += 1
            logger.get().warning("L2 norm {} exceeds sqrt(C_A C_B) = {} at eps={}".format(l2, bound, epsilon))
        adjoint = adjoint_identity_check(space, base, epsilon, probes[-1], probes[0])
        rows.append({"epsilon": epsilon, "c_a": c_a, "c_b": c_b, "l2_norm": l2, "bound": bound, "holds": holds,
                     "adjoint_defect": adjoint.relative_defect})
    quantities = {"grid": rows, "soft_violations": soft,
                  "note": "C_A and C_B are lower estimates; a violation may reflect a poor test family"}
    return VerificationReport("krein", {"beta": beta, "kernel": kernel.to_dict(), "grid_size": len(grid)},
                              quantities, True, soft)


def verify_composition(space, alpha, beta, family, gamma=1.0):
    """ D^alpha I_alpha and I_alpha D^alpha on Lambda_beta, gated on the parameter ranges and on the measured
    norm of I_alpha 1 in Lambda_(alpha+beta) """
    require_hypotheses(Theorem.T1, alpha=alpha, beta=beta, gamma=gamma, n=space.n)
    require_hypotheses(Theorem.T4, alpha=alpha, beta=alpha + beta, n=space.n)
    fractional = operators.make_operator(operators.OperatorKind.Fractional,
                                         kernels.riesz_fractional(space.n, alpha, gamma))
    hypersingular = operators.make_operator(operators.OperatorKind.Hypersingular,
                                            kernels.riesz_hypersingular(space.n, alpha, gamma))
    one = constant_function(space)
    gate = lambda_norm(fractional(one).output, alpha + beta)
    if not math.isfinite(gate.total):
        raise OperatorError("I_alpha 1 has no finite Lambda_(alpha+beta) norm")

    def forward(f):
        return operators.compose(hypersingular, fractional, f)

    def backward(f):
        return operators.compose(fractional, hypersingular, f)

    probes = _with_constant(space, family)
    forward_estimate = estimate_operator_norm(forward, space, beta, beta, probes)
    backward_estimate = estimate_operator_norm(backward, space, beta, beta, probes)
    quantities = {
        "i_alpha_one_norm": gate.to_dict(),
        "d_i_one_sup": forward(one).output.sup(),
        "i_d_one_sup": backward(one).output.sup(),
        "d_after_i": forward_estimate.to_dict(),
        "i_after_d": backward_estimate.to_dict(),
    }
    return VerificationReport("composition", {"alpha": alpha, "beta": beta, "gamma": gamma, "n": space.n},
                              quantities, _finite(forward_estimate.estimate, backward_estimate.estimate))
