####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     lipschitz.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+, numpy
#
####################################################################################################

import json
import math
import numbers
from enum import Enum

import numpy as np

from . import logger
from . import parallel
from .errors import DegenerateSpaceError, ParameterRangeError, SchemaError, SpaceError

PRUNE_SLACK = 1e-12


class FamilyKind(Enum):
    DistancePowers = "distance_powers"
    CoordinateWaves = "coordinate_waves"
    AnchoredMix = "anchored_mix"


class SampledFunction:
    """ Complex values aligned with the point ids of a space """

    def __init__(self, space, values):
        values = np.array(values, dtype=complex).ravel()
        if values.size != space.num_points():
            raise SpaceError("function has {} values but the space has {} points".format(
                values.size, space.num_points()))
        if not np.all(np.isfinite(values)):
            index = int(np.argwhere(~np.isfinite(values))[0][0])
            raise SpaceError("function value at index {} is not finite".format(index), index)
        values.flags.writeable = False
        self.space = space
        self.values = values

    def __repr__(self):
        return "SampledFunction({}, N={})".format(self.space.name, self.values.size)

    def __add__(self, other):
        if other.space is not self.space:
            raise SpaceError("cannot add functions sampled on different spaces")
        return SampledFunction(self.space, self.values + other.values)

    def __mul__(self, scalar):
        return SampledFunction(self.space, self.values * scalar)

    __rmul__ = __mul__

    def sup(self):
        return float(np.max(np.abs(self.values)))


class LipschitzNorm:
    def __init__(self, beta, sup_part, seminorm_part, witness_pair):
        self.beta = beta
        self.sup_part = sup_part
        self.seminorm_part = seminorm_part
        self.witness_pair = witness_pair

    @property
    def total(self):
        return self.sup_part + self.seminorm_part

    def to_dict(self):
        return {
            "beta": self.beta,
            "sup_part": self.sup_part,
            "seminorm_part": self.seminorm_part,
            "total": self.total,
            "witness_pair": list(self.witness_pair),
        }


def check_beta(beta, name="beta"):
    if isinstance(beta, bool) or not isinstance(beta, numbers.Real) or not 0 < beta <= 1:
        raise ParameterRangeError("{} must lie in (0, 1], got {}".format(name, beta), name, beta)
    return float(beta)


def _pair_ratios(values, powers, start, stop):
    """ |f(x)-f(y)| / d^beta(x,y) for rows start..stop, -inf on and below the diagonal """
    count = values.size
    rows = np.arange(start, stop)[:, None]
    upper = np.arange(count)[None, :] > rows
    differences = np.abs(values[start:stop, None] - values[None, :])
    ratios = np.full(differences.shape, -np.inf)
    np.divide(differences, powers[start:stop], out=ratios, where=upper)
    return ratios


def _scan_rows(values, powers, start, stop):
    ratios = _pair_ratios(values, powers, start, stop)
    if ratios.size == 0:
        return None
    flat = int(np.argmax(ratios))
    i, j = divmod(flat, values.size)
    value = float(ratios[i, j])
    if value == -np.inf:
        return None
    return value, (start + i, j)


def _pruned_scan(values, powers):
    """ Row-by-row scan that skips a row when (|f(x)| + max_{y>x} |f(y)|) / min_{y>x} d^beta(x,y) cannot
    beat the current maximum. Visits rows in ascending order, so the witness equals the exhaustive one. """
    count = values.size
    magnitudes = np.abs(values)
    tail_max = np.maximum.accumulate(magnitudes[::-1])[::-1]
    best = None
    skipped = 0
    for i in range(count - 1):
        nearest = float(np.min(powers[i, i + 1:]))
        bound = (magnitudes[i] + tail_max[i + 1]) / nearest * (1.0 + PRUNE_SLACK)
        if best is not None and bound <= best[0]:
            skipped += 1
            continue
        candidate = _scan_rows(values, powers, i, i + 1)
        if candidate is not None and (best is None or candidate[0] > best[0]):
            best = candidate
    logger.get().debug("pruned seminorm scan skipped {} of {} rows".format(skipped, count - 1))
    return best


def holder_seminorm(f, beta, pruned=False):
    """
    Exact maximum of |f(x) - f(y)| / d^beta(x, y) over all unordered pairs, with the lexicographically
    smallest attaining pair (x < y) as witness.
    """
    beta = check_beta(beta)
    space = f.space
    if space.num_points() < 2:
        raise DegenerateSpaceError("the Holder seminorm needs at least 2 points", space.num_points())
    powers = space.distance_power(beta)
    if pruned:
        value, pair = _pruned_scan(f.values, powers)
    else:
        value, pair = parallel.reduce_max(parallel.map_chunks(
            lambda start, stop: _scan_rows(f.values, powers, start, stop), space.num_points()))
    return value, pair


def lambda_norm(f, beta):
    """ The inhomogeneous norm sup|f| + |f|_beta """
    seminorm, pair = holder_seminorm(f, beta)
    return LipschitzNorm(float(beta), f.sup(), seminorm, pair)


# with strictly positive weights no nonempty set is null, so the a.e. class norm is the same computation
lip_norm = lambda_norm


def constant_function(space, value=1.0):
    return SampledFunction(space, np.full(space.num_points(), value, dtype=complex))


def distance_power_function(space, anchor, beta):
    """ f = d^beta(., anchor); its seminorm is 1 """
    anchor = space.check_id(anchor)
    return SampledFunction(space, space.distance_power(check_beta(beta))[anchor])


def _anchors(rng, num_points, count):
    return rng.choice(num_points, size=count, replace=count > num_points).tolist()


def test_family(space, beta, kind, count, seed=0):
    """ Deterministic family of probe functions for norm estimation """
    beta = check_beta(beta)
    kind = FamilyKind(kind)
    if isinstance(count, bool) or not isinstance(count, numbers.Integral) or count < 1:
        raise ParameterRangeError("family count must be a positive integer, got {}".format(count), "count", count)
    rng = np.random.default_rng(seed)
    num_points = space.num_points()
    powers = space.distance_power(beta)
    family = []
    if kind is FamilyKind.DistancePowers:
        for anchor in _anchors(rng, num_points, count):
            family.append(SampledFunction(space, powers[anchor]))
    elif kind is FamilyKind.CoordinateWaves:
        if space.coords is None:
            raise SpaceError("coordinate_waves needs a space with coordinates, {} has none".format(space.name))
        scale = 2.0 * math.pi / max(space.diameter, space.h)
        for _ in range(count):
            wave = rng.uniform(-scale, scale, size=space.dimension())
            f = SampledFunction(space, np.cos(space.coords @ wave))
            family.append(f * (1.0 / lambda_norm(f, beta).total))
    else:
        terms = min(3, num_points)
        for _ in range(count):
            anchors = rng.choice(num_points, size=terms, replace=False)
            coefficients = rng.normal(size=terms) + 1j * rng.normal(size=terms)
            coefficients /= math.fsum(np.abs(coefficients).tolist())
            f = SampledFunction(space, coefficients @ powers[anchors])
            total = lambda_norm(f, beta).total
            if total == 0:
                raise ParameterRangeError("anchored_mix produced a zero function", "seed", seed)
            family.append(f * (1.0 / total))
    logger.get().debug("built {} {} test functions on {}".format(len(family), kind.value, space.name))
    return family


# keep unittest discovery from collecting the family builder as a test
test_family.__test__ = False


def function_to_document(f):
    return {"space_name": f.space.name, "values": [[z.real, z.imag] for z in f.values.tolist()]}


def load_function(document, space):
    if not isinstance(document, dict) or "values" not in document:
        raise SchemaError("a function document needs a 'values' field", "values")
    name = document.get("space_name")
    if name is not None and name != space.name:
        raise SchemaError("function was sampled on '{}' but the space is '{}'".format(name, space.name),
                          "space_name")
    values = []
    for entry in document["values"]:
        if not isinstance(entry, list) or len(entry) != 2 or any(
                isinstance(v, bool) or not isinstance(v, numbers.Real) for v in entry):
            raise SchemaError("function values must be [re, im] number pairs, found {!r}".format(entry), "values")
        values.append(complex(entry[0], entry[1]))
    return SampledFunction(space, values)


def read_function(path, space):
    with open(path, "r") as f:
        return load_function(json.load(f), space)


def save_function(f, path):
    with open(path, "w") as out:
        json.dump(function_to_document(f), out, indent=2, sort_keys=True)
        out.write("\n")
