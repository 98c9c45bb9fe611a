####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     space.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+, numpy, scipy
#
####################################################################################################

import hashlib
import json
import math
import numbers
import threading
from collections import OrderedDict
from enum import Enum

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import logger
from . import parallel
from .errors import DegenerateSpaceError, MetricAxiomError, ParameterRangeError, SchemaError, SpaceError

# exhaustive triangle checks up to N = 512
DEFAULT_TRIPLE_BUDGET = 512 ** 3
TRIANGLE_TOLERANCE = 1e-12
MAX_LISTED_VIOLATIONS = 1000
TRIPLE_SAMPLE_CHUNK = 2 ** 20
# kernel matrices kept per space
KERNEL_CACHE_SIZE = 8


class SpaceKind(Enum):
    UniformInterval = "uniform_interval"
    UniformCircle = "uniform_circle"
    Cantor4 = "cantor4"
    Islands = "islands"


class MetricSource(Enum):
    Euclidean = "euclidean"
    Table = "table"


def _read_only(array):
    array.flags.writeable = False
    return array


class MetricMeasureSpace:
    """
    A finite metric measure space: N points with ids 0..N-1, an N x N distance table (given directly or
    derived from coordinates), strictly positive point masses, the growth exponent n and the resolution
    scale h below which the growth condition is not asserted.

    Instances are immutable; derived tables (sorted distance rows, distance powers) are computed lazily
    and cached, so a space can be shared freely across worker threads.
    """

    def __init__(self, name, weights, n, coords=None, distances=None, metric=MetricSource.Euclidean, h=None,
                 geometry=None):
        self.name = str(name)
        self.metric = MetricSource(metric)
        self.geometry = geometry

        weights = np.array(weights, dtype=float).ravel()
        if weights.size == 0:
            raise DegenerateSpaceError("a space needs at least one point", 0)
        for index, w in enumerate(weights):
            if not math.isfinite(w):
                raise SpaceError("weight at index {} is not finite: {}".format(index, w), index)
            if w <= 0:
                raise SpaceError("weights must be strictly positive, got {} at index {}".format(w, index), index)
        self.weights = _read_only(weights)
        num_points = weights.size

        if not (isinstance(n, numbers.Real) and math.isfinite(n) and n > 0):
            raise ParameterRangeError("growth exponent n must be a positive real, got {}".format(n), "n", n)
        self.n = float(n)

        self.coords = None
        if coords is not None:
            coords = np.array(coords, dtype=float)
            if coords.ndim == 1:
                coords = coords.reshape(-1, 1)
            if coords.ndim != 2 or coords.shape[0] != num_points:
                raise SpaceError("expected {} coordinate rows, got shape {}".format(num_points, coords.shape))
            if not np.all(np.isfinite(coords)):
                row = int(np.argwhere(~np.isfinite(coords))[0][0])
                raise SpaceError("coordinates of point {} are not finite".format(row), row)
            self.coords = _read_only(coords)

        if self.metric is MetricSource.Euclidean:
            if self.coords is None:
                raise SpaceError("a euclidean space needs coordinates")
            if num_points == 1:
                table = np.zeros((1, 1))
            else:
                table = squareform(pdist(self.coords, metric="euclidean"))
        else:
            if distances is None:
                raise SpaceError("a table space needs a distance table")
            table = np.array(distances, dtype=float)
            if table.shape != (num_points, num_points):
                raise SpaceError("expected a {0} x {0} distance table, got shape {1}".format(num_points, table.shape))
            if not np.all(np.isfinite(table)):
                x, y = (int(v) for v in np.argwhere(~np.isfinite(table))[0])
                raise SpaceError("distance entry ({}, {}) is not finite".format(x, y), x)
        self.distances = _read_only(table)

        off_diagonal = ~np.eye(num_points, dtype=bool)
        if num_points > 1:
            masked = np.where(off_diagonal, table, np.inf)
            self.nearest_distances = _read_only(masked.min(axis=1))
            self.min_distance = float(self.nearest_distances.min())
            self.diameter = float(table.max())
        else:
            self.nearest_distances = _read_only(np.zeros(1))
            self.min_distance = 0.0
            self.diameter = 0.0

        if h is None:
            h = float(self.nearest_distances.max()) if num_points > 1 else 1.0
        if not (math.isfinite(h) and h > 0):
            raise ParameterRangeError("resolution scale h must be positive, got {}".format(h), "h", h)
        self.h = float(h)

        self._lock = threading.Lock()
        self._cache = {}
        self._kernel_cache = OrderedDict()

    def __repr__(self):
        return "MetricMeasureSpace({}, N={}, n={}, metric={})".format(self.name, self.num_points(), self.n,
                                                                       self.metric.value)

    def num_points(self):
        return self.weights.size

    def ids(self):
        return range(self.num_points())

    def total_mass(self):
        return math.fsum(self.weights.tolist())

    def dimension(self):
        return None if self.coords is None else self.coords.shape[1]

    def check_id(self, point_id):
        if not isinstance(point_id, numbers.Integral) or point_id < 0 or point_id >= self.num_points():
            raise SpaceError("unknown point id {} (space has {} points)".format(point_id, self.num_points()))
        return int(point_id)

    def _cached(self, key, factory):
        with self._lock:
            if key not in self._cache:
                self._cache[key] = factory()
            return self._cache[key]

    def _cached_kernel(self, key, factory):
        """ Least-recently-used store for kernel matrices, at most KERNEL_CACHE_SIZE entries """
        with self._lock:
            if key in self._kernel_cache:
                self._kernel_cache.move_to_end(key)
                return self._kernel_cache[key]
            value = factory()
            self._kernel_cache[key] = value
            while len(self._kernel_cache) > KERNEL_CACHE_SIZE:
                self._kernel_cache.popitem(last=False)
            return value

    def sorted_balls(self):
        """ For each center: its distance row in ascending order (ties by id) and the running ball mass """
        def build():
            order = np.argsort(self.distances, axis=1, kind="stable")
            rows = np.take_along_axis(self.distances, order, axis=1)
            masses = np.cumsum(self.weights[order], axis=1)
            return _read_only(rows), _read_only(masses)
        return self._cached("sorted_balls", build)

    def distinct_distances(self):
        """ Sorted distinct positive distances (the critical radii of every ball scan) """
        def build():
            off_diagonal = ~np.eye(self.num_points(), dtype=bool)
            return _read_only(np.unique(self.distances[off_diagonal]))
        return self._cached("distinct_distances", build)

    def distance_power(self, exponent):
        """ d(x,y)**exponent with the diagonal set to zero """
        def build():
            with np.errstate(divide="ignore"):
                table = np.power(self.distances, exponent)
            np.fill_diagonal(table, 0.0)
            return _read_only(table)
        return self._cached(("power", float(exponent)), build)

    def scaled(self, factor, weight_factor=1.0):
        """ A copy of this space with distances multiplied by factor and weights by weight_factor """
        coords = None if self.coords is None else self.coords * factor
        distances = None if self.metric is MetricSource.Euclidean else self.distances * factor
        return MetricMeasureSpace("{}_scaled".format(self.name), self.weights * weight_factor, self.n, coords=coords,
                                  distances=distances, metric=self.metric, h=self.h * factor, geometry=self.geometry)


class GrowthReport:
    def __init__(self, a_estimate, n, r_min, worst_witness, per_radius_profile):
        self.a_estimate = a_estimate
        self.n = n
        self.r_min = r_min
        # (center id, radius, ball mass, ratio)
        self.worst_witness = worst_witness
        self.per_radius_profile = per_radius_profile

    def to_dict(self):
        center, radius, mass, ratio = self.worst_witness
        return {
            "a_estimate": self.a_estimate,
            "n": self.n,
            "r_min": self.r_min,
            "worst_witness": {"center": center, "radius": radius, "ball_mass": mass, "ratio": ratio},
            "per_radius_profile": [[r, v] for r, v in self.per_radius_profile],
        }


class DoublingReport:
    def __init__(self, constant, center, radius):
        self.constant = constant
        self.center = center
        self.radius = radius

    def to_dict(self):
        return {"doubling_constant": self.constant, "center": self.center, "radius": self.radius}


class MetricAxiomReport:
    def __init__(self, num_points, pair_violations, triangle_violations, num_triangle_violations, triples_checked,
                 exhaustive, seed):
        # (axiom, x, y, detail)
        self.pair_violations = pair_violations
        # (x, y, z, d(x,z), d(x,y) + d(y,z))
        self.triangle_violations = triangle_violations
        self.num_triangle_violations = num_triangle_violations
        self.num_points = num_points
        self.triples_checked = triples_checked
        self.exhaustive = exhaustive
        self.seed = seed

    def ok(self):
        return not self.pair_violations and self.num_triangle_violations == 0

    def first_violation(self):
        if self.pair_violations:
            axiom, x, y, detail = self.pair_violations[0]
            return MetricAxiomError("{} violated for pair ({}, {}): {}".format(axiom, x, y, detail), axiom, (x, y))
        if self.triangle_violations:
            x, y, z, lhs, rhs = self.triangle_violations[0]
            return MetricAxiomError("triangle inequality violated for ({}, {}, {}): {} > {}".format(x, y, z, lhs, rhs),
                                    "triangle", (x, y, z))
        return None

    def to_dict(self):
        return {
            "ok": self.ok(),
            "num_points": self.num_points,
            "pair_violations": [{"axiom": a, "ids": [x, y], "detail": d} for a, x, y, d in self.pair_violations],
            "triangle_violations": [{"ids": [x, y, z], "d_xz": lhs, "d_xy_plus_d_yz": rhs}
                                    for x, y, z, lhs, rhs in self.triangle_violations],
            "num_triangle_violations": self.num_triangle_violations,
            "triples_checked": self.triples_checked,
            "exhaustive": self.exhaustive,
            "seed": self.seed,
        }


def _require_size(value, name):
    if not isinstance(value, numbers.Integral) or value < 1:
        raise ParameterRangeError("{} must be a positive integer, got {}".format(name, value), name, value)
    return int(value)


def uniform_interval(points):
    points = _require_size(points, "points")
    coords = (np.arange(points, dtype=float) + 0.5) / points
    return MetricMeasureSpace("uniform_interval_{}".format(points), np.full(points, 1.0 / points), 1.0,
                              coords=coords.reshape(-1, 1), metric=MetricSource.Euclidean, geometry="line")


def circle_chord_table(points):
    """ Chord lengths 2 sin(pi k / N) by index offset k; exactly symmetric and rotation invariant """
    index = np.arange(points)
    offsets = np.abs(index[:, None] - index[None, :])
    offsets = np.minimum(offsets, points - offsets)
    chords = 2.0 * np.sin(np.pi * np.arange(points // 2 + 1) / points)
    return chords[offsets]


def uniform_circle(points):
    points = _require_size(points, "points")
    angles = 2.0 * np.pi * np.arange(points) / points
    coords = np.column_stack([np.cos(angles), np.sin(angles)])
    return MetricMeasureSpace("uniform_circle_{}".format(points), np.full(points, 1.0 / points), 1.0, coords=coords,
                              distances=circle_chord_table(points), metric=MetricSource.Table, geometry="circle")


def cantor4(generation):
    """ Centers of the 4**g squares of the corner-quarters Cantor construction on the unit square """
    generation = _require_size(generation, "generation")
    centers = np.array([[0.5, 0.5]])
    side = 1.0
    corners = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]])
    for _ in range(generation):
        offset = 3.0 * side / 8.0
        centers = (centers[:, None, :] + offset * corners[None, :, :]).reshape(-1, 2)
        side /= 4.0
    count = centers.shape[0]
    return MetricMeasureSpace("cantor4_{}".format(generation), np.full(count, 1.0 / count), 1.0, coords=centers,
                              metric=MetricSource.Euclidean, geometry="plane")


def islands(levels):
    """ K blocks on the line; block k has length 4**-k, 8 uniform points and mass 2**-k / (1 - 2**-K), with unit
    gaps between consecutive blocks """
    levels = _require_size(levels, "levels")
    normalization = 1.0 - 2.0 ** -levels
    coords = []
    weights = []
    start = 0.0
    for k in range(1, levels + 1):
        length = 4.0 ** -k
        coords.extend(start + (j + 0.5) * length / 8.0 for j in range(8))
        weights.extend([2.0 ** -k / normalization / 8.0] * 8)
        start += length + 1.0
    return MetricMeasureSpace("islands_{}".format(levels), weights, 1.0, coords=np.array(coords).reshape(-1, 1),
                              metric=MetricSource.Euclidean, geometry="line")


_builtin_parameters = {
    SpaceKind.UniformInterval: ("points", uniform_interval),
    SpaceKind.UniformCircle: ("points", uniform_circle),
    SpaceKind.Cantor4: ("generation", cantor4),
    SpaceKind.Islands: ("levels", islands),
}


def builtin_parameter_name(kind):
    return _builtin_parameters[SpaceKind(kind)][0]


def builtin_space(kind, size):
    """ Build one of the fixture spaces. size is the point count (interval, circle), the generation (cantor4)
    or the level count (islands). """
    try:
        kind = SpaceKind(kind)
    except ValueError:
        raise ParameterRangeError("unknown space kind '{}', expected one of {}".format(
            kind, [k.value for k in SpaceKind]), "kind", kind)
    _, factory = _builtin_parameters[kind]
    space = factory(size)
    logger.get().info("built space {} with {} points".format(space.name, space.num_points()))
    return space


def check_metric_axioms(space, triple_budget=DEFAULT_TRIPLE_BUDGET, seed=0):
    """
    Exhaustive pair checks (zero diagonal, symmetry, positivity) and a triangle inequality check that is
    exhaustive when N**3 <= triple_budget, otherwise run on triple_budget uniformly sampled triples drawn
    with the given seed. Violations are report content, never exceptions.
    """
    table = space.distances
    num_points = table.shape[0]
    pair_violations = []
    for x in range(num_points):
        if table[x, x] != 0:
            pair_violations.append(("diagonal", x, x, "d({0},{0})={1}".format(x, table[x, x])))
    upper_x, upper_y = np.triu_indices(num_points, k=1)
    for x, y in zip(upper_x.tolist(), upper_y.tolist()):
        if table[x, y] != table[y, x]:
            pair_violations.append(("symmetry", x, y, "d({0},{1})={2} but d({1},{0})={3}".format(
                x, y, table[x, y], table[y, x])))
    off_x, off_y = np.nonzero((table <= 0) & ~np.eye(num_points, dtype=bool))
    for x, y in zip(off_x.tolist(), off_y.tolist()):
        pair_violations.append(("positivity", x, y, "d({},{})={}".format(x, y, table[x, y])))

    tolerance = TRIANGLE_TOLERANCE * max(space.diameter, 1.0)
    exhaustive = num_points ** 3 <= triple_budget
    found = []
    if exhaustive:
        def scan(start, stop):
            hits = []
            for y in range(start, stop):
                bound = table[:, y][:, None] + table[y, :][None, :]
                xs, zs = np.nonzero(table > bound + tolerance)
                hits.extend((int(x), y, int(z)) for x, z in zip(xs, zs))
            return hits
        for hits in parallel.map_chunks(scan, num_points):
            found.extend(hits)
        triples_checked = num_points ** 3
    else:
        def sample(bounds):
            start, stop = bounds
            # one generator per chunk, so the draw depends on seed and chunk index only
            rng = np.random.default_rng([seed, start // TRIPLE_SAMPLE_CHUNK])
            triples = rng.integers(0, num_points, size=(stop - start, 3))
            x, y, z = triples[:, 0], triples[:, 1], triples[:, 2]
            bad = table[x, z] > table[x, y] + table[y, z] + tolerance
            return set(tuple(int(v) for v in t) for t in triples[bad])
        hits = set()
        for part in parallel.map_ordered(sample, parallel.chunk_ranges(int(triple_budget), TRIPLE_SAMPLE_CHUNK)):
            hits.update(part)
        found = sorted(hits)
        triples_checked = int(triple_budget)

    found.sort()
    triangle_violations = [(x, y, z, float(table[x, z]), float(table[x, y] + table[y, z]))
                           for x, y, z in found[:MAX_LISTED_VIOLATIONS]]
    report = MetricAxiomReport(num_points, pair_violations, triangle_violations, len(found), triples_checked,
                               exhaustive, seed)
    logger.get().info("metric axiom check on {}: {} pair and {} triangle violations".format(
        space.name, len(pair_violations), len(found)))
    return report


def ball_mass(space, center, r, closed=True):
    center = space.check_id(center)
    if not r > 0:
        raise ParameterRangeError("ball radius must be positive, got {}".format(r), "r", r)
    rows, masses = space.sorted_balls()
    side = "right" if closed else "left"
    count = int(np.searchsorted(rows[center], r, side=side))
    return float(masses[center][count - 1]) if count > 0 else 0.0


def _critical_radii(space, r_min):
    radii = space.distinct_distances()
    radii = radii[(radii >= r_min) & (radii <= space.diameter)]
    if radii.size == 0 or radii[0] != r_min:
        radii = np.concatenate([[r_min], radii])
    return radii


def estimate_growth_constant(space, n=None, r_min=None):
    """
    Best constant A with mu(B(x, r)) <= A r**n over all centers and all r in [r_min, diameter]. Ball mass is a
    right-continuous step function of r, so the supremum is attained at r_min or at a distance value.
    """
    n = space.n if n is None else n
    if not n > 0:
        raise ParameterRangeError("growth exponent must be positive, got {}".format(n), "n", n)
    if space.num_points() < 2:
        raise DegenerateSpaceError("growth estimation needs at least 2 points", space.num_points())
    r_min = space.h if r_min is None else r_min
    if not r_min > 0:
        raise ParameterRangeError("r_min must be positive, got {}".format(r_min), "r_min", r_min)
    if r_min > space.diameter:
        raise ParameterRangeError("r_min {} exceeds the diameter {}".format(r_min, space.diameter), "r_min", r_min)

    radii = _critical_radii(space, r_min)
    powers = np.power(radii, n)
    rows, masses = space.sorted_balls()

    def scan(start, stop):
        profile = np.full(radii.size, -np.inf)
        best = None
        for center in range(start, stop):
            index = np.searchsorted(rows[center], radii, side="right")
            ratios = masses[center][index - 1] / powers
            profile = np.maximum(profile, ratios)
            k = int(np.argmax(ratios))
            if best is None or ratios[k] > best[0]:
                best = (float(ratios[k]), center, k, float(masses[center][index[k] - 1]))
        return profile, best

    results = parallel.map_chunks(scan, space.num_points())
    profile = np.max([p for p, _ in results], axis=0)
    ratio, center, k, mass = parallel.reduce_max([b for _, b in results])
    report = GrowthReport(ratio, float(n), float(r_min), (center, float(radii[k]), mass, ratio),
                          [(float(r), float(v)) for r, v in zip(radii, profile)])
    logger.get().info("growth constant of {} with n={}: A={} at center {}, r={}".format(
        space.name, n, ratio, center, radii[k]))
    return report


def estimate_doubling_constant(space):
    """ max over x and r > 0 of mu(B(x, 2r)) / mu(B(x, r)) for closed balls; the supremum is attained at
    r = d / 2 for a distance value d """
    if space.num_points() < 2:
        raise DegenerateSpaceError("doubling estimation needs at least 2 points", space.num_points())
    radii = space.distinct_distances() / 2.0
    doubled = space.distinct_distances()
    rows, masses = space.sorted_balls()

    def scan(start, stop):
        best = None
        for center in range(start, stop):
            inner = masses[center][np.searchsorted(rows[center], radii, side="right") - 1]
            outer = masses[center][np.searchsorted(rows[center], doubled, side="right") - 1]
            ratios = outer / inner
            k = int(np.argmax(ratios))
            if best is None or ratios[k] > best[0]:
                best = (float(ratios[k]), center, float(radii[k]))
        return best

    constant, center, radius = parallel.reduce_max(parallel.map_chunks(scan, space.num_points()))
    return DoublingReport(constant, center, radius)


# ---------------------------------------------------------------------------------------------------
# space files
# ---------------------------------------------------------------------------------------------------

def _number_list(document, field, depth):
    value = document.get(field)

    def check(item, level):
        if level == 0:
            if isinstance(item, bool) or not isinstance(item, numbers.Real):
                raise SchemaError("field '{}' must contain numbers, found {!r}".format(field, item), field)
            return
        if not isinstance(item, list):
            raise SchemaError("field '{}' must be a {}-level nested list".format(field, depth), field)
        for entry in item:
            check(entry, level - 1)

    check(value, depth)
    return value


def load_space(document, triple_budget=DEFAULT_TRIPLE_BUDGET, validate=True):
    """ Build a space from a parsed space-file document, validating its schema and (unless validate is False)
    the metric axioms """
    if not isinstance(document, dict):
        raise SchemaError("a space document must be a mapping")
    for field in ("name", "n", "metric", "weights"):
        if field not in document:
            raise SchemaError("space document is missing field '{}'".format(field), field)
    if not isinstance(document["name"], str):
        raise SchemaError("field 'name' must be a string", "name")
    if isinstance(document["n"], bool) or not isinstance(document["n"], numbers.Real):
        raise SchemaError("field 'n' must be a number", "n")
    try:
        metric = MetricSource(document["metric"])
    except ValueError:
        raise SchemaError("field 'metric' must be 'euclidean' or 'table', got {!r}".format(document["metric"]),
                          "metric")
    weights = _number_list(document, "weights", 1)
    coords = _number_list(document, "coords", 2) if "coords" in document else None
    distances = _number_list(document, "distances", 2) if "distances" in document else None
    if metric is MetricSource.Euclidean and coords is None:
        raise SchemaError("a euclidean space document needs 'coords'", "coords")
    if metric is MetricSource.Table and distances is None:
        raise SchemaError("a table space document needs 'distances'", "distances")
    if coords is not None and len(set(len(row) for row in coords)) > 1:
        raise SchemaError("all coordinate rows must have the same length", "coords")
    h = document.get("h")
    if h is not None and (isinstance(h, bool) or not isinstance(h, numbers.Real)):
        raise SchemaError("field 'h' must be a number", "h")

    space = MetricMeasureSpace(document["name"], weights, document["n"], coords=coords, distances=distances,
                               metric=metric, h=h, geometry=document.get("geometry"))
    if validate:
        violation = check_metric_axioms(space, triple_budget).first_violation()
        if violation is not None:
            raise violation
    return space


def space_to_document(space):
    document = {
        "name": space.name,
        "n": space.n,
        "metric": space.metric.value,
        "weights": space.weights.tolist(),
        "h": space.h,
    }
    if space.coords is not None:
        document["coords"] = space.coords.tolist()
    if space.metric is MetricSource.Table:
        document["distances"] = space.distances.tolist()
    if space.geometry is not None:
        document["geometry"] = space.geometry
    return document


def descriptor_hash(space):
    canonical = json.dumps(space_to_document(space), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def read_space(path, triple_budget=DEFAULT_TRIPLE_BUDGET, validate=True):
    with open(path, "r") as f:
        try:
            document = json.load(f)
        except ValueError as e:
            raise SchemaError("{} is not a valid space document: {}".format(path, e))
    return load_space(document, triple_budget, validate)


def write_space(space, path):
    with open(path, "w") as f:
        json.dump(space_to_document(space), f, indent=2, sort_keys=True)
        f.write("\n")


save_space = write_space
