####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     space_test.py (test)
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+, numpy
#
####################################################################################################

import json
import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from lipops_test_base import LipOpsTestBase, table_space, two_point_space
from lipops import operators
from lipops import parallel
from lipops import space as spaces
from lipops.errors import (DegenerateSpaceError, MetricAxiomError, ParameterRangeError, SchemaError,
                           SpaceError)
from lipops.kernels import riesz_singular
from lipops.lipschitz import constant_function


class BuiltinSpaceTestCase(LipOpsTestBase):
    def test_uniform_interval(self):
        space = spaces.builtin_space("uniform_interval", 4)
        self.assertAllEqual(space.coords[:, 0], [0.125, 0.375, 0.625, 0.875])
        self.assertAllEqual(space.weights, [0.25] * 4)
        self.assertEqual(space.total_mass(), 1.0)
        self.assertEqual(space.n, 1.0)
        self.assertEqual(space.h, 0.25)

    def test_cantor4(self):
        space = spaces.builtin_space("cantor4", 2)
        self.assertEqual(space.num_points(), 16)
        self.assertAllEqual(space.weights, [0.0625] * 16)
        self.assertEqual(space.total_mass(), 1.0)
        self.assertEqual(space.dimension(), 2)

    def test_uniform_circle(self):
        space = spaces.builtin_space("uniform_circle", 4)
        self.assertAlmostEqual(space.distances[0, 1], np.sqrt(2.0), places=15)
        self.assertEqual(space.distances[0, 2], 2.0)
        self.assertEqual(space.geometry, "circle")

    def test_single_point_circle(self):
        space = spaces.builtin_space("uniform_circle", 1)
        self.assertEqual(space.num_points(), 1)
        self.assertEqual(space.total_mass(), 1.0)
        f = constant_function(space)
        with self.assertRaises(DegenerateSpaceError):
            operators.apply_pv(riesz_singular(1.0), f)
        with self.assertRaises(DegenerateSpaceError):
            spaces.estimate_growth_constant(space)

    def test_islands(self):
        space = spaces.builtin_space("islands", 3)
        self.assertEqual(space.num_points(), 24)
        self.assertAlmostEqual(space.total_mass(), 1.0, places=14)
        # block masses halve from one block to the next
        self.assertAlmostEqual(sum(space.weights[:8]), 2.0 * sum(space.weights[8:16]), places=14)

    def test_bad_size(self):
        with self.assertRaises(ParameterRangeError):
            spaces.builtin_space("uniform_interval", 0)
        with self.assertRaises(ParameterRangeError):
            spaces.builtin_space("cantor4", -1)
        with self.assertRaises(ParameterRangeError):
            spaces.builtin_space("torus", 4)


class LoadSpaceTestCase(LipOpsTestBase):
    def test_valid_two_point(self):
        space = spaces.load_space({"name": "pair", "n": 1, "metric": "table", "distances": [[0, 1], [1, 0]],
                                   "weights": [0.5, 0.5]})
        self.assertEqual(space.num_points(), 2)
        self.assertEqual(space.diameter, 1.0)

    def test_asymmetric_table(self):
        with self.assertRaises(MetricAxiomError) as context:
            spaces.load_space({"name": "bad", "n": 1, "metric": "table", "distances": [[0, 1], [2, 0]],
                               "weights": [0.5, 0.5]})
        self.assertEqual(context.exception.axiom, "symmetry")
        self.assertEqual(context.exception.ids, (0, 1))

    def test_zero_weight(self):
        with self.assertRaises(SpaceError) as context:
            spaces.load_space({"name": "bad", "n": 1, "metric": "table", "distances": [[0, 1], [1, 0]],
                               "weights": [0.5, 0.0]})
        self.assertEqual(context.exception.index, 1)

    def test_schema_errors(self):
        with self.assertRaises(SchemaError) as context:
            spaces.load_space({"name": "bad", "n": 1, "metric": "table", "weights": [1.0]})
        self.assertEqual(context.exception.field, "distances")
        with self.assertRaises(SchemaError) as context:
            spaces.load_space({"name": "bad", "metric": "euclidean", "coords": [[0]], "weights": [1.0]})
        self.assertEqual(context.exception.field, "n")
        with self.assertRaises(SchemaError):
            spaces.load_space({"name": "bad", "n": 1, "metric": "manhattan", "coords": [[0]], "weights": [1.0]})
        with self.assertRaises(SchemaError):
            spaces.load_space({"name": "bad", "n": 1, "metric": "euclidean", "coords": [[0]], "weights": ["a"]})

    def test_non_finite_distance(self):
        with self.assertRaises(SpaceError):
            spaces.load_space({"name": "bad", "n": 1, "metric": "table", "distances": [[0, float("inf")],
                                                                                     [float("inf"), 0]],
                               "weights": [0.5, 0.5]})

    def test_file_round_trip(self):
        original = spaces.builtin_space("cantor4", 2)
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "cantor.space")
            spaces.save_space(original, path)
            loaded = spaces.read_space(path)
            self.assertAllEqual(loaded.distances, original.distances)
            self.assertAllEqual(loaded.weights, original.weights)
            self.assertEqual(spaces.descriptor_hash(loaded), spaces.descriptor_hash(original))
            with open(path, "w") as f:
                f.write("{ not json")
            with self.assertRaises(SchemaError):
                spaces.read_space(path)

    def test_document_is_json(self):
        document = spaces.space_to_document(spaces.builtin_space("uniform_circle", 6))
        self.assertEqual(json.loads(json.dumps(document)), document)
        self.assertEqual(document["metric"], "table")


class BallMassTestCase(LipOpsTestBase):
    def setUp(self):
        self.space = spaces.uniform_interval(4)

    def test_closed_and_open(self):
        self.assertEqual(spaces.ball_mass(self.space, 1, 0.25, closed=True), 0.75)
        self.assertEqual(spaces.ball_mass(self.space, 1, 0.25, closed=False), 0.25)

    def test_large_radius(self):
        for center in self.space.ids():
            self.assertEqual(spaces.ball_mass(self.space, center, 0.75), 1.0)
            self.assertEqual(spaces.ball_mass(self.space, center, 5.0, closed=False), 1.0)

    def test_monotone(self):
        space = spaces.cantor4(2)
        radii = np.linspace(0.01, 1.5, 60)
        for center in (0, 5, 15):
            closed = [spaces.ball_mass(space, center, r) for r in radii]
            opened = [spaces.ball_mass(space, center, r, closed=False) for r in radii]
            self.assertTrue(all(a <= b for a, b in zip(closed, closed[1:])))
            self.assertTrue(all(o <= c for o, c in zip(opened, closed)))

    def test_errors(self):
        with self.assertRaises(ParameterRangeError):
            spaces.ball_mass(self.space, 0, 0.0)
        with self.assertRaises(SpaceError):
            spaces.ball_mass(self.space, 4, 0.5)


class GrowthTestCase(LipOpsTestBase):
    def test_two_point(self):
        report = spaces.estimate_growth_constant(two_point_space(), 1.0, 1.0)
        self.assertEqual(report.a_estimate, 1.0)

    def test_uniform_interval(self):
        report = spaces.estimate_growth_constant(spaces.uniform_interval(4), 1.0, 0.25)
        self.assertEqual(report.a_estimate, 3.0)
        self.assertEqual(report.worst_witness, (1, 0.25, 0.75, 3.0))
        self.assertEqual(report.a_estimate, max(v for _, v in report.per_radius_profile))
        center, radius, _, _ = report.worst_witness
        self.assertEqual(spaces.ball_mass(spaces.uniform_interval(4), center, radius) / radius, report.a_estimate)

    def test_r_min_beyond_diameter(self):
        with self.assertRaises(ParameterRangeError):
            spaces.estimate_growth_constant(spaces.uniform_interval(4), 1.0, 2.0)

    def test_weight_scaling(self):
        space = spaces.cantor4(2)
        base = spaces.estimate_growth_constant(space).a_estimate
        heavier = spaces.estimate_growth_constant(space.scaled(1.0, 2.0)).a_estimate
        self.assertEqual(heavier, 2.0 * base)

    def test_cantor_linear_growth(self):
        estimates = [spaces.estimate_growth_constant(spaces.cantor4(g)).a_estimate for g in (2, 3, 4)]
        self.assertLess(max(estimates) / min(estimates), 2.0)

    def test_cantor_generation5_from_file(self):
        # 1024 points: loading samples the triangle inequality instead of scanning every triple
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "cantor5.space")
            spaces.save_space(spaces.cantor4(5), path)
            space = spaces.read_space(path)
        self.assertEqual(space.num_points(), 1024)
        report = spaces.estimate_growth_constant(space, 1.0, float(np.min(space.nearest_distances)))
        self.assertGreater(report.a_estimate, 1.0)
        self.assertLess(report.a_estimate, 1.1)
        self.assertLess(report.a_estimate / spaces.estimate_growth_constant(spaces.cantor4(2)).a_estimate, 2.0)

    def test_islands_bounded_growth(self):
        levels = (2, 4, 6, 8)
        growth = [spaces.estimate_growth_constant(spaces.islands(k)).a_estimate for k in levels]
        doubling = [spaces.estimate_doubling_constant(spaces.islands(k)).constant for k in levels]
        for a in growth:
            self.assertLess(a, 16.0)
        for smaller, larger in zip(doubling, doubling[1:]):
            self.assertGreater(larger, smaller)
        self.assertGreater(doubling[-1], 4.0 * doubling[0])

    def test_doubling_uniform(self):
        report = spaces.estimate_doubling_constant(spaces.uniform_interval(16))
        self.assertGreater(report.constant, 1.0)
        self.assertLessEqual(report.constant, 3.0)


class MetricAxiomTestCase(LipOpsTestBase):
    def test_builtin_spaces(self):
        for kind, size in (("uniform_circle", 16), ("uniform_interval", 32), ("cantor4", 3), ("islands", 4)):
            report = spaces.check_metric_axioms(spaces.builtin_space(kind, size))
            self.assertTrue(report.ok(), kind)
            self.assertTrue(report.exhaustive)

    def test_triangle_violation(self):
        space = table_space([[0, 1, 3], [1, 0, 1], [3, 1, 0]])
        report = spaces.check_metric_axioms(space)
        self.assertFalse(report.ok())
        self.assertEqual(report.triangle_violations[0][:3], (0, 1, 2))
        self.assertEqual(report.triangle_violations[0][3:], (3.0, 2.0))
        error = report.first_violation()
        self.assertEqual(error.axiom, "triangle")
        self.assertEqual(error.ids, (0, 1, 2))

    def test_single_point(self):
        space = spaces.uniform_interval(1)
        report = spaces.check_metric_axioms(space)
        self.assertTrue(report.ok())
        self.assertIsNone(report.first_violation())

    def test_sampled(self):
        space = spaces.uniform_interval(20)
        report = spaces.check_metric_axioms(space, triple_budget=1000, seed=3)
        self.assertFalse(report.exhaustive)
        self.assertEqual(report.triples_checked, 1000)
        self.assertTrue(report.ok())

    def test_sampled_chunks_are_reproducible(self):
        table = np.abs(np.subtract.outer(np.arange(12.0), np.arange(12.0)))
        table[0, 11] = table[11, 0] = 30.0
        space = table_space(table)
        with mock.patch.object(spaces, "TRIPLE_SAMPLE_CHUNK", 100):
            parallel.set_num_workers(1)
            single = spaces.check_metric_axioms(space, triple_budget=1000, seed=5).to_dict()
            parallel.set_num_workers(8)
            many = spaces.check_metric_axioms(space, triple_budget=1000, seed=5).to_dict()
            parallel.set_num_workers(1)
        self.assertEqual(single, many)
        self.assertFalse(single["ok"])
        self.assertEqual(single["triples_checked"], 1000)
        self.assertFalse(single["exhaustive"])

    def test_sampled_default_budget_beyond_512_points(self):
        space = spaces.load_space(spaces.space_to_document(spaces.uniform_interval(520)))
        report = spaces.check_metric_axioms(space)
        self.assertFalse(report.exhaustive)
        self.assertEqual(report.triples_checked, spaces.DEFAULT_TRIPLE_BUDGET)
        self.assertTrue(report.ok())

    def test_report_document(self):
        report = spaces.check_metric_axioms(table_space([[0, 1, 3], [1, 0, 1], [3, 1, 0]])).to_dict()
        self.assertFalse(report["ok"])
        self.assertEqual(report["num_triangle_violations"], 2)


if __name__ == "__main__":
    unittest.main()
