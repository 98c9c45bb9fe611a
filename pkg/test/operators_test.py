####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     operators_test.py (test)
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+, numpy
#
####################################################################################################

import unittest

import numpy as np

from lipops_test_base import LipOpsTestBase, two_point_space
from lipops import harness
from lipops import kernels
from lipops import operators
from lipops import parallel
from lipops.errors import KernelError, OperatorError
from lipops.lipschitz import SampledFunction, constant_function, test_family
from lipops.space import builtin_space, cantor4, islands, uniform_circle, uniform_interval


def random_function(space, seed):
    rng = np.random.default_rng(seed)
    count = space.num_points()
    return SampledFunction(space, rng.normal(size=count) + 1j * rng.normal(size=count))


class StabilizationTestCase(LipOpsTestBase):
    def test_truncated_equals_pv_below_min_distance(self):
        cases = [(uniform_interval(32), kernels.riesz_singular(1.0)),
                 (uniform_circle(16), kernels.odd_circle()),
                 (cantor4(2), kernels.riesz_singular(1.0)),
                 (islands(2), kernels.odd_line())]
        for space, kernel in cases:
            f = random_function(space, 7)
            pv = operators.apply_pv(kernel, f)
            for factor in (0.99, 0.5, 1e-3):
                truncated = operators.apply_truncated(kernel, factor * space.min_distance, f)
                self.assertAllEqual(truncated.output.values, pv.output.values)
                self.assertEqual(truncated.terms_per_point, pv.terms_per_point)

    def test_pv_diagnostics(self):
        space = uniform_interval(8)
        result = operators.apply_pv(kernels.riesz_singular(1.0), constant_function(space))
        self.assertEqual(result.terms_per_point, [7] * 8)
        self.assertAllEqual(result.epsilon_star, [0.125] * 8)

    def test_truncated_counts(self):
        space = uniform_interval(8)
        result = operators.apply_truncated(kernels.riesz_singular(1.0), 0.5, constant_function(space))
        # pairs with d > 1/4 contribute
        self.assertEqual(result.terms_per_point[0], 5)
        self.assertEqual(result.terms_per_point[3], 3)
        self.assertEqual(result.epsilon, 0.5)

    def test_truncated_beyond_diameter_is_zero(self):
        space = cantor4(2)
        result = operators.apply_truncated(kernels.riesz_singular(1.0), 2.0 * space.diameter + 1.0,
                                           random_function(space, 2))
        self.assertAllEqual(result.output.values, np.zeros(16))


class AnnihilationTestCase(LipOpsTestBase):
    def test_hypersingular_kills_constants(self):
        for kind, size in (("uniform_interval", 33), ("uniform_circle", 20), ("cantor4", 2), ("islands", 3)):
            space = builtin_space(kind, size)
            for alpha in (0.25, 0.5, 0.75):
                result = operators.apply_hypersingular(kernels.riesz_hypersingular(1.0, alpha),
                                                       constant_function(space, 3.0 - 2.0j))
                self.assertTrue(np.all(result.output.values == 0), "{} alpha={}".format(space.name, alpha))

    def test_two_point_hypersingular(self):
        space = two_point_space()
        f = SampledFunction(space, [0.0, 1.0])
        result = operators.apply_hypersingular(kernels.riesz_hypersingular(1.0, 0.25), f)
        self.assertAllEqual(result.output.values, [0.5, -0.5])

    def test_fractional_direct_sum(self):
        space = uniform_interval(16)
        f = random_function(space, 4)
        result = operators.apply_fractional(kernels.riesz_fractional(1.0, 0.3), f)
        expected = np.zeros(16, dtype=complex)
        for x in range(16):
            for y in range(16):
                if x != y:
                    expected[x] += f.values[y] * space.weights[y] / space.distances[x, y] ** 0.7
        self.assertAllClose(result.output.values, expected, rtol=1e-12, atol=1e-13)
        self.assertEqual(result.terms_per_point, [15] * 16)


class LinearityTestCase(LipOpsTestBase):
    def test_linear_combinations(self):
        cases = [(uniform_interval(24), operators.OperatorKind.Fractional, kernels.riesz_fractional(1.0, 0.25)),
                 (uniform_circle(16), operators.OperatorKind.Truncated, kernels.odd_circle()),
                 (cantor4(2), operators.OperatorKind.PrincipalValue, kernels.riesz_singular(1.0)),
                 (islands(2), operators.OperatorKind.Hypersingular, kernels.riesz_hypersingular(1.0, 0.5)),
                 (uniform_interval(24), operators.OperatorKind.TruncatedAdjoint, kernels.odd_line())]
        for seed in range(50):
            space, kind, kernel = cases[seed % len(cases)]
            epsilon = 3.0 * space.min_distance if kind in (operators.OperatorKind.Truncated,
                                                          operators.OperatorKind.TruncatedAdjoint) else None
            op = operators.make_operator(kind, kernel, epsilon)
            rng = np.random.default_rng(seed)
            a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
            f = random_function(space, 1000 + seed)
            g = random_function(space, 2000 + seed)
            combined = op(f * a + g * b).output.values
            expected = a * op(f).output.values + b * op(g).output.values
            scale = np.max(np.abs(expected))
            self.assertAllClose(combined, expected, rtol=0.0, atol=1e-12 * scale)


class NormalizedTestCase(LipOpsTestBase):
    def test_zero_at_base_point(self):
        space = uniform_circle(12)
        f = random_function(space, 3)
        for x0 in (0, 5, 11):
            fractional = operators.normalized_fractional(kernels.riesz_fractional(1.0, 0.5), x0, f)
            pv = operators.normalized_pv(kernels.odd_circle(), x0, f)
            self.assertEqual(fractional.output.values[x0], 0)
            self.assertEqual(pv.output.values[x0], 0)
            self.assertEqual(fractional.terms_per_point[x0], 11)
            self.assertEqual(fractional.terms_per_point[(x0 + 1) % 12], 10)
            self.assertEqual(len(fractional.notes), 1)

    def test_matches_difference_of_sums(self):
        space = uniform_interval(10)
        kernel = kernels.riesz_fractional(1.0, 0.5)
        f = random_function(space, 8)
        x0 = 4
        matrix = kernels.kernel_matrix(kernel, space)
        result = operators.normalized_fractional(kernel, x0, f)
        for x in range(10):
            expected = sum((matrix[x, y] - matrix[x0, y]) * f.values[y] * space.weights[y]
                           for y in range(10) if y not in (x, x0))
            self.assertAlmostEqual(result.output.values[x], expected, places=12)


class CancellationTestCase(LipOpsTestBase):
    def test_odd_circle_truncations_of_one(self):
        space = uniform_circle(64)
        one = constant_function(space)
        for epsilon in harness.epsilon_grid(space, 16):
            result = operators.apply_truncated(kernels.odd_circle(), epsilon, one)
            self.assertLessEqual(np.max(np.abs(result.output.values)), 1e-12)

    def test_odd_circle_annulus(self):
        for size in (8, 64):
            report = operators.check_annulus_cancellation(kernels.odd_circle(), uniform_circle(size))
            self.assertLessEqual(report.maximum, 1e-12)
            self.assertEqual(len(report.per_center), size)

    def test_annulus_brute_force(self):
        space = cantor4(2)
        kernel = kernels.riesz_singular(1.0)
        report = operators.check_annulus_cancellation(kernel, space)
        matrix = kernels.kernel_matrix(kernel, space)
        levels = np.concatenate([[0.0], space.distinct_distances()])
        best = 0.0
        for x in space.ids():
            for i, r1 in enumerate(levels):
                for r2 in levels[i + 1:]:
                    inside = (space.distances[x] > r1) & (space.distances[x] <= r2)
                    inside[x] = False
                    best = max(best, abs(np.sum(matrix[x, inside] * space.weights[inside])))
        self.assertAlmostEqual(report.maximum, best, places=10)
        center, r1, r2 = report.center, report.r1, report.r2
        inside = (space.distances[center] > r1) & (space.distances[center] <= r2)
        inside[center] = False
        self.assertAlmostEqual(abs(np.sum(matrix[center, inside] * space.weights[inside])), report.maximum,
                               places=10)

    def test_s4_limit(self):
        space = uniform_circle(16)
        report = operators.check_s4_limit(kernels.odd_circle(), space)
        self.assertEqual(report.r0, 1.0)
        self.assertAllEqual(report.values, np.zeros(16))
        report = operators.check_s4_limit(kernels.riesz_singular(1.0), uniform_interval(8), r0=0.3)
        # only the neighbours within 0.3 (two on each side of an interior point) contribute
        self.assertAlmostEqual(report.values[3].real, (8.0 + 4.0) * 2.0 / 8.0, places=12)


class ComposeTestCase(LipOpsTestBase):
    def test_identity(self):
        space = uniform_interval(6)
        f = random_function(space, 1)
        op = operators.make_operator("fractional", kernels.riesz_fractional(1.0, 0.5))
        composed = operators.compose(operators.identity, op, f)
        self.assertAllEqual(composed.output.values, op(f).output.values)

    def test_circle_compositions_of_one(self):
        space = uniform_circle(32)
        one = constant_function(space)
        fractional = operators.make_operator("fractional", kernels.riesz_fractional(1.0, 0.25))
        hypersingular = operators.make_operator("hypersingular", kernels.riesz_hypersingular(1.0, 0.25))
        self.assertTrue(np.all(operators.compose(hypersingular, fractional, one).output.values == 0))
        self.assertTrue(np.all(operators.compose(fractional, hypersingular, one).output.values == 0))

    def test_nested_direct_sum(self):
        space = uniform_interval(64)
        f = test_family(space, 0.5, "anchored_mix", 1, seed=5)[0]
        fractional = operators.make_operator("fractional", kernels.riesz_fractional(1.0, 0.25))
        hypersingular = operators.make_operator("hypersingular", kernels.riesz_hypersingular(1.0, 0.25))
        result = operators.compose(hypersingular, fractional, f).output.values

        d = space.distances.copy()
        np.fill_diagonal(d, 1.0)
        w = space.weights
        fractional_matrix = w[None, :] / d ** 0.75
        np.fill_diagonal(fractional_matrix, 0.0)
        inner = fractional_matrix @ f.values
        hypersingular_matrix = w[None, :] / d ** 1.25
        np.fill_diagonal(hypersingular_matrix, 0.0)
        expected = hypersingular_matrix @ inner - hypersingular_matrix.sum(axis=1) * inner
        self.assertAllClose(result, expected, rtol=1e-9, atol=1e-12)

    def test_inner_product(self):
        space = uniform_circle(10)
        f = random_function(space, 1)
        g = random_function(space, 2)
        expected = np.sum(f.values * np.conj(g.values) * space.weights)
        self.assertAlmostEqual(operators.weighted_inner_product(f, g), expected, places=13)
        with self.assertRaises(OperatorError):
            operators.weighted_inner_product(f, random_function(uniform_circle(10), 2))


class ErrorTestCase(LipOpsTestBase):
    def test_make_operator(self):
        kernel = kernels.riesz_singular(1.0)
        with self.assertRaises(OperatorError):
            operators.make_operator("truncated", kernel)
        with self.assertRaises(OperatorError):
            operators.make_operator("pv")
        with self.assertRaises(OperatorError):
            operators.make_operator("normalized_pv", kernel)
        self.assertIs(operators.make_operator("identity"), operators.identity)

    def test_wrong_class(self):
        f = constant_function(uniform_interval(4))
        with self.assertRaises(KernelError):
            operators.apply_pv(kernels.riesz_fractional(1.0, 0.5), f)
        with self.assertRaises(KernelError):
            operators.apply_hypersingular(kernels.riesz_singular(1.0), f)
        with self.assertRaises(KernelError):
            operators.apply_fractional(kernels.riesz_hypersingular(1.0, 0.5), f)


class DeterminismTestCase(LipOpsTestBase):
    def test_worker_count(self):
        space = uniform_circle(300)
        f = random_function(space, 6)
        kernel = kernels.odd_circle()
        expected = operators.apply_truncated(kernel, 0.1, f).output.values.tobytes()
        for workers in (2, 8):
            parallel.set_num_workers(workers)
            parallel.set_chunk_size(16)
            try:
                self.assertEqual(operators.apply_truncated(kernel, 0.1, f).output.values.tobytes(), expected)
            finally:
                parallel.set_num_workers(1)
                parallel.set_chunk_size(parallel.DEFAULT_CHUNK_SIZE)


if __name__ == "__main__":
    unittest.main()
