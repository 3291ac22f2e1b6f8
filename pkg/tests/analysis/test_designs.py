"""
Tests for analysis.designs module.
"""

import json
import math
import unittest
from fractions import Fraction

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from analysis.designs import (
    Design,
    alpha_values,
    canonical_design,
    convergent_design,
    diagnostics,
    explicit_design,
    iid_random_design,
    prop1_betas,
    prop1_design,
    prop2_cumulative_sums,
    prop2_design,
    prop2_spikes,
    prop2_sums,
)
from analysis.laws import ErrorLaw
from analysis.ols import XiSpec
from core.errors import DomainError

DOUBLING = [2**k for k in range(6, 15)]


class TestDesignRecord(unittest.TestCase):
    """Test cases for the declarative design record."""

    def test_validation(self):
        """Test unknown families, bad p and n <= p."""
        with self.assertRaises(DomainError):
            Design("fractal", {}, 10, 1)
        with self.assertRaises(DomainError):
            Design("canonical", {}, 10, 9)
        with self.assertRaises(DomainError):
            Design("canonical", {}, 1, 1)

    def test_matrix_is_cached_and_read_only(self):
        """Test that matrix() returns the same frozen array."""
        design = canonical_design(5)
        X = design.matrix()
        self.assertIs(design.matrix(), X)
        with self.assertRaises(ValueError):
            X[0, 0] = 2.0

    def test_json_round_trip(self):
        """Test that every family survives serialization."""
        designs = [
            canonical_design(10),
            convergent_design(10, 2.0, a=1.0, q=0.5),
            prop1_design(10, "power:0.25"),
            prop2_design(30, Fraction(1, 4)),
            iid_random_design(20, 3, "uniform", seed=9, intercept=True),
            explicit_design([[1, 0], [1, 1], [1, 2]]),
        ]
        for design in designs:
            restored = Design.from_dict(json.loads(json.dumps(design.to_dict())))
            self.assertEqual(restored, design)
            np.testing.assert_array_equal(restored.matrix(), design.matrix())

    def test_with_n(self):
        """Test re-sizing a design, which explicit designs refuse."""
        design = convergent_design(10, 2.0).with_n(40)
        self.assertEqual(design.matrix().shape, (40, 1))
        with self.assertRaises(DomainError):
            explicit_design([[1.0], [2.0]]).with_n(5)


class TestGenerators(unittest.TestCase):
    """Test cases for the design generators."""

    def test_canonical(self):
        """Test the column of ones."""
        np.testing.assert_array_equal(canonical_design(3).matrix(), np.ones((3, 1)))
        with self.assertRaises(DomainError):
            canonical_design(1)

    def test_convergent(self):
        """Test x_i = c + a / i^q."""
        np.testing.assert_array_equal(
            convergent_design(4, 2.0).matrix(), np.full((4, 1), 2.0)
        )
        X = convergent_design(3, 2.0, a=1.0, q=1.0).matrix()
        np.testing.assert_allclose(X[:, 0], [3.0, 2.5, 7.0 / 3.0])
        with self.assertRaises(DomainError):
            convergent_design(10, 0.0)
        with self.assertRaises(DomainError):
            convergent_design(10, 1.0, a=1.0, q=0.0)

    def test_convergent_explicit_values(self):
        """Test a user-supplied covariate sequence."""
        design = convergent_design(3, 1.0, values=[0.5, 0.9, 0.99, 0.999])
        np.testing.assert_array_equal(design.matrix()[:, 0], [0.5, 0.9, 0.99])
        with self.assertRaises(DomainError):
            convergent_design(5, 1.0, values=[1.0, 1.0])

    def test_convergent_explicit_values_resize(self):
        """Test that resizing never runs past the explicit values."""
        design = convergent_design(3, 1.0, values=[1.0, 1.5, 1.2, 1.1])
        self.assertEqual(design.with_n(4).matrix().shape, (4, 1))
        self.assertEqual(design.with_n(2).matrix().shape, (2, 1))
        with self.assertRaises(DomainError):
            design.with_n(6)
        data = design.to_dict()
        data["n"] = 5
        with self.assertRaises(DomainError):
            Design.from_dict(data)
        spec = XiSpec(design, (1.0,), ErrorLaw("normal"))
        with self.assertRaises(DomainError):
            spec.with_n(6)

    def test_convergent_gram_limit(self):
        """Test X^T X / n -> c^2."""
        design = convergent_design(100_000, 2.0, a=1.0, q=1.0)
        self.assertAlmostEqual(diagnostics(design).gram_over_n[0, 0], 4.0, delta=1e-3)
        self.assertEqual(design.limit_gram()[0, 0], 4.0)

    def test_prop1_gram(self):
        """Test X^T X = n (1 + alpha_n^(-1/2)); 24 at n = 16."""
        X = prop1_design(16, "sqrt").matrix()
        self.assertAlmostEqual(float(X[:, 0] @ X[:, 0]), 24.0, places=10)

    def test_prop1_telescoping(self):
        """Test the telescoping identity for several rules."""
        for rule in ("sqrt", "log", "power:0.3"):
            for n in (10, 1000, 50_000):
                X = prop1_design(n, rule).matrix()
                expected = n * (1 + alpha_values(rule, n)[-1] ** -0.5)
                self.assertAlmostEqual(
                    math.fsum(X[:, 0] ** 2) / expected, 1.0, delta=1e-10
                )

    def test_prop1_betas_nonnegative(self):
        """Test beta_i >= 0 and the slowly vanishing excess of X^T X / n."""
        self.assertTrue(np.all(prop1_betas("sqrt", 100_000) >= 0))
        gram = diagnostics(prop1_design(10**6, "sqrt")).gram_over_n[0, 0]
        self.assertAlmostEqual(gram - 1.0, 10**-1.5, delta=1e-9)

    def test_alpha_rules(self):
        """Test monotonicity requirements on alpha."""
        np.testing.assert_allclose(alpha_values("sqrt", 4), [1, 2**0.5, 3**0.5, 2])
        np.testing.assert_allclose(alpha_values([1, 2, 3], 3), [1, 2, 3])
        with self.assertRaises(DomainError):
            alpha_values([1, 4, 2], 3)
        with self.assertRaises(DomainError):
            alpha_values([1, 4, 9, 16], 4)
        with self.assertRaises(DomainError):
            alpha_values([0, 1], 2)
        with self.assertRaises(DomainError):
            alpha_values("power:1.5", 4)
        with self.assertRaises(DomainError):
            alpha_values("cubic", 4)
        with self.assertRaises(DomainError):
            alpha_values([1, 2], 3)

    def test_prop2_small(self):
        """Test spikes 1, 2, 3 at rows 1, 8, 27 for a = 1/4."""
        X = prop2_design(27, 0.25).matrix()
        nonzero = np.flatnonzero(X[:, 0])
        np.testing.assert_array_equal(nonzero, [0, 7, 26])
        np.testing.assert_array_equal(X[nonzero, 0], [1.0, 2.0, 3.0])
        self.assertEqual(prop2_sums(27, 0.25), (14.0, 36.0))
        gram = diagnostics(prop2_design(27, 0.25)).gram_over_n[0, 0]
        self.assertAlmostEqual(gram, 14 / 27)

    def test_prop2_parameter_range(self):
        """Test that a must lie in (0, 1/2)."""
        for a in (0, 0.5, 0.6, -0.1):
            with self.assertRaises(DomainError):
                prop2_design(10, a)

    def test_prop2_sums_asymptotics(self):
        """Test X^T X ~ n/3 and sum x^3 ~ n^(4/3)/4 when b = 2."""
        n = 10**7
        gram, cubes = prop2_sums(n, Fraction(1, 4))
        self.assertAlmostEqual(gram / (n / 3), 1.0, delta=0.01)
        self.assertAlmostEqual(cubes / (n ** (4 / 3) / 4), 1.0, delta=0.02)
        self.assertEqual(Design("prop2", {"a": "1/4"}, n, 1).limit_gram()[0, 0], 1 / 3)

    def test_prop2_integral_sandwich(self):
        """Test K^3/3 <= X^T X <= (K+1)^3/3 with K = floor(n^(1/3))."""
        for n in [10, 64, 1000, 4097, 2**20, 10**6 + 1]:
            K = len(prop2_spikes(n, 0.25))
            self.assertLessEqual(K**3, n)
            self.assertGreater((K + 1) ** 3, n)
            rows, gram, _ = prop2_cumulative_sums(n, 0.25)
            self.assertLessEqual(Fraction(K**3, 3), gram[-1])
            self.assertLessEqual(gram[-1], Fraction((K + 1) ** 3, 3))
            self.assertEqual(rows[-1], K**3)

    def test_prop2_non_integer_b(self):
        """Test a = 1/3 (b = 1): spikes sqrt(k) at rows k^2."""
        spikes = prop2_spikes(50, Fraction(1, 3))
        self.assertEqual([row for row, _ in spikes], [1, 4, 9, 16, 25, 36, 49])
        gram, _ = prop2_sums(50, Fraction(1, 3))
        self.assertAlmostEqual(gram, 28.0)

    def test_iid_random_reproducible(self):
        """Test that the seed fixes the matrix."""
        first = iid_random_design(50, 3, "normal", seed=7).matrix()
        second = iid_random_design(50, 3, "normal", seed=7).matrix()
        other = iid_random_design(50, 3, "normal", seed=8).matrix()
        np.testing.assert_array_equal(first, second)
        self.assertFalse(np.array_equal(first, other))

    def test_iid_random_intercept_and_laws(self):
        """Test the intercept column and the column laws."""
        X = iid_random_design(100, 3, "rademacher", seed=1, intercept=True).matrix()
        np.testing.assert_array_equal(X[:, 0], np.ones(100))
        self.assertEqual(set(np.unique(X[:, 1:])), {-1.0, 1.0})
        with self.assertRaises(DomainError):
            iid_random_design(100, 2, "cauchy")

    def test_iid_uniform_gram(self):
        """Test X^T X / n -> 1/3 for uniform columns."""
        design = iid_random_design(100_000, 1, "uniform", seed=3)
        gram = diagnostics(design).gram_over_n[0, 0]
        self.assertAlmostEqual(gram, 1 / 3, delta=0.05 / 3)

    def test_explicit(self):
        """Test explicit rows and vectors."""
        self.assertEqual(explicit_design([[1, 0], [1, 1], [1, 2]]).p, 2)
        self.assertEqual(explicit_design([1.0, 2.0, 3.0]).matrix().shape, (3, 1))


class TestDiagnostics(unittest.TestCase):
    """Test cases for leverage diagnostics."""

    def test_canonical(self):
        """Test leverages 1/n and trace 1."""
        result = diagnostics(canonical_design(10))
        self.assertAlmostEqual(result.noether_max, 0.1)
        self.assertAlmostEqual(result.hat_trace, 1.0)
        self.assertEqual(result.to_dict()["gram_over_n"], [[1.0]])

    def test_block_size_does_not_matter(self):
        """Test that row blocking leaves the result unchanged."""
        design = iid_random_design(1000, 4, seed=2)
        whole = diagnostics(design)
        blocked = diagnostics(design, block_rows=37)
        self.assertAlmostEqual(whole.noether_max, blocked.noether_max, places=14)
        self.assertAlmostEqual(whole.hat_trace, blocked.hat_trace, places=10)
        self.assertAlmostEqual(whole.hat_trace, 4.0, places=10)

    def test_noether_decreasing(self):
        """Test max leverage decreasing on doubling n."""
        for make in (
            canonical_design,
            lambda n: convergent_design(n, 2.0, a=1.0, q=1.0),
            lambda n: prop1_design(n, "sqrt"),
        ):
            values = [diagnostics(make(n)).noether_max for n in DOUBLING]
            self.assertTrue(all(b < a for a, b in zip(values, values[1:])), values)

        values = [
            diagnostics(iid_random_design(n, 2, seed=5)).noether_max for n in DOUBLING
        ]
        self.assertLess(values[-1], values[0] / 10)

    @given(
        st.integers(min_value=0, max_value=10_000),
        st.integers(min_value=1, max_value=4),
    )
    def test_hat_trace_is_p(self, seed, p):
        """Test trace(H) = p for random designs."""
        design = iid_random_design(40, p, "normal", seed=seed)
        self.assertAlmostEqual(diagnostics(design).hat_trace / p, 1.0, delta=1e-10)


if __name__ == "__main__":
    unittest.main()
