"""
Tests for core.exact module.
"""

import math
import unittest
from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from core.errors import DomainError
from core.exact import RationalSurd, to_fraction


class TestToFraction(unittest.TestCase):
    """Test cases for exact conversion of inputs."""

    def test_float_uses_shortest_repr(self):
        """Test that 0.3 converts to 3/10, not the nearest binary fraction."""
        self.assertEqual(to_fraction(0.3), Fraction(3, 10))

    def test_strings(self):
        """Test rational and decimal strings."""
        self.assertEqual(to_fraction("1/4"), Fraction(1, 4))
        self.assertEqual(to_fraction(" 0.25 "), Fraction(1, 4))

    def test_rejects_garbage(self):
        """Test non-numeric strings and non-finite floats."""
        with self.assertRaises(DomainError):
            to_fraction("abc")
        with self.assertRaises(DomainError):
            to_fraction(float("nan"))
        with self.assertRaises(DomainError):
            to_fraction(float("inf"))

    def test_rational_surd(self):
        """Test converting a rational surd, and refusing an irrational one."""
        self.assertEqual(to_fraction(RationalSurd(Fraction(1, 2), 4)), Fraction(1))
        with self.assertRaises(DomainError):
            to_fraction(RationalSurd(1, 2))


class TestRationalSurd(unittest.TestCase):
    """Test cases for the coefficient * sqrt(radicand) carrier."""

    def test_radicand_is_square_free(self):
        """Test that square factors move into the coefficient."""
        value = RationalSurd(1, 8)
        self.assertEqual(value.coefficient, 2)
        self.assertEqual(value.radicand, 2)
        self.assertEqual(str(value), "2*sqrt(2)")

    def test_large_prime_squares(self):
        """Test squares of primes above 1000 and their exact sums."""
        value = RationalSurd(1, 2 * 1009**2)
        self.assertEqual((value.coefficient, value.radicand), (1009, 2))
        self.assertEqual(value + RationalSurd(1, 2), RationalSurd(1010, 2))
        value = RationalSurd(1, 3 * (1009 * 1013) ** 2)
        self.assertEqual((value.coefficient, value.radicand), (1009 * 1013, 3))
        value = RationalSurd(1, Fraction(5, 10007**2))
        self.assertEqual((value.coefficient, value.radicand), (Fraction(1, 10007), 5))

    @given(st.integers(min_value=1, max_value=10**6))
    def test_radicand_square_free_everywhere(self, m):
        """Test coefficient^2 * radicand = m with a square-free radicand."""
        value = RationalSurd(1, m)
        self.assertEqual(value.coefficient**2 * value.radicand, m)
        for f in range(2, math.isqrt(value.radicand) + 1):
            self.assertNotEqual(value.radicand % (f * f), 0)

    def test_fractional_radicand(self):
        """Test sqrt(1/2) = sqrt(2)/2."""
        value = RationalSurd(1, Fraction(1, 2))
        self.assertEqual(value.radicand, 2)
        self.assertEqual(value.coefficient, Fraction(1, 2))
        self.assertEqual(str(value), "1/2*sqrt(2)")

    def test_perfect_square_is_rational(self):
        """Test that sqrt(9/4) collapses to 3/2."""
        value = RationalSurd(1, Fraction(9, 4))
        self.assertTrue(value.is_rational)
        self.assertEqual(value, Fraction(3, 2))
        self.assertEqual(str(value), "3/2")

    def test_from_power(self):
        """Test half-integer powers of rationals."""
        self.assertEqual(RationalSurd.from_power(4, 3), 8)
        self.assertEqual(RationalSurd.from_power(10, -4), Fraction(1, 100))
        # (21/100)^(-3/2) = 1000 sqrt(21) / 441
        value = RationalSurd.from_power(Fraction(21, 100), -3)
        self.assertEqual(value.radicand, 21)
        self.assertEqual(value.coefficient, Fraction(1000, 441))

    def test_from_power_rejects_nonpositive_base(self):
        """Test that half powers need a positive base."""
        with self.assertRaises(DomainError):
            RationalSurd.from_power(0, 1)
        with self.assertRaises(DomainError):
            RationalSurd.from_power(-4, 1)

    def test_negative_radicand(self):
        """Test that a negative radicand is rejected."""
        with self.assertRaises(DomainError):
            RationalSurd(1, -2)

    def test_arithmetic(self):
        """Test products, quotients and like-radicand sums."""
        root2 = RationalSurd(1, 2)
        self.assertEqual(root2 * root2, 2)
        self.assertEqual(root2 + root2, RationalSurd(2, 2))
        self.assertEqual(root2 - root2, 0)
        self.assertEqual(root2 / root2, 1)
        self.assertEqual(1 / root2, RationalSurd(Fraction(1, 2), 2))
        self.assertEqual(3 * root2, RationalSurd(1, 18))

    def test_unlike_radicands_cannot_be_added(self):
        """Test that sqrt(2) + sqrt(3) has no exact carrier."""
        with self.assertRaises(DomainError):
            RationalSurd(1, 2) + RationalSurd(1, 3)

    def test_zero_absorbs_any_radicand(self):
        """Test that adding zero never raises."""
        self.assertEqual(RationalSurd(0, 5) + RationalSurd(1, 3), RationalSurd(1, 3))
        self.assertFalse(RationalSurd(0, 7))

    def test_equality(self):
        """Test sign-aware equality against numbers and floats."""
        self.assertNotEqual(RationalSurd(-1, 2), RationalSurd(1, 2))
        self.assertEqual(RationalSurd(3), 3)
        self.assertEqual(RationalSurd(3), 3.0)
        self.assertEqual(RationalSurd(2, 3), RationalSurd(1, 12))

    def test_unhashable(self):
        """Test that surds are unhashable."""
        with self.assertRaises(TypeError):
            hash(RationalSurd(1))

    def test_float_and_str(self):
        """Test float conversion and formatting."""
        value = RationalSurd(Fraction(2, 21), 21)
        self.assertEqual(str(value), "2/21*sqrt(21)")
        self.assertAlmostEqual(float(value), 2 / 21 * 21**0.5, places=15)
        self.assertEqual(str(RationalSurd(1, 21)), "sqrt(21)")
        self.assertEqual(str(RationalSurd(Fraction(18, 5))), "18/5")

    @given(
        st.fractions(min_value=Fraction(1, 1000), max_value=1000, max_denominator=1000),
        st.integers(min_value=-6, max_value=6),
        st.integers(min_value=-6, max_value=6),
    )
    def test_powers_multiply(self, base, h1, h2):
        """Test base^(h1/2) * base^(h2/2) = base^((h1+h2)/2)."""
        product = RationalSurd.from_power(base, h1) * RationalSurd.from_power(base, h2)
        self.assertEqual(product, RationalSurd.from_power(base, h1 + h2))


if __name__ == "__main__":
    unittest.main()
