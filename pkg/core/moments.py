"""
Exact moments of standardized sums via the partition expansion.

For iid W_j with E(W) = 0 and Var(W) = 1, S_n = W_1 + ... + W_n and
Z_n = S_n / sqrt(n). Every multi-index in the multinomial expansion of S_n^r
with a part equal to 1 has zero expectation, so E(S_n^r) is a sum over the
partitions of r into parts >= 2. The sums are carried out on raw central
moments (E(sum of centered errors)^r), which stay rational; the single
scaling by sigma^-r or (n sigma^2)^(-r/2) is applied at the end.
"""

import logging
import math
from fractions import Fraction
from typing import Dict, Iterator, List, Sequence, Tuple, Union

import numpy as np

from core.combinat import (
    composition_count,
    compositions,
    double_factorial_odd,
    expansion_coefficient,
    falling_factorial_polynomial,
    leading_coefficient,
    mobius_weight,
    multinomial,
    partitions_min2,
    set_partitions,
)
from core.errors import DomainError, GuardExceededError
from core.exact import RationalSurd
from core.profiles import MomentProfile

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 10**7
PAIRING_LIMIT = 12
PSD_TOLERANCE = 1e-10


def _raw_product(profile: MomentProfile, parts: Sequence[int]):
    value = Fraction(1) if profile.is_exact else 1.0
    for part in parts:
        value *= profile.raw(part)
    return value


def _check_order(r: int, n: int):
    if r < 0:
        raise DomainError(f"moment order must be >= 0, got {r}")
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")


def _centered_sum_moment(r: int, n: int, profile: MomentProfile) -> Fraction:
    """E(eps_1 + ... + eps_n)^r from the partition expansion."""
    if r == 0:
        return Fraction(1)
    if r == 1:
        return Fraction(0)
    return sum(
        expansion_coefficient(p, n) * _raw_product(profile, p.parts)
        for p in partitions_min2(r)
    )


def moment_S_polynomial(r: int, profile: MomentProfile) -> List[Fraction]:
    """
    sigma^r * E(S_n^r) as a polynomial in n, lowest power first.

    Each partition contributes leading_coefficient * E_j * (n)_m, and (n)_m is
    expanded with Stirling numbers of the first kind.
    """
    profile.require(r)
    profile.require_exact()
    coefficients = [Fraction(0)] * (r // 2 + 1)
    if r == 0:
        return [Fraction(1)]
    if r == 1:
        return [Fraction(0)]
    for p in partitions_min2(r):
        weight = leading_coefficient(p) * _raw_product(profile, p.parts)
        for power, c in enumerate(falling_factorial_polynomial(p.m)):
            coefficients[power] += weight * c
    return coefficients


def moment_S(r: int, n: int, profile: MomentProfile) -> RationalSurd:
    """
    Exact E(S_n^r) for the sum of n standardized iid variables.

    Args:
        r: Moment order
        n: Number of summands
        profile: Moment profile carrying orders up to r

    Returns:
        Exact value; irrational only for odd r when sigma is irrational
    """
    _check_order(r, n)
    profile.require(r)
    profile.require_exact()
    raw = _centered_sum_moment(r, n, profile)
    return raw * RationalSurd.from_power(profile.sigma2, -r)


def moment_Z(r: int, n: int, profile: MomentProfile) -> RationalSurd:
    """
    Exact E(Z_n^r) = n^(-r/2) E(S_n^r).

    Odd orders carry the factor n^(-1/2) inside the radicand of the returned
    RationalSurd, so E(Z_4^3) = gamma/2 stays exact.
    """
    _check_order(r, n)
    profile.require(r)
    profile.require_exact()
    raw = _centered_sum_moment(r, n, profile)
    return raw * RationalSurd.from_power(n * profile.sigma2, -r)


def brute_force_moment_S(
    r: int, n: int, profile: MomentProfile, limit: int = BRUTE_FORCE_LIMIT
) -> RationalSurd:
    """Oracle for moment_S: sums over every multi-index (j_1..j_n) with sum r."""
    _check_order(r, n)
    profile.require(r)
    profile.require_exact()
    size = composition_count(r, n)
    if size > limit:
        raise GuardExceededError(f"brute force E(S_{n}^{r})", size, limit)

    total = Fraction(0)
    for index in compositions(r, n):
        if 1 in index:
            continue
        total += multinomial(r, index) * _raw_product(profile, index)
    return total * RationalSurd.from_power(profile.sigma2, -r)


def _is_rational(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def power_sums(weights: Sequence, max_power: int) -> List:
    """
    Power sums p_q = sum_i b_i^q for q = 0..max_power.

    Rational weights give exact sums; anything else is summed in floating
    point with math.fsum.
    """
    if all(_is_rational(b) for b in weights):
        exact = [Fraction(b) for b in weights]
        return [sum(b**q for b in exact) for q in range(max_power + 1)]
    values = np.asarray(weights, dtype=float)
    sums = [float(len(values))]
    power = np.ones_like(values)
    for _ in range(max_power):
        power = power * values
        sums.append(math.fsum(power))
    return sums


def augmented_monomial(parts: Sequence[int], sums: Sequence):
    """
    Sum over distinct index tuples (i_1..i_m) of prod b_(i_l)^(parts[l]).

    Computed from power sums by Mobius inversion over the set partitions of
    the m slots.
    """
    total = 0
    for blocks in set_partitions(range(len(parts))):
        term = mobius_weight(blocks)
        for block in blocks:
            term *= sums[sum(parts[i] for i in block)]
        total += term
    return total


def weighted_moment(r: int, weights: Sequence, profile: MomentProfile):
    """
    E(b_1 eps_1 + ... + b_n eps_n)^r for iid errors with the given profile.

    Args:
        r: Moment order
        weights: b_1..b_n; Fractions/ints keep the result exact
        profile: Central moments of the errors, up to order r

    Returns:
        Fraction when both weights and profile are exact, float otherwise
    """
    if len(weights) < 1:
        raise DomainError("weights must not be empty")
    if r < 0:
        raise DomainError(f"moment order must be >= 0, got {r}")
    if r == 0:
        return Fraction(1)
    if r == 1:
        return Fraction(0)
    profile.require(r)

    exact = profile.is_exact and all(_is_rational(b) for b in weights)
    sums = power_sums(weights, r)
    terms = []
    for p in partitions_min2(r):
        mu = _raw_product(profile, p.parts)
        if not exact:
            mu = float(mu)
        terms.append(leading_coefficient(p) * mu * augmented_monomial(p.parts, sums))
    if exact:
        return sum(terms, Fraction(0))
    return math.fsum(float(t) for t in terms)


def gaussian_moment(r: int) -> int:
    """E(Z^r) for a standard normal Z: (r-1)!! for even r, 0 for odd r."""
    if r < 0:
        raise DomainError(f"moment order must be >= 0, got {r}")
    if r % 2:
        return 0
    return double_factorial_odd(r // 2)


class CovarianceMatrix:
    """Symmetric positive semidefinite k x k matrix, built from its upper triangle."""

    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=float, ndmin=2)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DomainError(f"covariance must be square, got shape {matrix.shape}")
        scale = max(np.abs(matrix).max(), 1.0)
        if np.abs(matrix - matrix.T).max() > 1e-12 * scale:
            raise DomainError("covariance matrix is not symmetric")

        upper = np.triu(matrix)
        self._matrix = upper + np.triu(matrix, 1).T
        eigenvalues = np.linalg.eigvalsh(self._matrix)
        tolerance = PSD_TOLERANCE * max(np.trace(self._matrix), 0.0)
        if eigenvalues.min() < -tolerance:
            raise DomainError(
                f"covariance matrix is not positive semidefinite "
                f"(eigenvalue {eigenvalues.min():.3g})"
            )

    @property
    def k(self) -> int:
        return self._matrix.shape[0]

    def as_array(self) -> np.ndarray:
        return self._matrix.copy()

    def __getitem__(self, index: Tuple[int, int]) -> float:
        return float(self._matrix[index])


def _pairings(items: List) -> Iterator[List[Tuple]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for tail in _pairings(rest[:i] + rest[i + 1 :]):
            yield [(first, partner)] + tail


def gaussian_mixed_moment(
    cov: CovarianceMatrix, powers: Sequence[int], limit: int = PAIRING_LIMIT
) -> float:
    """
    E prod_j xi_j^(r_j) for xi ~ N_k(0, cov), by Isserlis' theorem.

    Sums, over the perfect matchings of the multiset with r_j copies of j, the
    product of the matched covariance entries.
    """
    if len(powers) != cov.k:
        raise DomainError(
            f"{len(powers)} powers given for a {cov.k}x{cov.k} covariance"
        )
    if any(r < 0 for r in powers):
        raise DomainError(f"powers must be >= 0: {tuple(powers)}")
    total = sum(powers)
    if total % 2:
        return 0.0
    if total > limit:
        raise GuardExceededError(
            "Isserlis pairing sum",
            double_factorial_odd(total // 2),
            double_factorial_odd(limit // 2),
        )
    labels = [j for j, r in enumerate(powers) for _ in range(r)]
    terms = [
        math.prod(cov[i, j] for i, j in pairing) for pairing in _pairings(labels)
    ]
    return math.fsum(terms)


def _standardized_product(profile: MomentProfile, parts: Sequence[int], r: int):
    raw = _raw_product(profile, parts)
    if profile.is_exact:
        return raw * RationalSurd.from_power(profile.sigma2, -r)
    return float(raw) / float(profile.sigma2) ** (r / 2)


def limit_even(k: int, profile: MomentProfile) -> Union[Fraction, float]:
    """
    lim n (E(Z_n^2k) - (2k-1)!!), read off the expansion.

    It is the n^(k-1) coefficient of E(S_n^2k). Only partitions of length
    k and k-1 reach that power: (2,...,2) through the n^(k-1) term of (n)_k,
    and (2,...,2,4), (2,...,2,3,3) through their leading term.
    """
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if k >= 2:
        profile.require(4)
    total = Fraction(0) if profile.is_exact else 0.0
    for p in partitions_min2(2 * k):
        if p.m < k - 1:
            continue
        stirling = falling_factorial_polynomial(p.m)[k - 1]
        if stirling == 0:
            continue
        value = _standardized_product(profile, p.parts, 2 * k)
        total += leading_coefficient(p) * stirling * value
    if isinstance(total, RationalSurd):
        # even total order: sigma^-2k is rational
        return total.to_fraction()
    return total


def limit_even_printed(k: int, profile: MomentProfile) -> Union[Fraction, float]:
    """Printed even-order constant k(k-1)(2k-1)!!(kurt/3 + (k-2)skew^2/9 - 1/2)."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if k == 1:
        return Fraction(0)
    half = Fraction(1, 2) if profile.is_exact else 0.5
    bracket = (
        profile.kurtosis / 3 + (k - 2) * profile.skewness_squared / 9 - half
    )
    return k * (k - 1) * double_factorial_odd(k) * bracket


def limit_odd(k: int, profile: MomentProfile):
    """
    lim sqrt(n) E(Z_n^(2k+1)) = k(2k+1)(2k-1)!! gamma / 3.

    Read off the n^k coefficient of E(S_n^(2k+1)), which only the partition
    (2,...,2,3) reaches.
    """
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    profile.require(3)
    total = 0
    for p in partitions_min2(2 * k + 1):
        if p.m == k:
            total += leading_coefficient(p) * _standardized_product(
                profile, p.parts, 2 * k + 1
            )
    return total


def moment_table(r_max: int, n: int, profile: MomentProfile) -> Dict[int, RationalSurd]:
    """E(Z_n^r) for r = 0..r_max."""
    return {r: moment_Z(r, n, profile) for r in range(r_max + 1)}
