"""
Exact integer combinatorics behind the partition expansion of E(S_n^r).

Every value here is a Python int (or Fraction); nothing is rounded.
"""

import logging
import math
from dataclasses import dataclass
from itertools import groupby
from typing import Iterator, List, Sequence, Tuple

from core.errors import DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Partition:
    """A partition of ``r`` into parts that are all at least 2."""

    parts: Tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if not parts:
            raise DomainError("a partition needs at least one part")
        if any(p < 2 for p in parts):
            raise DomainError(f"parts must be >= 2: {parts}")
        if list(parts) != sorted(parts):
            raise DomainError(f"parts must be nondecreasing: {parts}")
        object.__setattr__(self, "parts", parts)

    @property
    def r(self) -> int:
        return sum(self.parts)

    @property
    def m(self) -> int:
        return len(self.parts)

    @property
    def multiplicities(self) -> List[Tuple[int, int]]:
        """Distinct parts in increasing order with their counts."""
        return [(part, len(list(group))) for part, group in groupby(self.parts)]

    def __str__(self):
        return "(" + ",".join(str(p) for p in self.parts) + ")"


def _nondecreasing_parts(remaining: int, minimum: int) -> Iterator[Tuple[int, ...]]:
    if remaining == 0:
        yield ()
        return
    for first in range(minimum, remaining + 1):
        rest = remaining - first
        # the tail must be empty or start at >= first
        if rest == 0 or rest >= first:
            for tail in _nondecreasing_parts(rest, first):
                yield (first,) + tail


def partitions_min2(r: int) -> List[Partition]:
    """
    Enumerate the partitions of r into parts >= 2.

    The list is ordered colexicographically: tuples are compared from their
    largest part downwards, so (2,2,3) < (3,4) < (2,5) < (7).

    Args:
        r: Integer to partition, r >= 2

    Returns:
        Every partition exactly once
    """
    if r < 2:
        raise DomainError(f"partitions into parts >= 2 need r >= 2, got {r}")
    found = [Partition(parts) for parts in _nondecreasing_parts(r, 2)]
    found.sort(key=lambda p: tuple(reversed(p.parts)))
    logger.debug(f"J({r}) has {len(found)} partitions")
    return found


def multinomial(r: int, parts: Sequence[int]) -> int:
    """Return r! / (parts[0]! * parts[1]! * ...)."""
    if any(p < 0 for p in parts):
        raise DomainError(f"parts must be nonnegative: {tuple(parts)}")
    if sum(parts) != r:
        raise DomainError(f"parts {tuple(parts)} do not sum to {r}")
    value = math.factorial(r)
    for p in parts:
        value //= math.factorial(p)
    return value


def falling_factorial(n: int, m: int) -> int:
    """Return (n)_m = n(n-1)...(n-m+1); 1 for m = 0 and 0 for m > n."""
    if n < 0 or m < 0:
        raise DomainError(f"falling factorial needs n, m >= 0, got ({n}, {m})")
    if m > n:
        return 0
    return math.prod(range(n - m + 1, n + 1))


def falling_factorial_polynomial(m: int) -> List[int]:
    """
    Coefficients of (n)_m as a polynomial in n, lowest power first.

    These are the signed Stirling numbers of the first kind; e.g. m = 3 gives
    [0, 2, -3, 1] for n^3 - 3n^2 + 2n.
    """
    if m < 0:
        raise DomainError(f"m must be >= 0, got {m}")
    coefficients = [1]
    for i in range(m):
        shifted = [0] + coefficients
        for j, c in enumerate(coefficients):
            shifted[j] -= i * c
        coefficients = shifted
    return coefficients


def double_factorial_odd(k: int) -> int:
    """Return (2k-1)!! = 1*3*...*(2k-1); 1 for k = 0."""
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    return math.prod(range(1, 2 * k, 2))


def leading_coefficient(p: Partition) -> int:
    """Return multinomial(r, parts) / (d_1! ... d_m*!), the n^m coefficient of c(p)."""
    denominator = math.prod(math.factorial(d) for _, d in p.multiplicities)
    value, remainder = divmod(multinomial(p.r, p.parts), denominator)
    assert remainder == 0, f"non-integral coefficient for {p}"
    return value


def expansion_coefficient(p: Partition, n: int) -> int:
    """
    Coefficient of E_{j_m} in E(S_n^r).

    Counts the multi-indices (j_1..j_n) whose nonzero entries rearrange to the
    parts of p, weighted by the multinomial coefficient. Values of n below
    the partition length give 0.
    """
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    return leading_coefficient(p) * falling_factorial(n, p.m)


def composition_count(r: int, n: int) -> int:
    """Number of multi-indices (j_1..j_n) >= 0 with sum r."""
    return math.comb(n + r - 1, r)


def compositions(r: int, n: int) -> Iterator[Tuple[int, ...]]:
    """Enumerate all (j_1..j_n) >= 0 with j_1 + ... + j_n = r."""
    if n == 0:
        if r == 0:
            yield ()
        return
    if n == 1:
        yield (r,)
        return
    for first in range(r + 1):
        for tail in compositions(r - first, n - 1):
            yield (first,) + tail


def set_partitions(items: Sequence) -> Iterator[List[Tuple]]:
    """Enumerate the set partitions of items as lists of blocks."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partial in set_partitions(rest):
        yield [(first,)] + partial
        for i, block in enumerate(partial):
            yield partial[:i] + [(first,) + block] + partial[i + 1 :]


def mobius_weight(blocks: Sequence[Sequence]) -> int:
    """Mobius function of the set partition lattice: prod (-1)^(|B|-1) (|B|-1)!."""
    weight = 1
    for block in blocks:
        size = len(block)
        weight *= (-1) ** (size - 1) * math.factorial(size - 1)
    return weight
