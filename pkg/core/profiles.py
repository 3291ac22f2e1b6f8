"""
Moment profiles of the error / observation law and the bundled named profiles.
"""

import logging
import numbers
import re
from fractions import Fraction
from typing import Dict, Mapping, Union

import numpy as np

from core.combinat import double_factorial_odd
from core.errors import DomainError, InsufficientMomentsError
from core.exact import RationalSurd, to_fraction

logger = logging.getLogger(__name__)

Number = Union[Fraction, float]

HANKEL_TOLERANCE = 1e-10

BUNDLED_PROFILES = ("normal", "uniform", "exp1", "rademacher", "bern(q)")


def _as_number(value) -> Number:
    if isinstance(value, (Fraction, str)) or (
        isinstance(value, numbers.Integral) and not isinstance(value, bool)
    ):
        return to_fraction(value)
    if isinstance(value, numbers.Real):
        return float(value)
    raise TypeError(f"not a moment value: {value!r}")


class MomentProfile:
    """Central moments mu_2..mu_R of a law, with sigma^2 = mu_2."""

    def __init__(
        self,
        sigma2,
        central: Mapping[int, object],
        name: str = "custom",
        check: bool = True,
    ):
        self.name = name
        self.sigma2 = _as_number(sigma2)
        if self.sigma2 <= 0:
            raise DomainError(f"variance must be positive, got {self.sigma2}")

        moments = {int(order): _as_number(v) for order, v in central.items()}
        moments.setdefault(2, self.sigma2)
        if moments[2] != self.sigma2:
            raise DomainError(
                f"mu_2 = {moments[2]} disagrees with sigma^2 = {self.sigma2}"
            )
        orders = sorted(moments)
        if orders[0] < 2 or orders != list(range(2, orders[-1] + 1)):
            raise DomainError(f"central moments must cover 2..R without gaps: {orders}")
        self.central: Dict[int, Number] = {k: moments[k] for k in orders}

        if check:
            self.check_hankel()

    @classmethod
    def from_central(cls, sigma2, central: Mapping[int, object], name="custom"):
        """Build a profile from raw central moments and sigma^2."""
        return cls(sigma2, central, name=name)

    @classmethod
    def from_standardized(cls, moments: Mapping[int, object], name="custom"):
        """Build a profile from standardized moments mu_v / sigma^v."""
        moments = dict(moments)
        if _as_number(moments.get(2, 1)) != 1:
            raise DomainError("the standardized second moment must be 1")
        return cls(1, moments, name=name)

    @property
    def R(self) -> int:
        return max(self.central)

    @property
    def is_exact(self) -> bool:
        return isinstance(self.sigma2, Fraction) and all(
            isinstance(v, Fraction) for v in self.central.values()
        )

    @property
    def is_symmetric(self) -> bool:
        return all(v == 0 for k, v in self.central.items() if k % 2)

    def require(self, order: int):
        if order > self.R:
            raise InsufficientMomentsError(order, self.R)

    def require_exact(self):
        if not self.is_exact:
            raise DomainError(
                f"profile {self.name!r} carries floating point moments; "
                "exact results need rational moments"
            )

    def raw(self, order: int) -> Number:
        """Central moment mu_order, with mu_0 = 1 and mu_1 = 0."""
        if order == 0:
            return Fraction(1)
        if order == 1:
            return Fraction(0)
        self.require(order)
        return self.central[order]

    def standardized(self, order: int) -> Union[RationalSurd, float]:
        """mu_order / sigma^order; exact when the profile is exact."""
        value = self.raw(order)
        if self.is_exact:
            return value * RationalSurd.from_power(self.sigma2, -order)
        return float(value) / float(self.sigma2) ** (order / 2)

    @property
    def kurtosis(self) -> Number:
        return self.raw(4) / self.sigma2**2

    @property
    def skewness(self) -> Union[RationalSurd, float]:
        return self.standardized(3)

    @property
    def skewness_squared(self) -> Number:
        return self.raw(3) ** 2 / self.sigma2**3

    def truncated(self, order: int) -> "MomentProfile":
        """Copy keeping moments up to ``order`` only."""
        self.require(order)
        kept = {k: v for k, v in self.central.items() if k <= order}
        return MomentProfile(self.sigma2, kept, name=self.name, check=False)

    def check_hankel(self):
        """Reject profiles whose Hankel matrix [m_(i+j)] is not PSD."""
        size = self.R // 2 + 1
        hankel = np.empty((size, size))
        for i in range(size):
            for j in range(size):
                hankel[i, j] = float(self.standardized(i + j))
        eigenvalues = np.linalg.eigvalsh(hankel)
        tolerance = HANKEL_TOLERANCE * np.trace(hankel)
        if eigenvalues.min() < -tolerance:
            raise DomainError(
                f"profile {self.name!r} is not a moment sequence "
                f"(Hankel eigenvalue {eigenvalues.min():.3g})"
            )

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "sigma2": _number_to_json(self.sigma2),
            "central": {str(k): _number_to_json(v) for k, v in self.central.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MomentProfile":
        central = {int(k): _number_from_json(v) for k, v in data["central"].items()}
        return cls(
            _number_from_json(data["sigma2"]),
            central,
            name=data.get("name", "custom"),
        )

    def __eq__(self, other):
        if not isinstance(other, MomentProfile):
            return NotImplemented
        return (
            self.name == other.name
            and self.sigma2 == other.sigma2
            and self.central == other.central
        )

    def __repr__(self):
        return f"MomentProfile(name={self.name!r}, sigma2={self.sigma2}, R={self.R})"


def _number_to_json(value: Number):
    # exact values travel as strings so they survive JSON unchanged
    return str(value) if isinstance(value, Fraction) else value


def _number_from_json(value) -> Number:
    return to_fraction(value) if isinstance(value, (str, int)) else float(value)


def subfactorial(n: int) -> int:
    """Number of derangements of n items; the n-th central moment of Exp(1)."""
    a, b = 1, 0
    if n == 0:
        return 1
    for k in range(2, n + 1):
        a, b = b, (k - 1) * (a + b)
    return b


def normal_profile(max_order: int = 8) -> MomentProfile:
    central = {
        k: Fraction(0) if k % 2 else Fraction(double_factorial_odd(k // 2))
        for k in range(2, max_order + 1)
    }
    return MomentProfile(1, central, name="normal")


def uniform_profile(max_order: int = 8) -> MomentProfile:
    """Uniform on (-sqrt(3), sqrt(3)): mu_v = 3^(v/2) / (v+1) for even v."""
    central = {
        k: Fraction(0) if k % 2 else Fraction(3 ** (k // 2), k + 1)
        for k in range(2, max_order + 1)
    }
    return MomentProfile(1, central, name="uniform")


def exp1_profile(max_order: int = 8) -> MomentProfile:
    """Centered Exp(1): mu_v = !v, so skewness 2 and kurtosis 9."""
    central = {k: Fraction(subfactorial(k)) for k in range(2, max_order + 1)}
    return MomentProfile(1, central, name="exp1")


def rademacher_profile(max_order: int = 8) -> MomentProfile:
    central = {k: Fraction(int(k % 2 == 0)) for k in range(2, max_order + 1)}
    return MomentProfile(1, central, name="rademacher")


def bern_profile(q, max_order: int = 8) -> MomentProfile:
    """Centered Bernoulli(q): B - q with variance q(1-q)."""
    q = to_fraction(q)
    if not 0 < q < 1:
        raise DomainError(f"Bernoulli parameter must lie in (0, 1), got {q}")
    central = {
        k: q * (1 - q) ** k + (1 - q) * (-q) ** k for k in range(2, max_order + 1)
    }
    return MomentProfile(q * (1 - q), central, name=f"bern({q})")


_BERN_PATTERN = re.compile(r"^bern(?:\(([^)]+)\)|:(.+))$")


def named_profile(name: str, max_order: int = 8) -> MomentProfile:
    """
    Look up a bundled profile by name.

    Args:
        name: normal, uniform, exp1, rademacher, bern(q) or bern:q
        max_order: highest moment order carried

    Returns:
        MomentProfile
    """
    key = name.strip().lower()
    simple = {
        "normal": normal_profile,
        "uniform": uniform_profile,
        "exp1": exp1_profile,
        "rademacher": rademacher_profile,
    }
    if key in simple:
        return simple[key](max_order)
    match = _BERN_PATTERN.match(key)
    if match:
        return bern_profile(match.group(1) or match.group(2), max_order)
    raise DomainError(
        f"unknown profile {name!r}; bundled profiles: {', '.join(BUNDLED_PROFILES)}"
    )
