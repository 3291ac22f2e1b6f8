"""
Error laws and reproducible random streams.

Streams are counter-based: a master seed and an integer key (for example
a chunk index) select an independent Philox stream through
``numpy.random.SeedSequence(seed, spawn_key=key)``. Every law is sampled by
inverse CDF from 53-bit open-interval uniforms, so a given (seed, key)
produces the same bits on every platform and for any worker count.
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from core.errors import DomainError
from core.exact import RationalSurd, to_fraction
from core.profiles import (
    MomentProfile,
    bern_profile,
    exp1_profile,
    normal_profile,
    rademacher_profile,
    uniform_profile,
)

logger = logging.getLogger(__name__)

LAW_NAMES = (
    "normal",
    "uniform",
    "centered_exponential",
    "rademacher",
    "centered_bernoulli",
)

_ALIASES = {
    "gaussian": "normal",
    "exponential": "centered_exponential",
    "exp": "centered_exponential",
    "exp1": "centered_exponential",
    "bern": "centered_bernoulli",
    "bernoulli": "centered_bernoulli",
}

_LAW_PATTERN = re.compile(r"^([a-z_0-9]+?)(?:\(([^)]*)\)|:(.+))?$")

_UNIT = 2.0**-53


def make_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for (seed, key)."""
    if seed < 0:
        raise DomainError(f"seeds must be nonnegative, got {seed}")
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def open_uniforms(stream: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1) from 53 random bits each."""
    bits = stream.integers(0, 2**53, size=size, dtype=np.int64)
    return (bits + 0.5) * _UNIT


@dataclass(frozen=True)
class ErrorLaw:
    """A centered error law with variance sigma2."""

    name: str
    sigma2: float = 1.0
    q: Optional[float] = None

    def __post_init__(self):
        name = _ALIASES.get(self.name, self.name)
        if name not in LAW_NAMES:
            raise DomainError(
                f"unknown error law {self.name!r}; choose from {LAW_NAMES}"
            )
        object.__setattr__(self, "name", name)
        if name == "centered_bernoulli":
            if self.q is None or not 0 < self.q < 1:
                raise DomainError(f"centered Bernoulli needs q in (0, 1), got {self.q}")
        elif self.q is not None:
            raise DomainError(f"law {name} takes no q parameter")
        if not self.sigma2 > 0:
            raise DomainError(f"variance must be positive, got {self.sigma2}")

    @classmethod
    def parse(cls, text: str, sigma2: Optional[float] = None) -> "ErrorLaw":
        """
        Parse a law name such as ``normal``, ``exp1`` or ``bern(0.3)``.

        Centered Bernoulli laws default to their natural variance q(1-q).
        """
        match = _LAW_PATTERN.match(text.strip().lower())
        if not match:
            raise DomainError(f"cannot parse error law {text!r}")
        name = _ALIASES.get(match.group(1), match.group(1))
        argument = match.group(2) or match.group(3)
        q = float(argument) if argument else None
        if sigma2 is None:
            sigma2 = 1.0
            if name == "centered_bernoulli" and q:
                exact_q = to_fraction(q)
                sigma2 = float(exact_q * (1 - exact_q))
        return cls(name, float(sigma2), q)

    @property
    def label(self) -> str:
        if self.name == "centered_bernoulli":
            return f"centered_bernoulli({self.q})"
        return self.name

    @property
    def is_symmetric(self) -> bool:
        return self.name in ("normal", "uniform", "rademacher")

    def _unit_profile(self, max_order: int) -> MomentProfile:
        if self.name == "normal":
            return normal_profile(max_order)
        if self.name == "uniform":
            return uniform_profile(max_order)
        if self.name == "centered_exponential":
            return exp1_profile(max_order)
        if self.name == "rademacher":
            return rademacher_profile(max_order)
        return bern_profile(self.q, max_order)

    def profile(self, max_order: int = 8) -> MomentProfile:
        """
        Central moments of the law up to max_order.

        Moments are exact Fractions whenever they are rational, which covers
        every symmetric law and any law whose sigma is rational; otherwise
        they are floats.
        """
        max_order = max(max_order, 4)
        unit = self._unit_profile(max_order)
        sigma2 = to_fraction(self.sigma2)
        scaled = {}
        for order in range(2, max_order + 1):
            value = unit.standardized(order) * RationalSurd.from_power(sigma2, order)
            scaled[order] = value
        if all(v.is_rational for v in scaled.values()):
            central = {k: v.to_fraction() for k, v in scaled.items()}
            return MomentProfile(sigma2, central, name=self.label, check=False)
        central = {k: float(v) for k, v in scaled.items()}
        return MomentProfile(float(sigma2), central, name=self.label, check=False)

    def sample(self, stream: np.random.Generator, size) -> np.ndarray:
        """Draw iid errors by inverse CDF."""
        u = open_uniforms(stream, size)
        sigma = math.sqrt(self.sigma2)
        if self.name == "normal":
            return sigma * ndtri(u)
        if self.name == "uniform":
            half_width = math.sqrt(3.0 * self.sigma2)
            return half_width * (2.0 * u - 1.0)
        if self.name == "centered_exponential":
            return sigma * (-np.log(u)) - sigma
        if self.name == "rademacher":
            return np.where(u < 0.5, sigma, -sigma)
        scale = sigma / math.sqrt(self.q * (1 - self.q))
        return np.where(u < self.q, (1 - self.q) * scale, -self.q * scale)

    def to_dict(self):
        return {"name": self.name, "sigma2": self.sigma2, "q": self.q}

    @classmethod
    def from_dict(cls, data) -> "ErrorLaw":
        return cls(data["name"], float(data.get("sigma2", 1.0)), data.get("q"))


def sample_errors(law: ErrorLaw, n: int, stream: np.random.Generator) -> np.ndarray:
    """n iid draws from law using the given stream."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return law.sample(stream, n)
