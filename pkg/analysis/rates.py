"""
Convergence rates of moments and the divergence reports for adversarial designs.
"""

import bisect
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from analysis.designs import alpha_values, prop1_design, prop2_cumulative_sums
from analysis.laws import ErrorLaw
from analysis.ols import XiSpec, limit_variance, xi_exact_moment
from analysis.simulation import mc_xi_moments
from core.errors import DomainError, NumericError
from core.exact import RationalSurd, to_fraction
from core.moments import gaussian_moment, limit_even, limit_even_printed, moment_Z
from core.profiles import MomentProfile

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4
DEFAULT_ESCAPE_FACTOR = 10
VERIFY_RELATIVE = 1e-10

Value = Union[Fraction, RationalSurd, float]


@dataclass
class RateRow:
    n: int
    delta: Value
    scaled: Optional[Value] = None
    std_error: Optional[float] = None


@dataclass
class RateTable:
    """Delta_n = E(moment at n) - E(limit moment) over an n grid."""

    r: int
    source: str
    scaling: Fraction
    rows: List[RateRow] = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        if self.source not in ("exact", "mc"):
            raise DomainError(f"source must be exact or mc, got {self.source!r}")
        ns = [row.n for row in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise DomainError(f"n grid must be strictly increasing: {ns}")

    @property
    def identically_zero(self) -> bool:
        return self.source == "exact" and all(row.delta == 0 for row in self.rows)

    def csv_rows(self) -> List[List]:
        """Rows for the ``n,delta,scaled,std_error`` CSV layout."""
        return [
            [
                row.n,
                float(row.delta),
                "" if row.scaled is None else float(row.scaled),
                "" if row.std_error is None else row.std_error,
            ]
            for row in self.rows
        ]

    def to_dict(self) -> Dict:
        return {
            "r": self.r,
            "source": self.source,
            "scaling": str(self.scaling),
            "label": self.label,
            "identically_zero": self.identically_zero,
            "rows": [
                {
                    "n": row.n,
                    "delta": float(row.delta),
                    "delta_exact": str(row.delta) if self.source == "exact" else None,
                    "scaled": None if row.scaled is None else float(row.scaled),
                    "std_error": row.std_error,
                }
                for row in self.rows
            ],
        }


@dataclass
class RateFit:
    """Least-squares line through (log n, log |Delta_n|)."""

    slope: float
    intercept: float
    r_squared: float
    n_min: int
    n_max: int
    sign_changes: bool = False

    def to_dict(self) -> Dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_min": self.n_min,
            "n_max": self.n_max,
            "sign_changes": self.sign_changes,
        }


def default_scaling(r: int) -> Fraction:
    """n^1 for even orders, n^(1/2) for odd ones."""
    return Fraction(1) if r % 2 == 0 else Fraction(1, 2)


def _check_grid(n_grid: Sequence[int]) -> List[int]:
    grid = [int(n) for n in n_grid]
    if not grid:
        raise DomainError("the n grid is empty")
    if grid[0] < 1:
        raise DomainError(f"sample sizes must be >= 1, got {grid[0]}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError(f"n grid must be strictly increasing: {grid}")
    return grid


def delta_sequence(
    r: int, profile: MomentProfile, n_grid: Sequence[int], s=None
) -> RateTable:
    """
    Exact Delta_n = E(Z_n^r) - E(Z^r) for a standardized sum.

    Args:
        r: Moment order
        profile: Exact profile carrying order r
        n_grid: Increasing sample sizes
        s: Scaling exponent for the scaled column; n for even r and
            sqrt(n) for odd r by default

    Returns:
        Exact RateTable; Delta_n is rational for even r
    """
    s = default_scaling(r) if s is None else to_fraction(s)
    rows = []
    for n in _check_grid(n_grid):
        delta = moment_Z(r, n, profile) - gaussian_moment(r)
        if (2 * s).denominator == 1:
            scaled = delta * RationalSurd.from_power(n, int(2 * s))
        else:
            scaled = float(delta) * n ** float(s)
        rows.append(RateRow(n, delta, scaled))
        logger.debug(f"Delta_{n}({r}) = {delta}")

    table = RateTable(r, "exact", s, rows, label=profile.name)
    if table.identically_zero:
        logger.warning(f"Delta_n({r}) is identically zero for profile {profile.name}")
    return table


def xi_delta_sequence(spec: XiSpec, r: int, n_grid: Sequence[int], s=None) -> RateTable:
    """Delta_n = E(xi_n^r) - E(xi^r) with xi ~ N(0, sigma^2 alpha^T V alpha)."""
    s = default_scaling(r) if s is None else to_fraction(s)
    limit_moment = gaussian_moment(r) * limit_variance(spec) ** (r / 2)
    rows = []
    for n in _check_grid(n_grid):
        delta = xi_exact_moment(spec.with_n(n), r) - limit_moment
        rows.append(RateRow(n, delta, delta * n ** float(s)))
    return RateTable(r, "exact", s, rows, label=f"xi/{spec.design.family}")


def mc_delta_sequence(
    spec: XiSpec,
    r: int,
    n_grid: Sequence[int],
    reps: int,
    seed: int,
    threads: int = 1,
    s=None,
) -> RateTable:
    """Monte Carlo Delta_n for xi_n, with standard errors."""
    s = default_scaling(r) if s is None else to_fraction(s)
    limit_moment = gaussian_moment(r) * limit_variance(spec) ** (r / 2)
    rows = []
    for n in _check_grid(n_grid):
        estimate = mc_xi_moments(
            spec.with_n(n), [r], reps, seed, threads, with_exact=False
        )[0]
        delta = estimate.estimate - limit_moment
        rows.append(RateRow(n, delta, delta * n ** float(s), estimate.std_error))
    return RateTable(r, "mc", s, rows, label=f"xi/{spec.design.family}")


def loglog_slope(table: RateTable) -> RateFit:
    """
    Fit log |Delta_n| = intercept + slope * log n.

    Zero deltas are skipped; a sign change in the remaining rows is flagged
    and the fit uses absolute values.
    """
    if table.identically_zero:
        raise DomainError("cannot fit a rate to an identically zero table")
    usable = [(row.n, float(row.delta)) for row in table.rows if row.delta != 0]
    if len(usable) < MIN_FIT_POINTS:
        raise DomainError(
            f"a rate fit needs at least {MIN_FIT_POINTS} nonzero deltas, "
            f"got {len(usable)}"
        )
    signs = {math.copysign(1.0, delta) for _, delta in usable}
    sign_changes = len(signs) > 1
    if sign_changes:
        logger.warning(f"Delta_n({table.r}) changes sign; fitting |Delta_n|")

    x = np.log([n for n, _ in usable])
    y = np.log([abs(delta) for _, delta in usable])
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if total == 0 else 1.0 - float(np.sum(residual**2)) / total
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=min(max(r_squared, 0.0), 1.0),
        n_min=usable[0][0],
        n_max=usable[-1][0],
        sign_changes=sign_changes,
    )


@dataclass
class ScaledLimitReport:
    s: Fraction
    target: float
    ns: List[int]
    scaled: List[float]
    errors: List[float]
    relative: bool

    @property
    def last_error(self) -> float:
        return self.errors[-1]

    @property
    def error_decreasing(self) -> bool:
        """Errors never increase along the grid (exact zeros allowed)."""
        return all(b <= a or b == 0 for a, b in zip(self.errors, self.errors[1:]))

    def to_dict(self) -> Dict:
        return {
            "s": str(self.s),
            "target": self.target,
            "relative": self.relative,
            "rows": [
                {"n": n, "scaled": v, "error": e}
                for n, v, e in zip(self.ns, self.scaled, self.errors)
            ],
            "last_error": self.last_error,
            "error_decreasing": self.error_decreasing,
        }


def scaled_limit_check(table: RateTable, s, target) -> ScaledLimitReport:
    """
    Compare n^s Delta_n with its predicted limit.

    Errors are relative to the target, or absolute when the target is 0.
    """
    s = to_fraction(s)
    target = float(target)
    scaled = []
    for row in table.rows:
        if row.scaled is not None and s == table.scaling:
            scaled.append(float(row.scaled))
        else:
            scaled.append(float(row.delta) * row.n ** float(s))
    relative = target != 0
    if relative:
        errors = [abs(v - target) / abs(target) for v in scaled]
    else:
        errors = [abs(v) for v in scaled]
    return ScaledLimitReport(
        s, target, [row.n for row in table.rows], scaled, errors, relative
    )


def limit_adjudication(k: int, profile: MomentProfile, n: int) -> Dict:
    """
    Derived and printed even-order constants next to n Delta_n(2k).

    The observed value is n Delta_n at n together with the Richardson
    estimate 2 (2n) Delta_2n - n Delta_n, which removes the 1/n term.
    """
    table = delta_sequence(2 * k, profile, [n, 2 * n])
    observed = float(table.rows[0].scaled)
    extrapolated = 2 * float(table.rows[1].scaled) - observed
    derived = float(limit_even(k, profile))
    printed = float(limit_even_printed(k, profile))

    def miss(value: float) -> float:
        if extrapolated == 0:
            return abs(value)
        return abs(value - extrapolated) / abs(extrapolated)

    return {
        "k": k,
        "profile": profile.name,
        "n": n,
        "observed": observed,
        "extrapolated": extrapolated,
        "derived": derived,
        "printed": printed,
        "derived_error": miss(derived),
        "printed_error": miss(printed),
    }


@dataclass
class DivergenceRow:
    n: int
    value: float
    n_used: Optional[int] = None
    direct: Optional[float] = None


@dataclass
class DivergenceReport:
    """Finite-n values of a sequence that escapes to infinity."""

    kind: str
    rows: List[DivergenceRow]
    escape_factor: float = DEFAULT_ESCAPE_FACTOR
    fitted_exponent: Optional[float] = None
    raw_exponent: Optional[float] = None
    candidates: Dict[str, float] = field(default_factory=dict)

    @property
    def monotone(self) -> bool:
        """|value| strictly increasing along the grid."""
        magnitudes = [abs(row.value) for row in self.rows]
        return all(b > a for a, b in zip(magnitudes, magnitudes[1:]))

    @property
    def decreasing(self) -> bool:
        """Values strictly decreasing along the grid."""
        values = [row.value for row in self.rows]
        return all(b < a for a, b in zip(values, values[1:]))

    @property
    def escape(self) -> bool:
        """Monotone and past escape_factor times the first magnitude."""
        first, last = abs(self.rows[0].value), abs(self.rows[-1].value)
        return self.monotone and last >= self.escape_factor * first

    def csv_rows(self) -> List[List]:
        return [
            [
                row.n,
                "" if row.n_used is None else row.n_used,
                row.value,
                "" if row.direct is None else row.direct,
            ]
            for row in self.rows
        ]

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "rows": [
                {
                    "n": row.n,
                    "n_used": row.n_used,
                    "value": row.value,
                    "direct": row.direct,
                }
                for row in self.rows
            ],
            "monotone": self.monotone,
            "decreasing": self.decreasing,
            "escape": self.escape,
            "escape_factor": self.escape_factor,
            "fitted_exponent": self.fitted_exponent,
            "raw_exponent": self.raw_exponent,
            "candidates": self.candidates,
        }


def prop1_divergence_report(
    alpha_rule,
    n_grid: Sequence[int],
    sigma2: float = 1.0,
    verify_up_to: int = 0,
    escape_factor: float = DEFAULT_ESCAPE_FACTOR,
) -> DivergenceReport:
    """
    alpha_n (E(xi_n^2) - sigma^2) on the design x_i = sqrt(1 + beta_i).

    E(xi_n^2) = sigma^2 / (1 + alpha_n^(-1/2)) in closed form, so the value is
    -sigma^2 alpha_n^(1/2) / (1 + alpha_n^(-1/2)). Sizes up to verify_up_to
    are also evaluated through the weighted moment engine.
    """
    grid = _check_grid(n_grid)
    alphas = alpha_values(alpha_rule, grid[-1])
    law = ErrorLaw("normal", sigma2)

    rows = []
    for n in grid:
        alpha = float(alphas[n - 1])
        value = -sigma2 * math.sqrt(alpha) / (1.0 + 1.0 / math.sqrt(alpha))
        row = DivergenceRow(n, value)
        if n <= verify_up_to:
            spec = XiSpec(prop1_design(n, alpha_rule), (1.0,), law)
            row.direct = alpha * (xi_exact_moment(spec, 2) - sigma2)
            if abs(row.direct - value) > VERIFY_RELATIVE * abs(value):
                raise NumericError(
                    f"closed form {value} and direct value {row.direct} "
                    f"disagree at n={n}"
                )
        rows.append(row)

    report = DivergenceReport("prop1", rows, escape_factor)
    if not report.decreasing:
        logger.warning("the prop1 sequence is not strictly decreasing on this grid")
    if not report.escape:
        logger.warning("the prop1 sequence did not escape on this grid")
    return report


def prop2_exponents(a) -> Dict[str, float]:
    """Candidate growth exponents of n^a E(xi_n^3)."""
    a = to_fraction(a)
    return {
        "printed": float(a * (3 - 4 * a) / (4 * (1 - a))),
        "derived": float(a * (1 - 2 * a) / (2 * (1 - a))),
    }


def prop2_divergence_report(
    a,
    n_grid: Sequence[int],
    mu3: float,
    escape_factor: float = DEFAULT_ESCAPE_FACTOR,
) -> DivergenceReport:
    """
    n^a E(xi_n^3) on the sparse spike design, from exact spike sums.

    E(xi_n^3) = n^(3/2) sum x_i^3 / (X^T X)^3 mu_3. Each grid size n is
    evaluated at the largest spike row n' <= n, where the sequence is free of
    the sawtooth between spikes. The growth exponent s is fitted from
    log f = c + s log n' + d n'^(-1/(b+1)); the plain log-log slope over
    the raw grid sizes is reported next to it.
    """
    if mu3 == 0:
        raise DomainError("the third error moment must be nonzero")
    grid = _check_grid(n_grid)
    a_exact = to_fraction(a)
    if not 0 < a_exact < Fraction(1, 2):
        raise DomainError(f"a must lie in (0, 1/2), got {a_exact}")
    b = (1 - 2 * a_exact) / a_exact
    spike_rows, gram, cubes = prop2_cumulative_sums(grid[-1], a_exact)

    def value_at(n: int, j: int) -> float:
        scale = n ** (float(a_exact) + 1.5)
        return scale * float(cubes[j]) / float(gram[j]) ** 3 * mu3

    rows, raw_values = [], []
    for n in grid:
        j = bisect.bisect_right(spike_rows, n) - 1
        aligned = spike_rows[j]
        rows.append(DivergenceRow(n, value_at(aligned, j), n_used=aligned))
        raw_values.append(value_at(n, j))

    report = DivergenceReport(
        "prop2", rows, escape_factor, candidates=prop2_exponents(a_exact)
    )
    if len(rows) >= MIN_FIT_POINTS:
        used = np.array([row.n_used for row in rows], dtype=float)
        design = np.column_stack(
            [np.ones_like(used), np.log(used), used ** (-1.0 / float(b + 1))]
        )
        target = np.log([abs(row.value) for row in rows])
        coefficients = np.linalg.lstsq(design, target, rcond=None)[0]
        report.fitted_exponent = float(coefficients[1])
        report.raw_exponent = float(
            np.polyfit(np.log(grid), np.log(np.abs(raw_values)), 1)[0]
        )
        logger.info(
            f"fitted exponent {report.fitted_exponent:.4f} "
            f"(raw {report.raw_exponent:.4f}); candidates {report.candidates}"
        )
    return report
