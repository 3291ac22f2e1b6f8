"""
Seeded Monte Carlo estimates of moments of xi_n.

Replications are split into chunks of CHUNK_SIZE. Chunk c draws its errors
from the stream make_stream(seed, c) and reduces its values to a count, a
mean and a centered sum of squares; chunk results are merged in chunk order.
The numbers therefore depend on (spec, reps, seed) only, never on the
number of worker threads.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from analysis.laws import make_stream
from analysis.ols import (
    OlsSolver,
    XiSpec,
    shared_design,
    xi_covariance,
    xi_exact_moment,
)
from core.errors import DomainError, NumericError
from core.moments import gaussian_mixed_moment

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
MIN_REPS = 1000
MAX_JOINT_ORDER = 8
# error draws held in memory at once, per worker
DRAW_BUDGET = 1 << 22


@dataclass
class McEstimate:
    """Monte Carlo estimate of one moment, with its standard error."""

    order: Union[float, Tuple[int, ...]]
    estimate: float
    std_error: float
    reps: int
    seed: int
    references: Dict[str, float] = field(default_factory=dict)

    def within(self, target: float, k: float = 4.0, allowance: float = 0.0) -> bool:
        """True when |estimate - target| <= k std_error + allowance."""
        return abs(self.estimate - target) <= k * self.std_error + allowance

    def to_dict(self) -> Dict:
        key = "powers" if isinstance(self.order, tuple) else "r"
        data = {
            key: list(self.order) if isinstance(self.order, tuple) else self.order,
            "value": self.estimate,
            "std_error": self.std_error,
        }
        data.update(self.references)
        return data


@dataclass
class _Moments:
    count: int
    mean: np.ndarray
    m2: np.ndarray

    def merge(self, other: "_Moments") -> "_Moments":
        # pairwise update of mean and centered sum of squares
        total = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / total)
        m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / total)
        return _Moments(total, mean, m2)


def _chunk_sizes(reps: int) -> List[int]:
    full, rest = divmod(reps, CHUNK_SIZE)
    return [CHUNK_SIZE] * full + ([rest] if rest else [])


def _run_chunks(
    values: Callable[[np.random.Generator, int], np.ndarray],
    reps: int,
    seed: int,
    threads: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Means and standard errors of the columns returned by ``values``.

    Args:
        values: Maps (stream, size) to a size x k array of per-replication values
        reps: Total replications
        seed: Master seed
        threads: Worker threads

    Returns:
        (estimates, std_errors), each of length k
    """
    if reps < MIN_REPS:
        raise DomainError(
            f"Monte Carlo needs at least {MIN_REPS} replications, got {reps}"
        )
    if threads < 1:
        raise DomainError(f"threads must be >= 1, got {threads}")

    sizes = _chunk_sizes(reps)

    def reduce_chunk(chunk: int) -> _Moments:
        block = values(make_stream(seed, chunk), sizes[chunk])
        if not np.all(np.isfinite(block)):
            raise NumericError(f"power accumulation overflowed in chunk {chunk}")
        mean = block.mean(axis=0)
        centered = block - mean
        logger.debug(f"chunk {chunk} done ({sizes[chunk]} replications)")
        return _Moments(block.shape[0], mean, (centered * centered).sum(axis=0))

    with ThreadPoolExecutor(max_workers=threads) as executor:
        results = list(executor.map(reduce_chunk, range(len(sizes))))

    merged = results[0]
    for result in results[1:]:
        merged = merged.merge(result)
    if not np.all(np.isfinite(merged.m2)):
        raise NumericError("power accumulation overflowed while merging chunks")
    std_errors = np.sqrt(merged.m2 / (merged.count - 1) / merged.count)
    return merged.mean, std_errors


def _xi_sampler(specs: Sequence[XiSpec]):
    """(stream, size) -> size x k matrix of xi_n draws for functionals on one design."""
    design, law, A = shared_design(specs)
    solver = OlsSolver(design.matrix())
    n = solver.n
    scale = math.sqrt(n)
    rows_per_draw = max(1, DRAW_BUDGET // n)

    def draw(stream: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty((size, len(specs)))
        for start in range(0, size, rows_per_draw):
            stop = min(size, start + rows_per_draw)
            # one replication per row, so slicing never changes the stream order
            errors = law.sample(stream, (stop - start, n))
            # beta_hat - beta is the fit of the errors alone
            coefficients = solver.fit(errors.T, check=False)
            out[start:stop] = scale * (A @ coefficients).T
        return out

    return draw


def mc_xi_moments(
    spec: XiSpec,
    orders: Sequence[int],
    reps: int,
    seed: int,
    threads: int = 1,
    with_exact: bool = True,
) -> List[McEstimate]:
    """
    Monte Carlo estimates of E(xi_n^r) for each r in orders.

    The result does not depend on spec.beta_true: each replication fits the
    error draw directly.
    """
    orders = [int(r) for r in orders]
    if not orders or any(r < 1 for r in orders):
        raise DomainError(f"orders must be positive integers, got {orders}")
    sampler = _xi_sampler([spec])
    powers = np.array(orders)

    logger.info(
        f"simulating xi_n (n={spec.design.n}, law={spec.law.label}) "
        f"orders {orders}, {reps} reps, seed {seed}"
    )
    estimates, std_errors = _run_chunks(
        lambda stream, size: sampler(stream, size) ** powers, reps, seed, threads
    )

    results = []
    for r, estimate, std_error in zip(orders, estimates, std_errors):
        references = {}
        if with_exact:
            references["exact"] = xi_exact_moment(spec, r)
        results.append(
            McEstimate(r, float(estimate), float(std_error), reps, seed, references)
        )
    return results


def mc_joint_moments(
    specs: Sequence[XiSpec],
    powers: Sequence[int],
    reps: int,
    seed: int,
    threads: int = 1,
) -> McEstimate:
    """
    Monte Carlo estimate of E prod_j xi_n,j^(r_j).

    The estimate carries two Gaussian references from Isserlis' theorem: at
    the finite-n covariance and, when the design family has one, at the
    limit covariance.
    """
    powers = tuple(int(r) for r in powers)
    if len(powers) != len(specs):
        raise DomainError(f"{len(powers)} powers for {len(specs)} functionals")
    if any(r < 0 for r in powers) or sum(powers) > MAX_JOINT_ORDER:
        raise DomainError(
            f"powers must be >= 0 with total order <= {MAX_JOINT_ORDER}, got {powers}"
        )
    sampler = _xi_sampler(specs)
    exponents = np.array(powers)

    def product(stream, size):
        return np.prod(sampler(stream, size) ** exponents, axis=1, keepdims=True)

    estimates, std_errors = _run_chunks(product, reps, seed, threads)

    references = {
        "isserlis_finite": gaussian_mixed_moment(xi_covariance(specs), powers)
    }
    if specs[0].design.limit_gram() is not None:
        references["isserlis_limit"] = gaussian_mixed_moment(
            xi_covariance(specs, limit=True), powers
        )
    return McEstimate(
        powers, float(estimates[0]), float(std_errors[0]), reps, seed, references
    )


@dataclass
class TailTable:
    """E(|xi_n|^r 1{|xi_n| > K}) per n and threshold K."""

    r: float
    thresholds: List[float]
    n_grid: List[int]
    estimates: List[List[McEstimate]]

    @property
    def supremum(self) -> List[float]:
        """Largest estimate over the n grid, per threshold."""
        return [
            max(row[j].estimate for row in self.estimates)
            for j in range(len(self.thresholds))
        ]

    def to_dict(self) -> Dict:
        return {
            "r": self.r,
            "thresholds": self.thresholds,
            "rows": [
                {
                    "n": n,
                    "tails": [
                        {"K": K, "value": e.estimate, "std_error": e.std_error}
                        for K, e in zip(self.thresholds, row)
                    ],
                }
                for n, row in zip(self.n_grid, self.estimates)
            ],
            "supremum": self.supremum,
        }


def ui_tail_diagnostic(
    spec: XiSpec,
    r: float,
    thresholds: Sequence[float],
    reps: int,
    seed: int,
    n_grid: Optional[Sequence[int]] = None,
    threads: int = 1,
) -> TailTable:
    """
    Tail expectations of |xi_n|^r, a desk-scale check of uniform integrability.

    Args:
        spec: Functional; its design is re-generated at each n of n_grid
        r: Positive, possibly fractional, moment order
        thresholds: Cut-offs K
        reps: Replications per n
        seed: Master seed, shared by every n
        n_grid: Sample sizes; defaults to the design's own n
    """
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    thresholds = sorted(float(K) for K in thresholds)
    if not thresholds or thresholds[0] < 0:
        raise DomainError("thresholds must be a nonempty list of values >= 0")
    n_grid = list(n_grid) if n_grid else [spec.design.n]
    cutoffs = np.array(thresholds)

    rows = []
    for n in n_grid:
        sampler = _xi_sampler([spec.with_n(n) if n != spec.design.n else spec])

        def tails(stream, size):
            xi = np.abs(sampler(stream, size))
            return np.where(xi > cutoffs, xi**r, 0.0)

        estimates, std_errors = _run_chunks(tails, reps, seed, threads)
        rows.append(
            [
                McEstimate(float(r), float(e), float(s), reps, seed)
                for e, s in zip(estimates, std_errors)
            ]
        )
        logger.debug(f"tail diagnostic at n={n}: {[round(e, 6) for e in estimates]}")
    return TailTable(float(r), thresholds, n_grid, rows)
