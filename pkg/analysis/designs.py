"""
Design matrix generators and design diagnostics.

Every design is described by a small declarative record (family, params, n,
p, seed) that serializes to JSON; the matrix itself is regenerated from the
record on demand and is identical on every call.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import accumulate
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.special import ndtri

from analysis.laws import make_stream, open_uniforms
from core.errors import DomainError, NumericError
from core.exact import to_fraction

logger = logging.getLogger(__name__)

FAMILIES = ("canonical", "convergent", "prop1", "prop2", "iid_random", "explicit")
COLUMN_LAWS = ("normal", "uniform", "rademacher")
MAX_COLUMNS = 8
RANK_RETRIES = 3
TELESCOPING_TOLERANCE = 1e-10

# stream key reserved for design generation; simulations use other keys
_DESIGN_STREAM = 0xD5


@dataclass(frozen=True)
class Design:
    """Declarative description of an n x p design matrix."""

    family: str
    params: Dict = field(default_factory=dict)
    n: int = 2
    p: int = 1
    seed: Optional[int] = None
    _cache: Dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown design family {self.family!r}")
        if not 1 <= self.p <= MAX_COLUMNS:
            raise DomainError(f"p must lie in 1..{MAX_COLUMNS}, got {self.p}")
        if self.n <= self.p:
            raise DomainError(f"full rank needs n > p, got n={self.n}, p={self.p}")
        values = self.params.get("values")
        if self.family == "convergent" and values is not None and len(values) < self.n:
            raise DomainError(
                f"{len(values)} explicit covariate values cannot fill n={self.n} rows"
            )

    def matrix(self) -> np.ndarray:
        """The n x p matrix X (read-only)."""
        if "X" not in self._cache:
            X = _BUILDERS[self.family](self)
            X.setflags(write=False)
            self._cache["X"] = X
        return self._cache["X"]

    def with_n(self, n: int) -> "Design":
        """Same family and parameters at another sample size."""
        if self.family == "explicit":
            raise DomainError("explicit designs have a fixed size")
        return Design(self.family, dict(self.params), n, self.p, self.seed)

    def limit_gram(self) -> Optional[np.ndarray]:
        """lim X^T X / n where the family determines it, else None."""
        family, params = self.family, self.params
        if family in ("canonical", "prop1"):
            return np.ones((1, 1))
        if family == "convergent":
            return np.array([[float(params["c"]) ** 2]])
        if family == "prop2":
            b = _prop2_b(params["a"])
            return np.array([[1.0 / float(b + 1)]])
        if family == "iid_random":
            second = {"normal": 1.0, "uniform": 1.0 / 3.0, "rademacher": 1.0}
            diagonal = np.full(self.p, second[params.get("law", "normal")])
            if params.get("intercept", False):
                diagonal[0] = 1.0
            return np.diag(diagonal)
        return None

    def to_dict(self) -> Dict:
        return {
            "family": self.family,
            "params": dict(self.params),
            "n": self.n,
            "p": self.p,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Design":
        return cls(
            data["family"],
            dict(data.get("params", {})),
            int(data["n"]),
            int(data.get("p", 1)),
            data.get("seed"),
        )


def canonical_design(n: int) -> Design:
    """Column of ones: the standardized average as a regression."""
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    return Design("canonical", {}, n, 1)


def convergent_design(
    n: int,
    c: float,
    a: float = 0.0,
    q: float = 1.0,
    values: Optional[Sequence[float]] = None,
) -> Design:
    """
    Single covariate x_i = c + a / i^q converging to c != 0.

    Args:
        n: Sample size
        c: Limit of the covariate sequence, nonzero
        a: Amplitude of the transient
        q: Decay exponent, q > 0
        values: Explicit sequence used instead of the rule (c is its limit)
    """
    if c == 0:
        raise DomainError("a convergent design needs a nonzero limit c")
    params = {"c": c, "a": a, "q": q}
    if values is not None:
        if len(values) < n:
            raise DomainError(f"{len(values)} explicit values given for n={n}")
        params = {"c": c, "values": [float(v) for v in values]}
    elif q <= 0:
        raise DomainError(f"decay exponent q must be positive, got {q}")
    return Design("convergent", params, n, 1)


def prop1_design(n: int, alpha="sqrt") -> Design:
    """Design x_i = sqrt(1 + beta_i) with X^T X = n (1 + alpha_n^(-1/2))."""
    alpha_values(alpha, n)
    return Design("prop1", {"alpha": alpha}, n, 1)


def prop2_design(n: int, a) -> Design:
    """Sparse design with spikes x = k^(b/2) at rows floor(k^(b+1)), b = (1-2a)/a."""
    _prop2_b(a)
    return Design("prop2", {"a": str(to_fraction(a))}, n, 1)


def iid_random_design(
    n: int, p: int, law: str = "normal", seed: int = 0, intercept: bool = False
) -> Design:
    """Rows drawn iid from a column law, optionally with an intercept column."""
    if law not in COLUMN_LAWS:
        raise DomainError(f"column law must be one of {COLUMN_LAWS}, got {law!r}")
    return Design("iid_random", {"law": law, "intercept": intercept}, n, p, seed)


def explicit_design(rows: Sequence[Sequence[float]]) -> Design:
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return Design("explicit", {"rows": X.tolist()}, X.shape[0], X.shape[1])


def _canonical_matrix(design: Design) -> np.ndarray:
    return np.ones((design.n, 1))


def _convergent_matrix(design: Design) -> np.ndarray:
    params = design.params
    if "values" in params:
        return np.asarray(params["values"][: design.n], dtype=float)[:, None]
    i = np.arange(1, design.n + 1, dtype=float)
    return (params["c"] + params["a"] / i ** params["q"])[:, None]


def alpha_values(rule, n: int) -> np.ndarray:
    """
    alpha_1..alpha_n for a named rate family.

    Args:
        rule: "sqrt", "power:s" (0 < s < 1), "log" for log(n+1), or a list
            of explicit values
        n: Number of terms

    Returns:
        Positive, nondecreasing values with i / alpha_i nondecreasing
    """
    i = np.arange(1, n + 1, dtype=float)
    if isinstance(rule, (list, tuple)):
        if len(rule) < n:
            raise DomainError(f"alpha table has {len(rule)} entries, need {n}")
        values = np.asarray(rule[:n], dtype=float)
    elif rule == "sqrt":
        values = np.sqrt(i)
    elif rule == "log":
        values = np.log1p(i)
    elif isinstance(rule, str) and rule.startswith("power:"):
        s = float(rule.split(":", 1)[1])
        if not 0 < s < 1:
            raise DomainError(f"power rule needs 0 < s < 1, got {s}")
        values = i**s
    else:
        raise DomainError(f"unknown alpha rule {rule!r}")

    if np.any(values <= 0):
        raise DomainError("alpha values must be positive")
    if np.any(np.diff(values) < 0) or np.any(np.diff(i / values) < 0):
        raise DomainError(
            "alpha rule must be nondecreasing with n / alpha_n nondecreasing"
        )
    return values


def prop1_betas(rule, n: int) -> np.ndarray:
    """
    beta_i = i alpha_i^(-1/2) - (i-1) alpha_(i-1)^(-1/2), with beta_1 = alpha_1^(-1/2).
    """
    alphas = alpha_values(rule, n)
    t = np.arange(1, n + 1) / np.sqrt(alphas)
    betas = np.diff(t, prepend=0.0)
    if np.any(betas < -1e-12 * t):
        raise DomainError("alpha rule produced a negative beta")
    return np.maximum(betas, 0.0)


def _prop1_matrix(design: Design) -> np.ndarray:
    rule = design.params["alpha"]
    betas = prop1_betas(rule, design.n)
    gram = math.fsum(1.0 + betas)
    expected = design.n * (1.0 + alpha_values(rule, design.n)[-1] ** -0.5)
    if abs(gram - expected) > TELESCOPING_TOLERANCE * expected:
        raise NumericError(f"telescoping identity failed: {gram} vs {expected}")
    return np.sqrt(1.0 + betas)[:, None]


def _prop2_b(a) -> Fraction:
    a = to_fraction(a)
    if not 0 < a < Fraction(1, 2):
        raise DomainError(f"a must lie in (0, 1/2), got {a}")
    return (1 - 2 * a) / a


def _integer_root(x: int, q: int) -> int:
    """floor(x ** (1/q)) for integers x >= 0, q >= 1."""
    if q == 1 or x < 2:
        return x
    if x.bit_length() < 1000:
        guess = max(int(round(x ** (1.0 / q))), 1)
    else:
        guess = 1 << (x.bit_length() // q + 1)
    # Newton from above settles on the floor
    while guess**q > x:
        guess = ((q - 1) * guess + x // guess ** (q - 1)) // q
    while (guess + 1) ** q <= x:
        guess += 1
    return guess


def prop2_spikes(n: int, a) -> List[Tuple[int, int]]:
    """
    Rows carrying a nonzero covariate, as (row index i, k) pairs.

    Row i = floor(k^(b+1)); when two k land on one row the larger k wins.
    """
    exponent = _prop2_b(a) + 1
    rows: Dict[int, int] = {}
    k = 1
    while True:
        index = _integer_root(k**exponent.numerator, exponent.denominator)
        if index > n:
            break
        rows[index] = k
        k += 1
    return sorted(rows.items())


def prop2_value(k: int, a) -> float:
    return float(k) ** (float(_prop2_b(a)) / 2)


def prop2_cumulative_sums(n: int, a) -> Tuple[List[int], List, List]:
    """
    Spike rows up to n with running totals of x_i^2 and x_i^3.

    Returns:
        (rows, gram, cubes) where gram[j] and cubes[j] sum over the first
        j + 1 spikes. Ints when b is an even integer, floats otherwise.
    """
    b = _prop2_b(a)
    spikes = prop2_spikes(n, a)
    rows = [index for index, _ in spikes]
    if b.denominator == 1 and b.numerator % 2 == 0:
        half = b.numerator // 2
        squares = [k ** (2 * half) for _, k in spikes]
        cubes = [k ** (3 * half) for _, k in spikes]
    else:
        values = [prop2_value(k, a) for _, k in spikes]
        squares = [v * v for v in values]
        cubes = [v**3 for v in values]
    return rows, list(accumulate(squares)), list(accumulate(cubes))


def prop2_sums(n: int, a) -> Tuple[float, float]:
    """X^T X and sum x_i^3 for the sparse design, without building X."""
    _, gram, cubes = prop2_cumulative_sums(n, a)
    return float(gram[-1]), float(cubes[-1])


def _prop2_matrix(design: Design) -> np.ndarray:
    a = design.params["a"]
    X = np.zeros((design.n, 1))
    for index, k in prop2_spikes(design.n, a):
        X[index - 1, 0] = prop2_value(k, a)
    return X


def _matrix_rank(X: np.ndarray) -> int:
    R = scipy.linalg.qr(X, mode="r", pivoting=True)[0]
    diagonal = np.abs(np.diag(R))
    if diagonal.size == 0 or diagonal[0] == 0:
        return 0
    tolerance = max(X.shape) * np.finfo(float).eps * diagonal[0]
    return int(np.sum(diagonal > tolerance))


def _iid_random_matrix(design: Design) -> np.ndarray:
    law = design.params.get("law", "normal")
    intercept = design.params.get("intercept", False)
    seed = design.seed or 0
    for attempt in range(RANK_RETRIES + 1):
        stream = make_stream(seed, _DESIGN_STREAM, attempt)
        u = open_uniforms(stream, (design.n, design.p))
        if law == "normal":
            X = ndtri(u)
        elif law == "uniform":
            X = 2.0 * u - 1.0
        else:
            X = np.where(u < 0.5, 1.0, -1.0)
        if intercept:
            X[:, 0] = 1.0
        if _matrix_rank(X) == design.p:
            return X
        logger.warning(
            f"random design (seed {seed}, attempt {attempt}) is rank deficient, "
            "retrying"
        )
    raise NumericError(
        f"random design stayed rank deficient after {RANK_RETRIES} retries"
    )


def _explicit_matrix(design: Design) -> np.ndarray:
    return np.asarray(design.params["rows"], dtype=float).reshape(design.n, design.p)


_BUILDERS = {
    "canonical": _canonical_matrix,
    "convergent": _convergent_matrix,
    "prop1": _prop1_matrix,
    "prop2": _prop2_matrix,
    "iid_random": _iid_random_matrix,
    "explicit": _explicit_matrix,
}


@dataclass
class DesignDiagnostics:
    """Gram matrix over n, maximal leverage and the trace of the hat matrix."""

    gram_over_n: np.ndarray
    noether_max: float
    hat_trace: float

    def to_dict(self) -> Dict:
        return {
            "gram_over_n": self.gram_over_n.tolist(),
            "noether_max": self.noether_max,
            "hat_trace": self.hat_trace,
        }


def diagnostics(design: Design, block_rows: int = 65536) -> DesignDiagnostics:
    """
    Leverage diagnostics of a design.

    Leverages h_ii = x_i^T (X^T X)^(-1) x_i are the squared column norms of
    L^(-1) X^T for the Cholesky factor L, computed in row blocks so the hat
    matrix is never formed.
    """
    X = design.matrix()
    gram = X.T @ X
    try:
        L = scipy.linalg.cholesky(gram, lower=True)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"X^T X is singular: {e}") from e

    leverage_max = 0.0
    partial_traces = []
    for start in range(0, design.n, block_rows):
        block = X[start : start + block_rows]
        W = scipy.linalg.solve_triangular(L, block.T, lower=True)
        leverages = np.sum(W * W, axis=0)
        leverage_max = max(leverage_max, float(leverages.max()))
        partial_traces.append(math.fsum(leverages))

    return DesignDiagnostics(
        gram_over_n=gram / design.n,
        noether_max=leverage_max,
        hat_trace=math.fsum(partial_traces),
    )
