"""
OLS fitting and the scaled linear functional xi_n = sqrt(n) alpha^T (beta_hat - beta).

xi_n is linear in the errors: xi_n = sum_i b_i eps_i with
b_i = sqrt(n) alpha^T (X^T X)^(-1) x_i, so its exact moments follow from the
weighted moment engine once the weights are known.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from analysis.designs import Design
from analysis.laws import ErrorLaw
from core.errors import DomainError, NumericError
from core.moments import CovarianceMatrix, weighted_moment
from core.profiles import MomentProfile

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
ORTHOGONALITY_TOLERANCE = 1e-8
IDENTITY_TOLERANCE = 1e-10


class OlsSolver:
    """Cholesky factorization of X^T X, computed once and reused for many fits."""

    def __init__(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        n, p = X.shape
        if n <= p:
            raise DomainError(f"OLS needs n > p, got n={n}, p={p}")
        self.X = X
        self.gram = X.T @ X
        condition = np.linalg.cond(self.gram)
        if not np.isfinite(condition) or condition > CONDITION_LIMIT:
            raise NumericError(
                f"X^T X is singular or ill-conditioned (condition {condition:.3g})"
            )
        try:
            self._factor = scipy.linalg.cho_factor(self.gram)
        except np.linalg.LinAlgError as e:
            raise NumericError(f"X^T X is not positive definite: {e}") from e

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def solve_gram(self, rhs) -> np.ndarray:
        """(X^T X)^(-1) rhs for a p-vector or p x m matrix."""
        return scipy.linalg.cho_solve(self._factor, rhs)

    def fit(self, y, check: bool = True) -> np.ndarray:
        """
        Least-squares coefficients for one or more responses.

        Args:
            y: n-vector or n x m matrix of responses
            check: Verify X^T (y - X beta_hat) = 0 relative to X^T y

        Returns:
            p-vector (or p x m matrix) beta_hat
        """
        y = np.asarray(y, dtype=float)
        Xty = self.X.T @ y
        beta = self.solve_gram(Xty)
        if check:
            normal = self.X.T @ (y - self.X @ beta)
            scale = max(
                np.linalg.norm(Xty),
                np.finfo(float).eps * np.linalg.norm(self.X) * np.linalg.norm(y),
            )
            if np.linalg.norm(normal) > ORTHOGONALITY_TOLERANCE * scale:
                raise NumericError(
                    f"residuals are not orthogonal to X "
                    f"(|X^T r| = {np.linalg.norm(normal):.3g})"
                )
        return beta

    def scaled_inverse(self) -> np.ndarray:
        """n (X^T X)^(-1)."""
        return self.n * self.solve_gram(np.eye(self.p))


def ols_fit(X, y) -> np.ndarray:
    """beta_hat = (X^T X)^(-1) X^T y."""
    return OlsSolver(X).fit(y)


@dataclass(frozen=True)
class XiSpec:
    """xi_n = sqrt(n) alpha^T (beta_hat - beta) on a design under an error law."""

    design: Design
    alpha: Tuple[float, ...]
    law: ErrorLaw
    beta_true: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        alpha = tuple(float(a) for a in np.atleast_1d(self.alpha))
        if len(alpha) != self.design.p:
            raise DomainError(
                f"alpha has {len(alpha)} entries for a design with p={self.design.p}"
            )
        if not any(alpha):
            raise DomainError("alpha must be nonzero")
        object.__setattr__(self, "alpha", alpha)
        beta = self.beta_true
        beta = (0.0,) * len(alpha) if beta is None else tuple(float(v) for v in beta)
        if len(beta) != len(alpha):
            raise DomainError(
                f"beta_true has {len(beta)} entries, expected {len(alpha)}"
            )
        object.__setattr__(self, "beta_true", beta)

    def with_n(self, n: int) -> "XiSpec":
        return XiSpec(self.design.with_n(n), self.alpha, self.law, self.beta_true)

    def to_dict(self):
        return {
            "design": self.design.to_dict(),
            "alpha": list(self.alpha),
            "law": self.law.to_dict(),
            "beta_true": list(self.beta_true),
        }

    @classmethod
    def from_dict(cls, data) -> "XiSpec":
        return cls(
            Design.from_dict(data["design"]),
            tuple(data["alpha"]),
            ErrorLaw.from_dict(data["law"]),
            tuple(data["beta_true"]) if data.get("beta_true") is not None else None,
        )


def _quadratic_form(solver: OlsSolver, alpha: Sequence[float]) -> float:
    """alpha^T n (X^T X)^(-1) alpha."""
    alpha = np.asarray(alpha, dtype=float)
    return float(solver.n * alpha @ solver.solve_gram(alpha))


def xi_weights(spec: XiSpec) -> np.ndarray:
    """
    Weights b with xi_n = sum_i b_i eps_i.

    Checks sum b_i^2 = alpha^T n (X^T X)^(-1) alpha and the bound
    sum b_i^2 <= p alpha^T n (X^T X)^(-1) alpha.
    """
    solver = OlsSolver(spec.design.matrix())
    alpha = np.asarray(spec.alpha)
    b = math.sqrt(solver.n) * (solver.X @ solver.solve_gram(alpha))

    total = math.fsum(b * b)
    form = _quadratic_form(solver, alpha)
    if abs(total - form) > IDENTITY_TOLERANCE * abs(form):
        raise NumericError(f"weight identity failed: sum b^2 = {total}, form = {form}")
    if total > solver.p * form * (1 + IDENTITY_TOLERANCE):
        raise NumericError(f"weight bound failed: {total} > {solver.p} * {form}")
    return b


def xi_from_response(spec: XiSpec, y, solver: Optional[OlsSolver] = None):
    """
    sqrt(n) alpha^T (beta_hat - beta_true) for observed responses.

    Args:
        spec: Functional; spec.beta_true is the coefficient vector behind y
        y: n-vector, or n x m matrix with one response per column
        solver: Factorization of spec.design to reuse

    Returns:
        Scalar, or an m-vector for a response matrix
    """
    if solver is None:
        solver = OlsSolver(spec.design.matrix())
    y = np.asarray(y, dtype=float)
    if y.shape[0] != solver.n:
        raise DomainError(f"response has {y.shape[0]} rows, design has {solver.n}")
    beta_hat = solver.fit(y)
    beta = np.asarray(spec.beta_true)
    if beta_hat.ndim == 2:
        beta = beta[:, None]
    return math.sqrt(solver.n) * (np.asarray(spec.alpha) @ (beta_hat - beta))


def xi_exact_moment(spec: XiSpec, r: int, profile: Optional[MomentProfile] = None):
    """
    E(xi_n^r) conditional on the design, from the weighted moment engine.

    Args:
        spec: Functional to evaluate
        r: Moment order
        profile: Error moments; defaults to the moments of spec.law

    Returns:
        Float value. Orders 2 and 3 are cross-checked against
        sigma^2 sum b_i^2 and mu_3 sum b_i^3.
    """
    if profile is None:
        profile = spec.law.profile(max(r, 4))
    b = xi_weights(spec)
    value = float(weighted_moment(r, b, profile))

    closed = None
    if r == 2:
        closed = float(profile.raw(2)) * math.fsum(b**2)
    elif r == 3:
        closed = float(profile.raw(3)) * math.fsum(b**3)
    if closed is not None:
        scale = max(abs(closed), IDENTITY_TOLERANCE * float(profile.sigma2) ** (r / 2))
        if abs(value - closed) > IDENTITY_TOLERANCE * scale:
            raise NumericError(
                f"E(xi^{r}) disagrees with its closed form: {value} vs {closed}"
            )
    logger.debug(f"E(xi_n^{r}) = {value} at n={spec.design.n}")
    return value


def finite_variance(spec: XiSpec) -> float:
    """Var(xi_n) = sigma^2 alpha^T n (X^T X)^(-1) alpha."""
    solver = OlsSolver(spec.design.matrix())
    return spec.law.sigma2 * _quadratic_form(solver, spec.alpha)


def limit_variance(spec: XiSpec) -> float:
    """sigma^2 alpha^T V alpha with V = (lim X^T X / n)^(-1)."""
    limit = spec.design.limit_gram()
    if limit is None:
        raise DomainError(f"design family {spec.design.family} has no known limit")
    alpha = np.asarray(spec.alpha)
    return spec.law.sigma2 * float(alpha @ np.linalg.solve(limit, alpha))


def shared_design(specs: Sequence[XiSpec]) -> Tuple[Design, ErrorLaw, np.ndarray]:
    if not specs:
        raise DomainError("at least one functional is required")
    design, law = specs[0].design, specs[0].law
    for spec in specs[1:]:
        if spec.design.to_dict() != design.to_dict() or spec.law != law:
            raise DomainError("joint functionals must share one design and error law")
    return design, law, np.array([spec.alpha for spec in specs])


def xi_covariance(specs: Sequence[XiSpec], limit: bool = False) -> CovarianceMatrix:
    """
    Covariance of (xi_n,1 .. xi_n,k) for functionals sharing one design.

    sigma^2 A n (X^T X)^(-1) A^T at the design's n, or sigma^2 A V A^T in the
    limit.
    """
    design, law, A = shared_design(specs)
    if limit:
        gram = design.limit_gram()
        if gram is None:
            raise DomainError(f"design family {design.family} has no known limit")
        inner = np.linalg.inv(gram)
    else:
        inner = OlsSolver(design.matrix()).scaled_inverse()
    return CovarianceMatrix(law.sigma2 * A @ inner @ A.T)
