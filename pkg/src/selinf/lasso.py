"""Lasso and elastic-net fitting by cyclic coordinate descent.

Objective::

    0.5 * ||y - X b||^2 + lam * ||b||_1 + 0.5 * gamma * ||b||^2

There is no intercept; center the data or include a constant column.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateDesignError,
    InconsistentSolutionError,
    UnsupportedConfigurationError,
    ValidationError,
)

__all__ = [
    "DesignMatrix",
    "PenaltySpec",
    "SolverOptions",
    "LassoSolution",
    "solve",
    "kkt_check",
    "extract_model",
    "objective",
    "check_gram_conditioning",
]

ACTIVE_TOL = 1e-6
MAX_CONDITION = 1e10


@dataclass(frozen=True)
class DesignMatrix:
    """Fixed n x p predictor matrix.

    ``standardized`` asserts that every column is centered and scaled to
    unit Euclidean norm; it is checked on construction.
    """

    values: np.ndarray
    column_names: tuple[str, ...] = ()
    standardized: bool = False

    def __post_init__(self):
        X = np.array(self.values, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"design must be a non-empty 2-d array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValidationError("design contains non-finite entries")
        X.setflags(write=False)
        names = tuple(self.column_names) or tuple(f"X{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValidationError(f"{len(names)} column names for {X.shape[1]} columns")
        if self.standardized:
            means = X.mean(axis=0)
            norms = np.linalg.norm(X, axis=0)
            if np.max(np.abs(means)) > 1e-8 or np.max(np.abs(norms - 1.0)) > 1e-8:
                raise ValidationError("columns flagged standardized are not centered with unit norm")
        object.__setattr__(self, "values", X)
        object.__setattr__(self, "column_names", names)

    @classmethod
    def standardize(cls, X, column_names=()):
        """Center each column and scale it to unit Euclidean norm."""
        X = np.asarray(X, dtype=float)
        Xc = X - X.mean(axis=0)
        norms = np.linalg.norm(Xc, axis=0)
        if np.any(norms == 0):
            bad = [j for j in np.flatnonzero(norms == 0)]
            raise ValidationError(f"constant columns cannot be standardized: {bad}")
        return cls(Xc / norms, column_names, standardized=True)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def as_array(X) -> np.ndarray:
    return X.values if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)


@dataclass(frozen=True)
class PenaltySpec:
    lam: float
    gamma: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError(f"lambda must be finite and nonnegative, got {self.lam}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValidationError(f"gamma must be finite and nonnegative, got {self.gamma}")


@dataclass(frozen=True)
class SolverOptions:
    tol_change: float = 1e-10
    tol_kkt: float = 1e-8
    max_sweeps: int = 100_000
    active_tol: float = ACTIVE_TOL
    track_objective: bool = False


@dataclass(frozen=True)
class LassoSolution:
    beta: np.ndarray
    subgradient: np.ndarray
    model: tuple[int, ...]
    signs: np.ndarray
    penalty: PenaltySpec
    kkt_residual: float
    sweeps: int = 0
    objective_path: tuple[float, ...] = field(default=(), repr=False)

    @property
    def is_null(self) -> bool:
        return len(self.model) == 0


def objective(X, y, beta, penalty: PenaltySpec) -> float:
    X = as_array(X)
    r = np.asarray(y, dtype=float) - X @ beta
    return float(
        0.5 * r @ r + penalty.lam * np.abs(beta).sum() + 0.5 * penalty.gamma * beta @ beta
    )


def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _validate(X, y):
    X = as_array(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise ValidationError("design must be 2-d")
    if y.shape[0] != X.shape[0]:
        raise ValidationError(f"y has length {y.shape[0]}, design has {X.shape[0]} rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValidationError("non-finite values in design or response")
    return X, y


def kkt_check(X, y, beta, penalty: PenaltySpec) -> tuple[float, np.ndarray]:
    """Stationarity violation of ``beta`` and the implied subgradient.

    The subgradient is ``(X^T (y - X beta) - gamma * beta) / lam``. The residual
    uses ``sign(beta_j)`` on the support and the subgradient clipped to
    ``[-1, 1]`` elsewhere, so it is zero exactly at an optimum.
    """
    X, y = _validate(X, y)
    if penalty.lam <= 0:
        raise UnsupportedConfigurationError("KKT subgradient is undefined for lambda = 0")
    beta = np.asarray(beta, dtype=float)
    grad = X.T @ (y - X @ beta) - penalty.gamma * beta
    sub = grad / penalty.lam
    s = np.where(beta != 0, np.sign(beta), np.clip(sub, -1.0, 1.0))
    residual = float(np.max(np.abs(grad - penalty.lam * s))) if beta.size else 0.0
    return residual, sub


def check_gram_conditioning(X, model: Sequence[int], gamma: float = 0.0) -> np.ndarray:
    """Return ``X_M^T X_M + gamma I`` after checking its condition number."""
    X = as_array(X)
    XM = X[:, list(model)]
    G = XM.T @ XM + gamma * np.eye(len(model))
    cond = np.linalg.cond(G) if len(model) else 1.0
    if not cond < MAX_CONDITION:
        raise DegenerateDesignError(
            f"Gram matrix of the selected columns has condition number {cond:.3g}"
        )
    return G


def extract_model(sol: LassoSolution, active_tol: float = ACTIVE_TOL):
    """Equicorrelation set ``{i : |s_i| >= 1 - active_tol}`` and its signs."""
    sub = np.asarray(sol.subgradient)
    on_boundary = np.abs(sub) >= 1.0 - active_tol
    bad = np.flatnonzero((sol.beta != 0) & ~on_boundary)
    if bad.size:
        raise InconsistentSolutionError(
            f"nonzero coefficients with interior subgradient at columns {bad.tolist()}"
        )
    M = tuple(int(i) for i in np.flatnonzero(on_boundary))
    signs = np.sign(sub[list(M)]).astype(float)
    support = set(np.flatnonzero(sol.beta != 0).tolist())
    if len(M) > len(support):
        warnings.warn(
            "equicorrelation set strictly contains the support; "
            f"zero coefficients on the boundary: {sorted(set(M) - support)}",
            stacklevel=2,
        )
    return M, signs


def _polish(G, c, lam, gamma, support, signs):
    # Exact solve on a candidate support; accepted only if it reproduces the signs.
    idx = list(support)
    H = G[np.ix_(idx, idx)] + gamma * np.eye(len(idx))
    try:
        b = np.linalg.solve(H, c[idx] - lam * signs)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.sign(b) != signs):
        return None
    return b


def solve(X, y, penalty: PenaltySpec, opts: SolverOptions | None = None) -> LassoSolution:
    """Fit the lasso (``gamma = 0``) or elastic net by coordinate descent.

    Coordinates are swept over the full set until the active set stops
    changing, then over the active set only; a final exact solve on the
    active set removes the last digits of coordinate-descent error. Raises
    ``ConvergenceError`` when the KKT residual does not reach ``tol_kkt``.
    """
    opts = opts or SolverOptions()
    X, y = _validate(X, y)
    n, p = X.shape
    lam, gamma = penalty.lam, penalty.gamma
    if lam == 0 and np.linalg.matrix_rank(X) < p and gamma == 0:
        raise UnsupportedConfigurationError("lambda = 0 requires a full column rank design")

    G = X.T @ X
    c = X.T @ y
    diag = np.diag(G) + gamma
    if np.any(diag <= 0):
        raise DegenerateDesignError("design has an all-zero column")
    beta = np.zeros(p)
    grad = c.copy()  # c - G beta
    path = []
    if opts.track_objective:
        path.append(objective(X, y, beta, penalty))

    sweeps = 0
    full_sweep = True
    active = np.arange(p)
    while sweeps < opts.max_sweeps:
        sweeps += 1
        coords = range(p) if full_sweep else active
        max_delta = 0.0
        for j in coords:
            old = beta[j]
            new = _soft(grad[j] + diag[j] * old - gamma * old, lam) / diag[j]
            if new != old:
                delta = new - old
                beta[j] = new
                grad -= G[:, j] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if opts.track_objective:
            path.append(objective(X, y, beta, penalty))
        if max_delta <= opts.tol_change:
            if full_sweep:
                break
            full_sweep = True
        elif full_sweep:
            active = np.flatnonzero(beta)
            full_sweep = active.size == 0

    support = np.flatnonzero(beta)
    if support.size and lam > 0:
        b = _polish(G, c, lam, gamma, support, np.sign(beta[support]))
        if b is not None:
            trial = np.zeros(p)
            trial[support] = b
            if kkt_check(X, y, trial, penalty)[0] <= kkt_check(X, y, beta, penalty)[0]:
                beta = trial
                if opts.track_objective:
                    path.append(objective(X, y, beta, penalty))

    if lam > 0:
        residual, sub = kkt_check(X, y, beta, penalty)
    else:
        sub = np.zeros(p)
        residual = float(np.max(np.abs(X.T @ (y - X @ beta) - gamma * beta)))
    if residual > opts.tol_kkt:
        raise ConvergenceError(
            f"coordinate descent stopped after {sweeps} sweeps with KKT residual {residual:.3g}",
            kkt_residual=residual,
            sweeps=sweeps,
        )

    sol = LassoSolution(
        beta=beta,
        subgradient=sub,
        model=(),
        signs=np.zeros(0),
        penalty=penalty,
        kkt_residual=residual,
        sweeps=sweeps,
        objective_path=tuple(path),
    )
    if lam == 0:
        return sol
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        M, s = extract_model(sol, opts.active_tol)
    return LassoSolution(
        beta=beta,
        subgradient=sub,
        model=M,
        signs=s,
        penalty=penalty,
        kkt_residual=residual,
        sweeps=sweeps,
        objective_path=tuple(path),
    )
