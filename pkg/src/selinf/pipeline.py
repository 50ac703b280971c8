"""Selective confidence intervals for lasso-selected regression coefficients.

Typical use::

    X = DesignMatrix.standardize(raw, names)
    sigma2 = estimate_sigma(X, y)
    lam = select_lambda(X, sigma2, seed=0)
    result = infer(X, y, PenaltySpec(lam), sigma2, alpha=0.1)

Randomness is driven by one integer seed. Independent streams are derived
with ``numpy.random.SeedSequence(seed, spawn_key=(k,))`` where ``k`` is
``STREAM_LAMBDA`` for the penalty simulation and ``STREAM_SPLIT`` for data
splitting, so every stream is reproducible on its own.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from .errors import (
    MustSupplySigmaError,
    NumericalError,
    ValidationError,
)
from .lasso import (
    DesignMatrix,
    LassoSolution,
    PenaltySpec,
    SolverOptions,
    as_array,
    check_gram_conditioning,
    solve,
)
from .pivot import (
    decompose,
    observed_region_check,
    truncation_limits,
    union_region,
)
from .selection import MODEL_CAP, build_polyhedron, enumerate_sign_polyhedra
from .truncnorm import TruncationRegion, tn_interval_bounds, tn_pivot

__all__ = [
    "InferenceTarget",
    "SelectiveInterval",
    "InferenceResult",
    "estimate_sigma",
    "select_lambda",
    "infer",
    "data_split_baseline",
    "naive_intervals",
    "derive_rng",
    "SIGN",
    "MODEL",
]

SIGN = "sign"
MODEL = "model"
SPLIT = "split"
OLS = "ols"

STREAM_LAMBDA = 0
STREAM_SPLIT = 1


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def thread_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    try:
        return max(1, int(os.environ.get("SELINF_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class InferenceTarget:
    """Coefficient ``j`` of the least-squares fit on the columns in ``model``."""

    model: tuple[int, ...]
    coef_index: int
    eta: np.ndarray = field(repr=False)
    target_name: str

    @classmethod
    def for_model(cls, X, model: Sequence[int], names: Sequence[str] | None = None):
        X = as_array(X)
        model = tuple(model)
        pinv = np.linalg.pinv(X[:, list(model)])  # |M| x n
        names = names or [f"X{j + 1}" for j in range(X.shape[1])]
        return [
            cls(model, j, pinv[k].copy(), names[j]) for k, j in enumerate(model)
        ]


@dataclass(frozen=True)
class SelectiveInterval:
    target: InferenceTarget
    estimate: float
    lower: float
    upper: float
    level: float
    mode: str
    pivot_at_zero: float
    region: TruncationRegion | None = None
    sd: float = math.nan
    error: str | None = None

    @property
    def name(self) -> str:
        return self.target.target_name

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def region_summary(self):
        if self.region is None:
            return []
        return [list(iv) for iv in self.region.intervals]


@dataclass(frozen=True)
class InferenceResult:
    intervals: list[SelectiveInterval]
    null_model: bool
    solution: LassoSolution | None
    sigma2: float
    penalty: PenaltySpec
    column_names: tuple[str, ...] = ()

    @property
    def model(self) -> tuple[int, ...]:
        return self.solution.model if self.solution is not None else ()

    @property
    def model_names(self) -> list[str]:
        return [self.column_names[j] for j in self.model]

    @property
    def signs(self) -> list[int]:
        return [int(v) for v in self.solution.signs] if self.solution is not None else []


def estimate_sigma(X, y) -> float:
    """Residual variance of the full least-squares fit, ``RSS / (n - p)``."""
    X = as_array(X)
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if n <= p:
        raise MustSupplySigmaError(f"cannot estimate sigma with n = {n} <= p = {p}; supply it")
    if np.linalg.matrix_rank(X) < p:
        raise MustSupplySigmaError("design is not of full column rank; supply sigma")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    return float(r @ r / (n - p))


def select_lambda(X, sigma2: float, n_draws: int = 10_000, seed: int = 0, chunk: int = 2000) -> float:
    """``2 E ||X^T eps||_inf`` with ``eps ~ N(0, sigma2 I)``, by simulation."""
    if n_draws < 100:
        raise ValidationError("n_draws must be at least 100")
    if not sigma2 > 0:
        raise ValidationError("sigma2 must be positive")
    X = as_array(X)
    rng = derive_rng(seed, STREAM_LAMBDA)
    sd = math.sqrt(sigma2)
    total = 0.0
    done = 0
    while done < n_draws:
        k = min(chunk, n_draws - done)
        eps = rng.standard_normal((k, X.shape[0])) * sd
        total += float(np.abs(eps @ X).max(axis=1).sum())
        done += k
    return 2.0 * total / n_draws


def _infer_one(target, y, sigma2, alpha, mode, observed_poly, sign_polys, unbracketed):
    dec = decompose(y, target.eta, sigma2)
    try:
        if mode == SIGN:
            region = truncation_limits(observed_poly, dec)
        else:
            region = union_region(sign_polys, dec)
        x = observed_region_check(region, dec)
        lower, upper = tn_interval_bounds(x, dec.var_eta, region, alpha, unbracketed)
        p0 = tn_pivot(x, 0.0, dec.var_eta, region).two_sided
    except NumericalError as exc:
        return SelectiveInterval(
            target, dec.eta_y, math.nan, math.nan, 1 - alpha, mode, math.nan,
            sd=dec.sd_eta, error=f"{type(exc).__name__}: {exc}",
        )
    return SelectiveInterval(
        target, dec.eta_y, lower, upper, 1 - alpha, mode, p0, region, dec.sd_eta
    )


def infer(
    X,
    y,
    penalty: PenaltySpec,
    sigma2: float,
    alpha: float = 0.1,
    mode: str = SIGN,
    cap: int = MODEL_CAP,
    solver_opts: SolverOptions | None = None,
    threads: int | None = None,
    unbracketed: str = "raise",
) -> InferenceResult:
    """Fit the lasso and return one selective interval per selected coefficient.

    ``mode="sign"`` conditions on the selected model and signs (one
    polyhedron); ``mode="model"`` conditions on the model only, taking the
    union over all ``2^|M|`` sign patterns. Numerical trouble for one
    coefficient is recorded on that interval's ``error`` field and does not
    stop the others. ``unbracketed`` is passed to ``tn_interval_bounds``.
    """
    if mode not in (SIGN, MODEL):
        raise ValidationError(f"mode must be '{SIGN}' or '{MODEL}', got {mode!r}")
    if not penalty.lam > 0:
        raise ValidationError("lambda must be positive for selective inference")
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise ValidationError("sigma2 must be positive and finite")
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    names = X.column_names if isinstance(X, DesignMatrix) else ()
    Xa = as_array(X)
    names = names or tuple(f"X{j + 1}" for j in range(Xa.shape[1]))
    y = np.asarray(y, dtype=float).ravel()

    solution = solve(Xa, y, penalty, solver_opts)
    if solution.is_null:
        return InferenceResult([], True, solution, sigma2, penalty, names)
    M = solution.model
    check_gram_conditioning(Xa, M, penalty.gamma)
    observed = sign_polys = None
    if mode == SIGN:
        observed = build_polyhedron(Xa, M, solution.signs, penalty)
    else:
        sign_polys = enumerate_sign_polyhedra(Xa, M, penalty, cap)

    targets = InferenceTarget.for_model(Xa, M, names)

    def task(t):
        return _infer_one(t, y, sigma2, alpha, mode, observed, sign_polys, unbracketed)

    nthreads = thread_count(threads)
    if nthreads > 1 and len(targets) > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            intervals = list(pool.map(task, targets))
    else:
        intervals = [task(t) for t in targets]
    return InferenceResult(intervals, False, solution, sigma2, penalty, names)


def naive_intervals(X, y, model: Sequence[int], sigma2: float, alpha: float = 0.1, names=None):
    """Classical known-variance least-squares intervals on ``model``, ignoring selection."""
    Xa = as_array(X)
    y = np.asarray(y, dtype=float).ravel()
    if names is None and isinstance(X, DesignMatrix):
        names = X.column_names
    check_gram_conditioning(Xa, model)
    zq = norm.ppf(1 - alpha / 2)
    out = []
    for t in InferenceTarget.for_model(Xa, model, names):
        est = float(t.eta @ y)
        sd = math.sqrt(sigma2) * float(np.linalg.norm(t.eta))
        p0 = float(2 * norm.sf(abs(est) / sd))
        out.append(SelectiveInterval(t, est, est - zq * sd, est + zq * sd, 1 - alpha, OLS, p0, sd=sd))
    return out


PenaltyRule = Callable[[np.ndarray, float], PenaltySpec]


def data_split_baseline(
    X,
    y,
    penalty_rule: PenaltySpec | PenaltyRule,
    sigma2: float,
    alpha: float = 0.1,
    seed: int = 0,
    solver_opts: SolverOptions | None = None,
):
    """Select on a random half of the rows, then form classical intervals on the other half.

    ``penalty_rule`` is either a fixed ``PenaltySpec`` or a callable
    ``(X_half, sigma2) -> PenaltySpec`` evaluated on the selection half.
    Returns ``(intervals, split)`` where ``split = (selection_rows, inference_rows)``.
    """
    Xa = as_array(X)
    names = X.column_names if isinstance(X, DesignMatrix) else None
    y = np.asarray(y, dtype=float).ravel()
    n = Xa.shape[0]
    if n < 4:
        raise ValidationError("data splitting needs at least 4 observations")
    perm = derive_rng(seed, STREAM_SPLIT).permutation(n)
    first, second = np.sort(perm[: n // 2]), np.sort(perm[n // 2:])
    X1 = Xa[first]
    penalty = penalty_rule if isinstance(penalty_rule, PenaltySpec) else penalty_rule(X1, sigma2)
    sol = solve(X1, y[first], penalty, solver_opts)
    if sol.is_null:
        return [], (first, second)
    intervals = naive_intervals(Xa[second], y[second], sol.model, sigma2, alpha, names)
    intervals = [
        SelectiveInterval(iv.target, iv.estimate, iv.lower, iv.upper, iv.level, SPLIT,
                          iv.pivot_at_zero, sd=iv.sd)
        for iv in intervals
    ]
    return intervals, (first, second)
