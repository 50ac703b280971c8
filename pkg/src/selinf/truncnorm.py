"""Gaussian distributions truncated to a finite union of intervals.

All probability mass is handled in log space. A difference of normal CDFs
``Phi(v) - Phi(u)`` is evaluated as ``log Phi(v) + log1mexp(log Phi(u) - log Phi(v))``
after reflecting the interval into the lower half line, so the ratio that
defines the truncated CDF stays finite and accurate far into the tails
(hundreds of standard deviations), where a direct evaluation returns 0/0.
Narrow intervals, where that difference cancels, are integrated directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import log_ndtr

from .errors import BracketError, DegenerateRegionError, ValidationError

__all__ = [
    "TruncationRegion",
    "PivotValue",
    "log_interval_mass",
    "tn_cdf",
    "tn_pivot",
    "tn_interval_bounds",
]

_LN2 = math.log(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# Below this log-ratio of tail masses the log1mexp route loses digits
_NARROW = -0.5
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)

BRACKET_START = 10.0
BRACKET_MAX = 640.0
MAX_ITER = 200
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class TruncationRegion:
    """Sorted union of disjoint closed intervals, endpoints possibly infinite.

    ``v0_slack`` carries the slack of the constraints that do not involve the
    contrast direction; it is informational and does not alter the region.
    An empty ``intervals`` tuple marks an empty region.
    """

    intervals: tuple[tuple[float, float], ...]
    v0_slack: float = math.inf

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        prev_b = -math.inf
        for i, (a, b) in enumerate(ivs):
            if math.isnan(a) or math.isnan(b):
                raise ValidationError("interval endpoints must not be NaN")
            if not a < b:
                raise ValidationError(f"interval {i} is empty: [{a}, {b}]")
            if i > 0 and not a > prev_b:
                raise ValidationError("intervals must be sorted and pairwise disjoint")
            prev_b = b
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def interval(cls, lower=-math.inf, upper=math.inf, v0_slack=math.inf):
        return cls(((lower, upper),), v0_slack)

    @classmethod
    def empty(cls, v0_slack=math.inf):
        return cls((), v0_slack)

    @property
    def is_empty(self) -> bool:
        return len(self.intervals) == 0

    @property
    def lower(self) -> float:
        return self.intervals[0][0] if self.intervals else math.nan

    @property
    def upper(self) -> float:
        return self.intervals[-1][1] if self.intervals else math.nan

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return any(a - tol <= x <= b + tol for a, b in self.intervals)

    def distance_to_boundary(self, x: float) -> float:
        """Distance from ``x`` to the nearest finite endpoint of its interval."""
        for a, b in self.intervals:
            if a <= x <= b:
                return min(x - a, b - x)
        return 0.0

    def __len__(self):
        return len(self.intervals)


class PivotValue(NamedTuple):
    left: float
    two_sided: float


def _log1mexp(d: float) -> float:
    # log(1 - exp(d)) for d <= 0
    if d > -_LN2:
        return math.log(-math.expm1(d))
    return math.log1p(-math.exp(d))


def log_interval_mass(u: float, v: float) -> float:
    """``log(Phi(v) - Phi(u))`` for standardized endpoints ``u <= v``."""
    if not u < v:
        return -math.inf
    if u > 0.0:
        u, v = -v, -u
    lv = float(log_ndtr(v))
    lu = float(log_ndtr(u))
    if lu == -math.inf:
        return lv
    if lu - lv > _NARROW:
        return _narrow_log_mass(u, v)
    return lv + _log1mexp(lu - lv)


def _narrow_log_mass(u, v):
    # u <= 0 here. Factor the density at the point m of [u, v] nearest zero;
    # on such a short range the rest varies by a bounded factor and
    # Gauss-Legendre is exact to rounding.
    m = min(v, 0.0)
    half = 0.5 * (v - u)
    t = 0.5 * (u + v) + half * _GL_NODES
    total = float(np.dot(_GL_WEIGHTS, np.exp(-0.5 * (t - m) * (t + m)))) * half
    return -0.5 * m * m - _LOG_SQRT_2PI + math.log(total)


def _logsumexp(terms: Sequence[float]) -> float:
    finite = [t for t in terms if t > -math.inf]
    if not finite:
        return -math.inf
    m = max(finite)
    return m + math.log(math.fsum(math.exp(t - m) for t in finite))


def _log_cdf_parts(x, mu, sigma, intervals):
    num, den = [], []
    for a, b in intervals:
        u = (a - mu) / sigma
        v = (b - mu) / sigma
        den.append(log_interval_mass(u, v))
        if b <= x:
            num.append(den[-1])
        elif a < x:
            num.append(log_interval_mass(u, (x - mu) / sigma))
    return _logsumexp(num), _logsumexp(den)


def _cdf(x, mu, sigma, intervals):
    log_num, log_den = _log_cdf_parts(x, mu, sigma, intervals)
    if not log_den > -math.inf:
        raise DegenerateRegionError(
            f"truncation region has no mass under N({mu}, {sigma ** 2})"
        )
    if log_num == -math.inf:
        return 0.0
    return min(1.0, math.exp(log_num - log_den))


def _check_args(sigma2, region):
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise ValidationError(f"variance must be positive and finite, got {sigma2}")
    if region.is_empty:
        raise DegenerateRegionError("truncation region is empty")


def tn_cdf(x: float, mu: float, sigma2: float, region: TruncationRegion) -> float:
    """P(Z <= x | Z in region) for Z ~ N(mu, sigma2).

    Points below the region map to 0 and points above it to 1; between two
    intervals the value is the mass of everything to the left.
    """
    _check_args(sigma2, region)
    if not math.isfinite(x):
        raise ValidationError("x must be finite")
    return _cdf(float(x), float(mu), math.sqrt(sigma2), region.intervals)


def tn_pivot(x: float, mu0: float, sigma2: float, region: TruncationRegion) -> PivotValue:
    left = tn_cdf(x, mu0, sigma2, region)
    return PivotValue(left, min(1.0, 2.0 * min(left, 1.0 - left)))


def _solve_mean(x, sigma, intervals, target, unbracketed="raise", outward=math.inf):
    """Find mu with F_mu(x) = target; F_mu(x) is strictly decreasing in mu.

    With ``unbracketed="infinite"`` a root that cannot be bracketed within
    ``BRACKET_MAX * sigma`` of ``x`` is reported as ``outward`` (-inf for a
    lower bound, +inf for an upper one) instead of raising, which can only
    widen the interval.
    """

    def f(mu):
        return _cdf(x, mu, sigma, intervals)

    step = BRACKET_START * sigma
    lo, f_lo = x - step, f(x - step)
    while f_lo < target:
        step *= 2.0
        if step > BRACKET_MAX * sigma:
            if unbracketed == "infinite":
                return outward
            raise BracketError(
                f"pivot stays below {target} down to mu = {lo}",
                pivot_range=(f_lo, f(x + BRACKET_MAX * sigma)),
            )
        lo, f_lo = x - step, f(x - step)

    step = BRACKET_START * sigma
    hi, f_hi = x + step, f(x + step)
    while f_hi > target:
        step *= 2.0
        if step > BRACKET_MAX * sigma:
            if unbracketed == "infinite":
                return outward
            raise BracketError(
                f"pivot stays above {target} up to mu = {hi}",
                pivot_range=(f_lo, f_hi),
            )
        hi, f_hi = x + step, f(x + step)

    mid = 0.5 * (lo + hi)
    res = f(mid) - target
    for _ in range(MAX_ITER):
        if res > 0:
            lo = mid
        else:
            hi = mid
        new_mid = 0.5 * (lo + hi)
        if new_mid == mid or hi - lo <= 1e-13 * (sigma + abs(new_mid)):
            break
        mid = new_mid
        res = f(mid) - target
    if abs(res) > RESIDUAL_TOL:
        raise BracketError(
            f"bisection stalled with pivot residual {res:.3g}", pivot_range=(f_lo, f_hi)
        )
    return mid


def tn_interval_bounds(
    x: float,
    sigma2_eta: float,
    region: TruncationRegion,
    alpha: float,
    unbracketed: str = "raise",
) -> tuple[float, float]:
    """Equal-tailed ``1 - alpha`` confidence interval for the mean of a truncated normal.

    Returns ``(L, U)`` with ``F_L(x) = 1 - alpha/2`` and ``F_U(x) = alpha/2``,
    found by bisection. A bound further than ``BRACKET_MAX`` standard
    deviations from ``x`` raises ``BracketError``; with
    ``unbracketed="infinite"`` it becomes -inf (lower) or +inf (upper).
    """
    if unbracketed not in ("raise", "infinite"):
        raise ValidationError("unbracketed must be 'raise' or 'infinite'")
    _check_args(sigma2_eta, region)
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    if not region.contains(x):
        raise ValidationError(f"x = {x} lies outside the truncation region")
    sigma = math.sqrt(sigma2_eta)
    lower = _solve_mean(float(x), sigma, region.intervals, 1.0 - alpha / 2.0, unbracketed, -math.inf)
    upper = _solve_mean(float(x), sigma, region.intervals, alpha / 2.0, unbracketed, math.inf)
    return lower, upper

