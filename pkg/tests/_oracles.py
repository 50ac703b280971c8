"""Independent reference computations used by the tests.

None of these share code with the package: the truncated-normal CDF is done
by mpmath quadrature, sampling by plain rejection, and selection regions by
re-solving the lasso along a line.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np
from scipy.optimize import minimize


def mp_tn_cdf(x, mu, sigma, intervals, dps=40):
    """P(Z <= x | Z in union of intervals), Z ~ N(mu, sigma^2), by quadrature."""
    with mp.workdps(dps):

        def std(v):
            if v == math.inf:
                return mp.inf
            if v == -math.inf:
                return -mp.inf
            return (mp.mpf(v) - mu) / sigma

        num = mp.mpf(0)
        den = mp.mpf(0)
        xs = std(x)
        for a, b in intervals:
            u, v = std(a), std(b)
            mass = _mass(u, v)
            den += mass
            if b <= x:
                num += mass
            elif a < x:
                num += _mass(u, xs)
        return num / den


def _mass(u, v):
    """Integral of exp(-t^2/2) over [u, v].

    The density is factored at the point of the range nearest zero and the
    range is split geometrically on the 1/|t| scale the tail decays over, so
    the tanh-sinh nodes stay accurate tens of standard deviations out.
    """
    if u >= v:
        return mp.mpf(0)
    if u < 0 < v:
        return _mass(u, mp.mpf(0)) + _mass(mp.mpf(0), v)
    if v <= 0:
        u, v = -v, -u
    m = u  # 0 <= u < v, density largest at u
    step = 1 / (4 * max(mp.mpf(1), m))
    pts = [u]
    while pts[-1] + step < v and step < 64:
        pts.append(pts[-1] + step)
        step *= 2
    pts.append(v)
    shifted = mp.quad(lambda t: mp.exp(-(t - m) * (t + m) / 2), pts)
    return mp.exp(-m * m / 2) * shifted


def random_tn_case(rng):
    """A random ``(x, mu, sigma, intervals)`` mixing moderate and far-tail regions."""
    sigma = float(10 ** rng.uniform(-1, 1))
    mu = float(rng.uniform(-5, 5))
    kind = rng.integers(4)
    k = int(rng.integers(1, 4))
    if kind == 0:
        # moderate region near the mean
        cuts = np.sort(rng.uniform(-4, 4, 2 * k))
    elif kind == 1:
        # entirely beyond 30 sd on one side
        side = rng.choice([-1.0, 1.0])
        cuts = np.sort(side * rng.uniform(30, 45, 2 * k))
    elif kind == 2:
        # straddles the bulk and a far tail
        cuts = np.sort(np.concatenate([rng.uniform(-3, 3, 2 * k - 1), [rng.uniform(31, 40)]]))
    else:
        cuts = np.sort(rng.uniform(-6, 6, 2 * k))
    cuts = list(mu + sigma * cuts)
    if kind == 3:
        cuts[0], cuts[-1] = -math.inf, math.inf
    intervals = [(cuts[2 * i], cuts[2 * i + 1]) for i in range(k)]
    intervals = [iv for iv in intervals if iv[1] - iv[0] > 1e-6 * sigma] or [(mu - sigma, mu + sigma)]
    a, b = intervals[int(rng.integers(len(intervals)))]
    lo = a if math.isfinite(a) else b - 6 * sigma
    hi = b if math.isfinite(b) else a + 6 * sigma
    if not math.isfinite(lo) and not math.isfinite(hi):
        lo, hi = mu - 6 * sigma, mu + 6 * sigma
    x = float(rng.uniform(lo, hi))
    return x, mu, sigma, intervals


def rejection_sample_tn(rng, mu, sigma, intervals, size, batch=100_000):
    """Draws from N(mu, sigma^2) restricted to the intervals, by rejection."""
    out = []
    have = 0
    while have < size:
        z = rng.normal(mu, sigma, batch)
        keep = np.zeros(batch, dtype=bool)
        for a, b in intervals:
            keep |= (z >= a) & (z <= b)
        out.append(z[keep])
        have += int(keep.sum())
    return np.concatenate(out)[:size]


def lasso_by_scipy(X, y, lam, gamma=0.0):
    """Lasso/elastic-net fit through the smooth split ``beta = u - v`` with L-BFGS-B."""
    X = np.asarray(X, dtype=float)
    p = X.shape[1]

    def f(w):
        u, v = w[:p], w[p:]
        b = u - v
        r = y - X @ b
        val = 0.5 * r @ r + lam * w.sum() + 0.5 * gamma * b @ b
        g = -X.T @ r + gamma * b
        return val, np.concatenate([g + lam, -g + lam])

    res = minimize(f, np.zeros(2 * p), jac=True, method="L-BFGS-B",
                   bounds=[(0, None)] * (2 * p), options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10_000})
    return res.x[:p] - res.x[p:]


def selection_along_line(select, z, c, t_lo, t_hi, target, n_grid=2001, refine=60):
    """Sub-intervals of ``[t_lo, t_hi]`` where ``select(z + c t) == target``.

    ``select`` maps a response vector to a hashable selection outcome.
    Transitions found on the grid are refined by bisection.
    """
    ts = np.linspace(t_lo, t_hi, n_grid)
    hits = [select(z + c * t) == target for t in ts]

    def edge(t0, t1, inside_at_t0):
        for _ in range(refine):
            m = 0.5 * (t0 + t1)
            if (select(z + c * m) == target) == inside_at_t0:
                t0 = m
            else:
                t1 = m
        return 0.5 * (t0 + t1)

    pieces = []
    start = ts[0] if hits[0] else None
    for i in range(1, n_grid):
        if hits[i] and not hits[i - 1]:
            start = edge(ts[i - 1], ts[i], False)
        elif hits[i - 1] and not hits[i]:
            pieces.append((start, edge(ts[i - 1], ts[i], True)))
            start = None
    if start is not None:
        pieces.append((start, ts[-1]))
    return pieces
