"""Figures written by the CLI report paths.

Everything renders through the Agg backend straight to a file; nothing is
shown interactively.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.stats import norm  # noqa: E402

__all__ = ["plot_intervals", "plot_tnci", "plot_ci_comparison", "plot_pivot_ecdf"]

COLORS = {"sign": "#1f4e9c", "model": "#2e8b57", "ols": "#a0a0a0", "split": "#c8553d"}

RC = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 120,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    # No Software/date metadata, so equal inputs give equal bytes
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def _finite_span(lo, hi, est):
    """Replace infinite endpoints by a visible stand-in just past the data."""
    finite = [v for v in (*lo, *hi, *est) if math.isfinite(v)]
    pad = (max(finite) - min(finite) + 1.0) * 0.25 if finite else 1.0
    left = (min(finite) if finite else 0.0) - pad
    right = (max(finite) if finite else 0.0) + pad
    lo = [v if math.isfinite(v) else left for v in lo]
    hi = [v if math.isfinite(v) else right for v in hi]
    return lo, hi


def plot_intervals(groups: dict, path, title: str = "") -> None:
    """Side-by-side intervals per variable.

    ``groups`` maps a label (``"sign"``, ``"ols"``, ``"split"``...) to a list
    of intervals with ``name``, ``estimate``, ``lower`` and ``upper``.
    Infinite endpoints are drawn as arrows to the plot edge.
    """
    names = []
    for ivs in groups.values():
        for iv in ivs:
            if iv.name not in names:
                names.append(iv.name)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(names) + 2), 4))
        k = len(groups)
        width = 0.7 / max(k, 1)
        allv = [v for ivs in groups.values() for iv in ivs for v in (iv.lower, iv.upper, iv.estimate)]
        lo_all, hi_all = _finite_span(allv, allv, allv)
        span = (min(lo_all), max(hi_all))
        for g, (label, ivs) in enumerate(groups.items()):
            color = COLORS.get(label, f"C{g}")
            for iv in ivs:
                x = names.index(iv.name) - 0.35 + width * (g + 0.5)
                lo = iv.lower if math.isfinite(iv.lower) else span[0]
                hi = iv.upper if math.isfinite(iv.upper) else span[1]
                ax.plot([x, x], [lo, hi], color=color, lw=2,
                        label=label if iv is ivs[0] else None)
                ax.plot(x, iv.estimate, "o", color=color, ms=4)
                if not math.isfinite(iv.lower):
                    ax.annotate("", (x, span[0]), (x, span[0] + 0.05 * (span[1] - span[0])),
                                arrowprops={"arrowstyle": "->", "color": color})
                if not math.isfinite(iv.upper):
                    ax.annotate("", (x, span[1]), (x, span[1] - 0.05 * (span[1] - span[0])),
                                arrowprops={"arrowstyle": "->", "color": color})
        ax.axhline(0, color="k", lw=0.8)
        ax.set_xticks(range(len(names)), names)
        ax.set_ylabel("coefficient")
        if title:
            ax.set_title(title)
        if groups:
            ax.legend(frameon=False)
        _save(fig, path)


def plot_tnci(x, lower, upper, a, b, path, alpha=0.1, sigma=1.0) -> None:
    """Interval endpoints against the observation for a truncated normal."""
    x = np.asarray(x, dtype=float)
    # infinite endpoints leave gaps instead of stretching the axes
    lower = np.where(np.isfinite(lower), lower, np.nan)
    upper = np.where(np.isfinite(upper), upper, np.nan)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        zq = norm.ppf(1 - alpha / 2) * sigma
        ax.plot(x, lower, color=COLORS["sign"], label="truncated")
        ax.plot(x, upper, color=COLORS["sign"])
        ax.plot(x, x - zq, color=COLORS["ols"], ls="--", label="untruncated")
        ax.plot(x, x + zq, color=COLORS["ols"], ls="--")
        ax.set_xlabel("observation x")
        ax.set_ylabel("interval for mu")
        ax.set_title(f"{1 - alpha:.0%} intervals, truncation to [{a:g}, {b:g}]")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_ci_comparison(rows, path, truth=None, max_vars: int = 20, title: str = "") -> None:
    """Sign- and model-conditioned intervals of one replication, one column per variable."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(7, 4))
        modes = sorted({r["mode"] for r in rows}, reverse=True)
        variables = sorted({r["variable"] for r in rows})[:max_vars]
        for m, mode in enumerate(modes):
            sub = [r for r in rows if r["mode"] == mode and r["variable"] in variables]
            lo, hi = _finite_span([r["lower"] for r in sub], [r["upper"] for r in sub],
                                  [r["estimate"] for r in sub])
            for r, l, h in zip(sub, lo, hi):
                x = variables.index(r["variable"]) + (m - 0.5 * (len(modes) - 1)) * 0.25
                ax.plot([x, x], [l, h], color=COLORS.get(mode, f"C{m}"), lw=2,
                        label=mode if r is sub[0] else None)
                ax.plot(x, r["truth"], "k_", ms=8)
        ax.set_xticks(range(len(variables)), [str(v + 1) for v in variables])
        ax.set_xlabel("variable")
        ax.set_ylabel("coefficient")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        _save(fig, path)


def plot_pivot_ecdf(pivots, path, title: str = "") -> None:
    """Empirical CDF of pivots against the uniform diagonal."""
    u = np.sort(np.asarray(pivots, dtype=float))
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4, 4))
        if u.size:
            ax.step(u, np.arange(1, u.size + 1) / u.size, where="post", color=COLORS["sign"])
        ax.plot([0, 1], [0, 1], color="k", lw=0.8, ls="--")
        ax.set_xlabel("pivot")
        ax.set_ylabel("empirical CDF")
        if title:
            ax.set_title(title)
        _save(fig, path)
