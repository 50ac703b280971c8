"""Restriction of a selection polyhedron to the line through ``y`` along a contrast.

Writing ``y = c * (eta^T y) + z`` with ``z`` independent of ``eta^T y``, the
constraint set ``{A y <= b}`` becomes an interval for ``eta^T y`` whose
endpoints depend on ``z`` only, plus a sign condition on the rows that do
not involve ``eta^T y`` at all.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InternalInconsistencyError, ValidationError
from .selection import SelectionPolyhedron
from .truncnorm import TruncationRegion

__all__ = ["ContrastDecomposition", "decompose", "truncation_limits", "union_region"]

ZERO_TOL_FACTOR = 1e-11
MERGE_TOL = 1e-12


@dataclass(frozen=True)
class ContrastDecomposition:
    eta: np.ndarray
    sigma2: float | np.ndarray
    c: np.ndarray
    z: np.ndarray
    eta_y: float
    var_eta: float

    @property
    def sd_eta(self) -> float:
        return math.sqrt(self.var_eta)


def decompose(y, eta, Sigma=1.0) -> ContrastDecomposition:
    """Split ``y`` into ``eta^T y`` and the independent remainder ``z``.

    ``Sigma`` is either a scalar noise variance (``Sigma * I``) or a full
    ``n x n`` covariance matrix.
    """
    y = np.asarray(y, dtype=float).ravel()
    eta = np.asarray(eta, dtype=float).ravel()
    if eta.shape != y.shape:
        raise ValidationError(f"eta has shape {eta.shape}, y has shape {y.shape}")
    if not np.any(eta):
        raise ValidationError("contrast eta must be nonzero")
    if np.ndim(Sigma) == 0:
        if not float(Sigma) > 0:
            raise ValidationError("noise variance must be positive")
        Sigma_eta = float(Sigma) * eta
    else:
        Sigma = np.asarray(Sigma, dtype=float)
        if Sigma.shape != (y.size, y.size):
            raise ValidationError(f"covariance must be {y.size} x {y.size}")
        Sigma_eta = Sigma @ eta
    var_eta = float(eta @ Sigma_eta)
    if not var_eta > 0:
        raise ValidationError(f"eta^T Sigma eta = {var_eta} is not positive")
    c = Sigma_eta / var_eta
    eta_y = float(eta @ y)
    z = y - c * eta_y
    return ContrastDecomposition(eta, Sigma, c, z, eta_y, var_eta)


def _default_zero_tol(A, c):
    return ZERO_TOL_FACTOR * float(np.max(np.abs(A), initial=0.0)) * float(np.max(np.abs(c)))


def truncation_limits(
    poly: SelectionPolyhedron, dec: ContrastDecomposition, zero_tol: float | None = None
) -> TruncationRegion:
    """Interval ``[V-, V+]`` of values of ``eta^T y`` that keep ``y`` in ``poly``.

    Returns an empty region when the line misses the polyhedron, either
    because ``V- > V+`` or because a row that does not depend on ``eta^T y``
    is violated (``V0 < 0``).
    """
    A, b = poly.A, poly.b
    if A.shape[1] != dec.c.size:
        raise ValidationError(f"polyhedron has {A.shape[1]} columns, response has {dec.c.size}")
    if zero_tol is None:
        zero_tol = _default_zero_tol(A, dec.c)
    Ac = A @ dec.c
    resid = b - A @ dec.z
    neg = Ac < -zero_tol
    pos = Ac > zero_tol
    flat = ~(neg | pos)
    v_minus = float(np.max(resid[neg] / Ac[neg])) if neg.any() else -math.inf
    v_plus = float(np.min(resid[pos] / Ac[pos])) if pos.any() else math.inf
    v_zero = float(np.min(resid[flat])) if flat.any() else math.inf
    if v_zero < 0 or not v_minus < v_plus:
        return TruncationRegion.empty(v_zero)
    return TruncationRegion.interval(v_minus, v_plus, v_zero)


def union_region(polys, dec: ContrastDecomposition, zero_tol: float | None = None):
    """Merged union of the per-polyhedron truncation intervals."""
    pieces = []
    v0 = math.inf
    for poly in polys:
        r = truncation_limits(poly, dec, zero_tol)
        if not r.is_empty:
            pieces.append(r.intervals[0])
            v0 = min(v0, r.v0_slack)
    if not pieces:
        raise InternalInconsistencyError(
            "no sign pattern intersects the line through y; the observed event must contribute"
        )
    pieces.sort()
    tol = MERGE_TOL * dec.sd_eta
    merged = [list(pieces[0])]
    for a, b in pieces[1:]:
        if a <= merged[-1][1] + tol:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return TruncationRegion(tuple(map(tuple, merged)), v0)


def observed_region_check(region: TruncationRegion, dec: ContrastDecomposition, tol=1e-9):
    """Confirm ``eta^T y`` lies in the region; nudge it inside if it sits on an edge.

    Returns the (possibly clamped) observation. Raises when the observed point
    is clearly outside, which signals a solver/polyhedron mismatch.
    """
    x = dec.eta_y
    if region.is_empty or region.v0_slack < -tol:
        raise InternalInconsistencyError(
            f"observed response violates its own selection event (V0 = {region.v0_slack:.3g})"
        )
    if region.contains(x):
        inner = region.distance_to_boundary(x)
        nudge = MERGE_TOL * dec.sd_eta
        if inner >= nudge:
            return x
    scale = tol * max(1.0, abs(x), dec.sd_eta)
    for a, b in region.intervals:
        if a - scale <= x <= b + scale:
            nudge = min(MERGE_TOL * dec.sd_eta, 0.5 * (b - a))
            clamped = min(max(x, a + nudge), b - nudge)
            warnings.warn(
                f"eta^T y = {x!r} sits on a truncation endpoint; moved to {clamped!r}",
                stacklevel=2,
            )
            return clamped
    raise InternalInconsistencyError(
        f"eta^T y = {x:.6g} lies outside the truncation region {region.intervals}"
    )
