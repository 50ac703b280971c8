"""Affine description ``{A y <= b}`` of the lasso selection event.

For a candidate model ``M`` with signs ``s`` the event splits into

* two rows per inactive variable, ``|u_k| <= 1`` where ``u`` is the inactive
  subgradient, an affine function of ``y``;
* one row per active variable, ``s_j w_j >= 0`` where ``w`` is the
  active-set coefficient vector.

With ``gamma > 0`` the inverse Gram matrix is replaced by
``(X_M^T X_M + gamma I)^{-1}`` throughout, which covers the elastic net.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, UnsupportedConfigurationError, ValidationError
from .lasso import PenaltySpec, SolverOptions, as_array, check_gram_conditioning, solve

__all__ = [
    "SelectionPolyhedron",
    "build_polyhedron",
    "membership_oracle",
    "enumerate_sign_polyhedra",
    "MODEL_CAP",
]

MODEL_CAP = 15
MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class SelectionPolyhedron:
    A: np.ndarray
    b: np.ndarray
    row_tags: tuple[tuple[str, int], ...]
    model: tuple[int, ...]
    signs: tuple[int, ...]
    penalty: PenaltySpec

    def slack(self, y) -> np.ndarray:
        return self.b - self.A @ np.asarray(y, dtype=float)

    def contains(self, y, tol: float = MEMBERSHIP_TOL) -> bool:
        return bool(np.all(self.slack(y) >= -tol))

    def binding_rows(self, y, k: int = 3):
        """Tags of the ``k`` rows with the smallest slack at ``y``."""
        order = np.argsort(self.slack(y))[:k]
        return [self.row_tags[i] for i in order]

    def to_csv(self, path) -> None:
        """Debug dump: one row per constraint with its tag, column and ``b``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tag", "column", "b"] + [f"a{i}" for i in range(self.A.shape[1])])
            for (tag, col), row, bi in zip(self.row_tags, self.A, self.b):
                w.writerow([tag, col, repr(float(bi))] + [repr(float(v)) for v in row])


def _validate_model(X, M, penalty):
    n, p = X.shape
    M = tuple(int(j) for j in M)
    if len(M) == 0:
        raise UnsupportedConfigurationError("the null-model event is not a polyhedron of this form")
    if penalty.lam <= 0:
        raise UnsupportedConfigurationError("lambda must be positive to define a selection event")
    if len(set(M)) != len(M) or min(M) < 0 or max(M) >= p:
        raise ValidationError(f"invalid model {M} for p = {p}")
    return M


class _ModelBasis:
    """Sign-independent pieces of the polyhedron for one model."""

    def __init__(self, X, M, penalty):
        p = X.shape[1]
        self.M = M
        self.penalty = penalty
        self.inactive = [j for j in range(p) if j not in set(M)]
        XM = X[:, list(M)]
        self.G = check_gram_conditioning(X, M, penalty.gamma)
        self.Ginv_XMt = np.linalg.solve(self.G, XM.T)  # |M| x n
        if self.inactive:
            Xi = X[:, self.inactive]
            cross = Xi.T @ XM
            self.resid_op = Xi.T - cross @ self.Ginv_XMt  # X_{-M}^T (I - P_M)
            self.shift_op = np.linalg.solve(self.G, cross.T).T  # X_{-M}^T (X_M^T)^+
        self.tags = (
            tuple(("inactive+", j) for j in self.inactive)
            + tuple(("inactive-", j) for j in self.inactive)
            + tuple(("active", j) for j in M)
        )

    def polyhedron(self, s):
        lam = self.penalty.lam
        A1 = -s[:, None] * self.Ginv_XMt
        b1 = -lam * s * np.linalg.solve(self.G, s)
        if self.inactive:
            shift = self.shift_op @ s
            A = np.vstack([self.resid_op / lam, -self.resid_op / lam, A1])
            b = np.concatenate([1.0 - shift, 1.0 + shift, b1])
        else:
            A, b = A1, b1
        A.setflags(write=False)
        b.setflags(write=False)
        return SelectionPolyhedron(
            A, b, self.tags, self.M, tuple(int(v) for v in s), self.penalty
        )


def build_polyhedron(X, M: Sequence[int], s, penalty: PenaltySpec) -> SelectionPolyhedron:
    X = as_array(X)
    M = _validate_model(X, M, penalty)
    s = np.asarray(s, dtype=float).ravel()
    if s.shape != (len(M),) or not np.all(np.abs(s) == 1):
        raise ValidationError("signs must be a +/-1 vector with one entry per model variable")
    return _ModelBasis(X, M, penalty).polyhedron(s)


def membership_oracle(X, y, penalty: PenaltySpec, opts: SolverOptions | None = None):
    """Selected ``(M, s)`` at ``y`` by direct solve, or ``None`` for the null model."""
    if penalty.lam <= 0:
        raise UnsupportedConfigurationError("lambda must be positive")
    sol = solve(X, y, penalty, opts)
    if sol.is_null:
        return None
    return sol.model, tuple(int(v) for v in sol.signs)


def enumerate_sign_polyhedra(X, M: Sequence[int], penalty: PenaltySpec, cap: int = MODEL_CAP):
    """One polyhedron per sign pattern of ``M``, infeasible patterns included."""
    X = as_array(X)
    M = _validate_model(X, M, penalty)
    if len(M) > cap:
        raise CapacityError(
            f"|M| = {len(M)} exceeds the enumeration cap {cap}; use sign-conditioned mode"
        )
    basis = _ModelBasis(X, M, penalty)
    return [
        basis.polyhedron(np.array(signs, dtype=float))
        for signs in itertools.product((1.0, -1.0), repeat=len(M))
    ]
