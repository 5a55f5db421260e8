"""Dense two-phase tableau simplex for small inequality-form LPs.

Solves ``min c'x  s.t.  A x <= b`` with free variables.  Bland's rule is
used for both entering and leaving choices, so the method cannot cycle.
Problem sizes here are a few dozen rows at most.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    value: float
    iterations: int = 0


class _Tableau:
    def __init__(self, T, basis, tol):
        self.T = T            # rows: constraints, last column: rhs
        self.basis = basis
        self.tol = tol
        self.iterations = 0

    def pivot(self, row, col):
        T = self.T
        T[row] /= T[row, col]
        for i in range(T.shape[0]):
            if i != row and T[i, col] != 0.0:
                T[i] -= T[i, col] * T[row]
        self.basis[row] = col
        self.iterations += 1

    def run(self, cost, allowed, max_iter):
        """Minimize ``cost`` over columns in ``allowed``; returns status."""
        T, tol = self.T, self.tol
        m = T.shape[0]
        for _ in range(max_iter):
            cb = cost[self.basis]
            reduced = cost[:-1] - cb @ T[:, :-1]
            entering = -1
            for j in np.flatnonzero(allowed):
                if reduced[j] < -tol:
                    entering = j
                    break
            if entering < 0:
                return OPTIMAL
            col = T[:, entering]
            best_ratio, leave = np.inf, -1
            for i in range(m):
                if col[i] > tol:
                    ratio = T[i, -1] / col[i]
                    if ratio < best_ratio - tol or (
                        abs(ratio - best_ratio) <= tol and self.basis[i] < self.basis[leave]
                    ):
                        best_ratio, leave = ratio, i
            if leave < 0:
                return UNBOUNDED
            self.pivot(leave, entering)
        raise RuntimeError("simplex iteration limit reached")


def linprog(c, A, b, tol=1e-9, max_iter=10_000) -> LPResult:
    """Minimize ``c'x`` subject to ``A x <= b`` (``x`` unrestricted in sign)."""
    c = np.asarray(c, dtype=float).reshape(-1)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    r, d = A.shape
    if c.size != d or b.size != r:
        raise ValueError("LP dimension mismatch")
    if r == 0:
        if np.any(c != 0):
            return LPResult(UNBOUNDED, None, -np.inf)
        return LPResult(OPTIMAL, np.zeros(d), 0.0)

    neg = b < 0
    n_art = int(neg.sum())
    n_cols = 2 * d + r + n_art
    T = np.zeros((r, n_cols + 1))
    sign = np.where(neg, -1.0, 1.0)
    T[:, :d] = A * sign[:, None]
    T[:, d:2 * d] = -A * sign[:, None]
    T[:, 2 * d:2 * d + r] = np.diag(sign)
    T[:, -1] = b * sign
    basis = np.empty(r, dtype=int)
    art = 0
    for i in range(r):
        if neg[i]:
            T[i, 2 * d + r + art] = 1.0
            basis[i] = 2 * d + r + art
            art += 1
        else:
            basis[i] = 2 * d + i
    tab = _Tableau(T, basis, tol)

    allowed = np.ones(n_cols, dtype=bool)
    if n_art:
        phase1 = np.zeros(n_cols + 1)
        phase1[2 * d + r:n_cols] = 1.0
        tab.run(phase1, allowed, max_iter)
        if phase1[tab.basis] @ tab.T[:, -1] > tol * max(1.0, np.abs(b).max()):
            return LPResult(INFEASIBLE, None, np.nan, tab.iterations)
        # drive remaining artificials out of the basis
        keep = []
        for i in range(r):
            if tab.basis[i] >= 2 * d + r:
                cols = np.flatnonzero(np.abs(tab.T[i, :2 * d + r]) > tol)
                if cols.size:
                    tab.pivot(i, cols[0])
                    keep.append(i)
            else:
                keep.append(i)
        tab.T = tab.T[keep]
        tab.basis = tab.basis[keep]
        allowed[2 * d + r:] = False
        tab.T[:, 2 * d + r:n_cols] = 0.0

    cost = np.zeros(n_cols + 1)
    cost[:d] = c
    cost[d:2 * d] = -c
    status = tab.run(cost, allowed, max_iter)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, None, -np.inf, tab.iterations)
    z = np.zeros(n_cols)
    z[tab.basis] = tab.T[:, -1]
    x = z[:d] - z[d:2 * d]
    return LPResult(OPTIMAL, x, float(c @ x), tab.iterations)


def is_feasible(A, b, tol=1e-9) -> bool:
    """Phase-1 feasibility test for ``A x <= b``."""
    A = np.atleast_2d(A)
    return linprog(np.zeros(A.shape[1]), A, b, tol=tol).status != INFEASIBLE
