"""Dense QP form of the tightened SMPC problem and an active-set solver.

The surrogate problem at state ``x0`` is

    min_u  1/2 u'Hu + h'u + r   s.t.  M u <= b

with ``H = 2(B'QB + R)``, ``h = 2 B'QA x0`` and ``r`` collecting the
``u``-independent cost, including the irreducible covariance term.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, qr

from . import lp
from .errors import ConfigurationError, InfeasibleError, IterationLimitError, LICQError
from .lti_model import PredictionMatrices, stacked_noise_covariance
from .polytope import Polytope
from .tightening import RiskAllocation, TighteningSpec, spread

INPUT = "input"
STATE = "state"
LICQ_RTOL = 1e-10
DUAL_TOL = 1e-9


@dataclass(frozen=True)
class QPData:
    H: np.ndarray
    h: np.ndarray
    r: float
    M: np.ndarray
    b: np.ndarray
    row_kind: tuple = ()

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        h = np.asarray(self.h, dtype=float).reshape(-1)
        M = np.asarray(self.M, dtype=float).reshape(-1, h.size)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if H.shape != (h.size, h.size):
            raise ConfigurationError("H / h dimension mismatch")
        if M.shape[0] != b.size:
            raise ConfigurationError("M / b row count mismatch")
        kinds = tuple(self.row_kind) if self.row_kind else (STATE,) * b.size
        if len(kinds) != b.size:
            raise ConfigurationError("row_kind length mismatch")
        for name, val in (("H", H), ("h", h), ("M", M), ("b", b)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "row_kind", kinds)

    @property
    def n_rows(self) -> int:
        return self.b.size


@dataclass(frozen=True)
class KKTReport:
    stationarity: float
    primal: float
    dual: float
    complementarity: float

    def max(self) -> float:
        return max(self.stationarity, self.primal, self.dual, self.complementarity)

    def ok(self, tol=1e-7) -> bool:
        return self.max() <= tol


@dataclass(frozen=True)
class QPSolution:
    u: np.ndarray
    mu: np.ndarray
    active_set: tuple
    value: float
    iterations: int
    kkt: KKTReport


def evaluate_value(qp: QPData, u) -> float:
    u = np.asarray(u, dtype=float)
    return float(0.5 * u @ qp.H @ u + qp.h @ u + qp.r)


def kkt_residuals(qp: QPData, sol_or_u, mu=None) -> KKTReport:
    """Max-norm residuals of stationarity, primal/dual feasibility and complementarity."""
    if mu is None:
        u, mu = sol_or_u.u, sol_or_u.mu
    else:
        u = sol_or_u
    u = np.asarray(u, dtype=float)
    mu = np.asarray(mu, dtype=float)
    slack = qp.M @ u - qp.b
    stat = qp.H @ u + qp.h + qp.M.T @ mu
    return KKTReport(
        stationarity=float(np.max(np.abs(stat), initial=0.0)),
        primal=float(np.max(np.maximum(slack, 0.0), initial=0.0)),
        dual=float(max(0.0, -np.min(mu, initial=0.0))),
        complementarity=float(np.max(np.abs(mu * slack), initial=0.0)),
    )


def assemble_cost(pred: PredictionMatrices, x0, sigma_w):
    """Return ``(H, h, r)`` such that ``1/2 u'Hu + h'u + r`` equals the expected cost."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != pred.n:
        raise ConfigurationError("x0 dimension mismatch")
    A, B, D, Q, R = pred.Abold, pred.Bbold, pred.Dbold, pred.Qbold, pred.Rbold
    H = 2.0 * (B.T @ Q @ B + R)
    H = 0.5 * (H + H.T)
    h = 2.0 * B.T @ Q @ A @ x0
    Sigma_x = D @ stacked_noise_covariance(sigma_w, pred.N) @ D.T
    r = float(np.trace(Q @ Sigma_x) + x0 @ A.T @ Q @ A @ x0)
    return H, h, r


def stage_rows(F_stage, g_stage, N: int, stages=None):
    """Lift per-stage rows ``F_stage x <= g_stage`` onto the stacked state.

    ``stages`` defaults to ``1..N``; stage 0 is the measured state.
    """
    F_stage = np.atleast_2d(np.asarray(F_stage, dtype=float))
    g_stage = np.asarray(g_stage, dtype=float).reshape(-1)
    n = F_stage.shape[1]
    stages = range(1, N + 1) if stages is None else stages
    F, g = [], []
    for s in stages:
        blk = np.zeros((F_stage.shape[0], (N + 1) * n))
        blk[:, s * n:(s + 1) * n] = F_stage
        F.append(blk)
        g.append(g_stage)
    return np.vstack(F), np.concatenate(g)


@dataclass(frozen=True)
class HorizonConstraints:
    """State-independent part of the stacked constraint set.

    Rows of ``M`` are the input rows ``C`` followed by the kept state rows.
    State rows whose input map ``f' Bbold`` vanishes do not depend on ``u`` and
    are pruned; they are still checked against the current state at assembly.
    """

    C: np.ndarray
    d: np.ndarray
    F: np.ndarray           # kept lifted state rows
    g: np.ndarray
    Fbar: np.ndarray
    FA: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    state_index: np.ndarray  # position of each kept row in the caller's state list
    pruned_FA: np.ndarray
    pruned_offset: np.ndarray  # g - psi * v for pruned rows
    pruned_index: np.ndarray

    @property
    def n_input(self) -> int:
        return self.C.shape[0]

    @property
    def M(self) -> np.ndarray:
        return np.vstack([self.C, self.Fbar])

    @property
    def row_kind(self) -> tuple:
        return (INPUT,) * self.n_input + (STATE,) * self.Fbar.shape[0]

    def offsets(self, x0) -> np.ndarray:
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if self.pruned_FA.shape[0]:
            slack = self.pruned_offset - self.pruned_FA @ x0
            if np.any(slack < 0):
                bad = self.pruned_index[np.flatnonzero(slack < 0)]
                raise InfeasibleError(
                    f"state rows {bad.tolist()} are violated independently of the input",
                    certificate=[("state", int(i)) for i in bad],
                )
        return np.concatenate([self.d, self.g - self.FA @ x0 - self.psi * self.v])

    def qp(self, pred: PredictionMatrices, x0, sigma_w) -> QPData:
        H, h, r = assemble_cost(pred, x0, sigma_w)
        return QPData(H, h, r, self.M, self.offsets(x0), self.row_kind)


def build_horizon_constraints(pred: PredictionMatrices, input_poly: Polytope | None,
                              F, g, psis, sigma_x=None, sigma_w=None,
                              prune_tol=1e-12) -> HorizonConstraints:
    """Precompute normals, spreads ``v_i`` and tightened offsets for every state row."""
    Nm = pred.Bbold.shape[1]
    if sigma_x is None:
        if sigma_w is None:
            raise ConfigurationError("need sigma_x or sigma_w")
        sigma_x = pred.Dbold @ stacked_noise_covariance(sigma_w, pred.N) @ pred.Dbold.T
    F = np.atleast_2d(np.asarray(F, dtype=float))
    g = np.asarray(g, dtype=float).reshape(-1)
    psis = np.asarray(psis, dtype=float).reshape(-1)
    if F.shape[0] != g.size or psis.size != g.size:
        raise ConfigurationError("state rows, offsets and tightening constants must align")
    if F.shape[1] != pred.Abold.shape[0]:
        raise ConfigurationError("state rows must act on the stacked state")
    if input_poly is None:
        C, d = np.zeros((0, Nm)), np.zeros(0)
    else:
        if input_poly.dim != Nm:
            raise ConfigurationError("input polytope must act on the stacked input")
        C, d = input_poly.F, input_poly.g

    v = spread(F, sigma_x) if F.shape[0] else np.zeros(0)
    Fbar = F @ pred.Bbold
    FA = F @ pred.Abold
    scale = max(1.0, float(np.abs(F).max(initial=0.0)))
    keep = np.linalg.norm(Fbar, axis=1) > prune_tol * scale
    drop = ~keep
    return HorizonConstraints(
        C=C, d=d, F=F[keep], g=g[keep], Fbar=Fbar[keep], FA=FA[keep], v=v[keep], psi=psis[keep],
        state_index=np.flatnonzero(keep), pruned_FA=FA[drop],
        pruned_offset=g[drop] - psis[drop] * v[drop], pruned_index=np.flatnonzero(drop),
    )


def assemble_constraints(pred: PredictionMatrices, input_poly: Polytope | None, state_rows,
                         tightening: TighteningSpec, allocation: RiskAllocation | None,
                         x0, sigma_x):
    """Stacked ``(M, b, row_kind)`` with input rows first, then tightened state rows."""
    F, g = state_rows
    if allocation is not None and allocation.deltas.size != tightening.psis.size:
        raise ConfigurationError("allocation and tightening constants must align")
    hc = build_horizon_constraints(pred, input_poly, F, g, tightening.psis, sigma_x=sigma_x)
    return hc.M, hc.offsets(x0), hc.row_kind


def _check_licq(Mact: np.ndarray) -> None:
    if Mact.shape[0] == 0:
        return
    if Mact.shape[0] > Mact.shape[1]:
        raise LICQError(f"{Mact.shape[0]} active rows exceed {Mact.shape[1]} variables")
    R = qr(Mact.T, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(R))
    if diag.min() <= LICQ_RTOL * max(np.linalg.norm(Mact), 1e-300):
        raise LICQError("active constraint normals are linearly dependent")


def solve_equality_kkt(H, h, Mact, bact, H_factor=None):
    """Closed-form solution of ``min 1/2 u'Hu + h'u  s.t.  Mact u = bact``.

    ``u = (V Mact H^-1 - H^-1) h + V bact`` with
    ``V = H^-1 Mact' (Mact H^-1 Mact')^-1``; the multipliers satisfy
    ``H u + h + Mact' mu = 0``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    h = np.asarray(h, dtype=float).reshape(-1)
    Mact = np.asarray(Mact, dtype=float).reshape(-1, h.size)
    bact = np.asarray(bact, dtype=float).reshape(-1)
    fac = H_factor if H_factor is not None else cho_factor(H)
    Hinv_h = cho_solve(fac, h)
    if Mact.shape[0] == 0:
        return -Hinv_h, np.zeros(0)
    _check_licq(Mact)
    Hinv_Mt = cho_solve(fac, Mact.T)
    S = Mact @ Hinv_Mt
    V = np.linalg.solve(S, Hinv_Mt.T).T
    u = V @ (Mact @ Hinv_h) - Hinv_h + V @ bact
    mu = -np.linalg.solve(S, bact + Mact @ Hinv_h)
    return u, mu


def solve_active_set(qp: QPData, warm_start=None, max_iter=None) -> QPSolution:
    """Dual active-set method (Goldfarb-Idnani) for strictly convex QPs.

    Starts from the unconstrained minimizer, or from ``warm_start`` after
    dropping rows with negative multipliers, then repeatedly adds the most
    violated row.  While a row is being added, working rows whose multipliers
    would turn negative are dropped.  Ties go to the lowest row index.  The
    final iterate is recomputed from the closed-form equality solution on the
    returned active set.
    """
    H, h, M, b = qp.H, qp.h, qp.M, qp.b
    n_rows = qp.n_rows
    try:
        fac = cho_factor(H)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("H is not positive definite") from exc
    Hinv = cho_solve(fac, np.eye(h.size))
    primal_tol = 1e-9 * (1.0 + np.max(np.abs(b), initial=0.0))
    cap = 50 * max(n_rows, 1)
    iterations = 0

    W: list[int] = []
    mu_W = np.zeros(0)
    u = -Hinv @ h
    if warm_start:
        W = sorted({int(i) for i in warm_start if 0 <= int(i) < n_rows})
        while W:
            try:
                u, mu_W = solve_equality_kkt(H, h, M[W], b[W], fac)
            except LICQError:
                W, mu_W = [], np.zeros(0)
                u = -Hinv @ h
                break
            j = int(np.argmin(mu_W))
            if mu_W[j] >= -DUAL_TOL:
                break
            iterations += 1
            del W[j]
        if not W:
            u, mu_W = -Hinv @ h, np.zeros(0)

    while True:
        viol = M @ u - b if n_rows else np.zeros(0)
        if W:
            viol[W] = -np.inf
        if n_rows == 0 or np.max(viol) <= primal_tol:
            break
        p = int(np.argmax(viol))
        n_p = M[p]
        t_acc = 0.0
        while True:
            iterations += 1
            if iterations > cap:
                raise IterationLimitError(f"active-set iteration cap {cap} exceeded")
            Hn = Hinv @ n_p
            if W:
                N = M[W]
                S = N @ Hinv @ N.T
                r = np.linalg.solve(S, N @ Hn)
                z = Hn - Hinv @ N.T @ r
            else:
                r = np.zeros(0)
                z = Hn
            nz = float(n_p @ z)
            s_p = float(n_p @ u - b[p])
            t1 = s_p / nz if nz > 1e-12 * float(n_p @ Hn) else np.inf
            t2, block = np.inf, -1
            for j in range(len(W)):
                if r[j] > 1e-12:
                    ratio = mu_W[j] / r[j]
                    if ratio < t2 or (ratio == t2 and W[j] < W[block]):
                        t2, block = ratio, j
            if not np.isfinite(t1) and not np.isfinite(t2):
                cert = sorted(W + [p])
                if lp.is_feasible(M[cert], b[cert]) and lp.is_feasible(M, b):
                    raise IterationLimitError("numerical breakdown while adding a dependent row")
                raise InfeasibleError("QP constraints are infeasible", certificate=cert)
            if t2 < t1:
                if np.isfinite(t1):
                    u = u - t2 * z
                mu_W = mu_W - t2 * r
                t_acc += t2
                del W[block]
                mu_W = np.delete(mu_W, block)
                continue
            u = u - t1 * z
            mu_W = np.append(mu_W - t1 * r, t_acc + t1)
            W.append(p)
            break

    active = tuple(sorted(W))
    idx = list(active)
    u, mu_act = solve_equality_kkt(H, h, M[idx], b[idx], fac)
    mu = np.zeros(n_rows)
    mu[idx] = mu_act
    report = kkt_residuals(qp, u, mu)
    return QPSolution(u=u, mu=mu, active_set=active, value=evaluate_value(qp, u),
                      iterations=iterations, kkt=report)
