"""Closed-loop regret, suboptimality gap and their analytic decompositions.

Two controllers are compared on the same disturbance realization: the fully
informed one (``star``) tightens with the true quantile, the moment-robust
one (``dagger``) with the Cantelli constant.  Quantities are defined as
dagger minus star.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ValidationError
from .lti_model import PredictionMatrices
from .qp import INPUT, STATE, HorizonConstraints, _check_licq

GAP_FLOOR = 1e-14


@dataclass
class ControllerHistory:
    """Realized states, applied inputs and solver outputs of one closed loop."""

    states: np.ndarray
    inputs: np.ndarray
    values: np.ndarray
    active_sets: list
    kind: str
    plans: np.ndarray | None = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        self.active_sets = [tuple(a) for a in self.active_sets]
        k = len(self.values)
        if not (len(self.states) == len(self.inputs) == len(self.active_sets) == k):
            raise ValidationError("history fields must have equal lengths")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("optimal values must be finite")

    def __len__(self):
        return len(self.values)


@dataclass
class RegretSeries:
    closed_loop: np.ndarray
    gap: np.ndarray
    matched_steps: list
    phi_entry: int | None = None


@dataclass
class LambdaTerms:
    L1: np.ndarray
    L2: np.ndarray
    L3: np.ndarray
    L4: np.ndarray
    L5: np.ndarray
    alpha: np.ndarray
    h_tilde: np.ndarray
    gamma: np.ndarray
    V1: np.ndarray = field(repr=False, default=None)
    V2: np.ndarray = field(repr=False, default=None)


def _check_pair(star: ControllerHistory, dagger: ControllerHistory):
    if len(star) != len(dagger):
        raise ValidationError(f"history lengths differ: {len(star)} vs {len(dagger)}")


def stage_costs(history: ControllerHistory, Q, R) -> np.ndarray:
    x, u = history.states, history.inputs
    Q = np.atleast_2d(Q)
    R = np.atleast_2d(R)
    return np.einsum("ki,ij,kj->k", x, Q, x) + np.einsum("ki,ij,kj->k", u, R, u)


def closed_loop_regret(star: ControllerHistory, dagger: ControllerHistory, Q, R) -> np.ndarray:
    """Running sum of realized stage-cost differences, dagger minus star."""
    _check_pair(star, dagger)
    return np.cumsum(stage_costs(dagger, Q, R) - stage_costs(star, Q, R))


def suboptimality_gap(star_values, dagger_values) -> np.ndarray:
    star_values = np.asarray(star_values, dtype=float)
    dagger_values = np.asarray(dagger_values, dtype=float)
    if star_values.shape != dagger_values.shape:
        raise ValidationError("value sequences must align")
    return dagger_values - star_values


def matched_steps(star: ControllerHistory, dagger: ControllerHistory) -> list:
    return [k for k, (a, b) in enumerate(zip(star.active_sets, dagger.active_sets))
            if set(a) == set(b)]


def detect_phi_entry(star: ControllerHistory, dagger: ControllerHistory) -> int | None:
    """First step after which neither controller has an active row."""
    _check_pair(star, dagger)
    entry = None
    for k in range(len(star) - 1, -1, -1):
        if star.active_sets[k] or dagger.active_sets[k]:
            break
        entry = k
    return entry


def regret_series(star: ControllerHistory, dagger: ControllerHistory, Q, R) -> RegretSeries:
    return RegretSeries(
        closed_loop=closed_loop_regret(star, dagger, Q, R),
        gap=suboptimality_gap(star.values, dagger.values),
        matched_steps=matched_steps(star, dagger),
        phi_entry=detect_phi_entry(star, dagger),
    )


def lambda_terms(pred: PredictionMatrices, H, M_act, row_kind_act, FA_act, d_act, g_act) -> LambdaTerms:
    """Coefficient matrices of the matched-active-set gap expression.

    ``M_act`` holds the active rows in ascending order, ``row_kind_act`` their
    kinds, ``FA_act`` the products ``f_i' Abold`` of the active state rows,
    ``d_act`` the active input offsets and ``g_act`` the untightened offsets of
    the active state rows.  ``V`` is split by row kind into ``V1`` (input
    columns) and ``V2`` (state columns).
    """
    H = np.atleast_2d(H)
    fac = cho_factor(H)
    Hinv = cho_solve(fac, np.eye(H.shape[0]))
    h_tilde = 2.0 * pred.Bbold.T @ pred.Qbold @ pred.Abold
    AQA = pred.Abold.T @ pred.Qbold @ pred.Abold
    n = pred.n
    M_act = np.asarray(M_act, dtype=float).reshape(-1, H.shape[0])
    kinds = np.asarray(row_kind_act)
    FA_act = np.asarray(FA_act, dtype=float).reshape(-1, n)
    d_act = np.asarray(d_act, dtype=float).reshape(-1)
    g_act = np.asarray(g_act, dtype=float).reshape(-1)

    if M_act.shape[0] == 0:
        V = np.zeros((H.shape[0], 0))
        VMH = np.zeros_like(Hinv)
    else:
        _check_licq(M_act)
        HM = Hinv @ M_act.T
        V = np.linalg.solve(M_act @ HM, HM.T).T
        VMH = V @ M_act @ Hinv
    V1 = V[:, kinds == INPUT] if kinds.size else V[:, :0]
    V2 = V[:, kinds == STATE] if kinds.size else V[:, :0]
    if V1.shape[1] != d_act.size or V2.shape[1] != g_act.size or FA_act.shape[0] != g_act.size:
        raise ValidationError("active row data does not match row kinds")

    alpha = (VMH - Hinv) @ h_tilde - V2 @ FA_act
    gamma = V1 @ d_act + V2 @ g_act
    L1 = 0.5 * alpha.T @ H @ alpha + 0.5 * (h_tilde.T @ alpha + alpha.T @ h_tilde) + AQA
    L2 = 0.5 * V2.T @ H @ V2
    L3 = 0.5 * (h_tilde.T @ V2 + alpha.T @ H @ V2)
    L4 = h_tilde.T @ gamma + alpha.T @ H @ gamma
    L5 = V2.T @ H @ gamma
    return LambdaTerms(L1, L2, L3, L4, L5, alpha, h_tilde, gamma, V1, V2)


def lambda_terms_for(hc: HorizonConstraints, pred: PredictionMatrices, H, active_set) -> LambdaTerms:
    """Convenience wrapper reading active-row data from assembled constraints."""
    idx = np.asarray(sorted(active_set), dtype=int)
    n_in = hc.n_input
    inp = idx[idx < n_in]
    st = idx[idx >= n_in] - n_in
    kinds = [INPUT if i < n_in else STATE for i in idx]
    return lambda_terms(pred, H, hc.M[idx], kinds, hc.FA[st], hc.d[inp], hc.g[st])


def gap_closed_form(terms: LambdaTerms, x_star, x_dagger, psi_star_act, psi_dagger_act, v_act) -> float:
    """Gap between two value functions sharing one active set."""
    xs = np.asarray(x_star, dtype=float)
    xd = np.asarray(x_dagger, dtype=float)
    v = np.asarray(v_act, dtype=float).reshape(-1)
    ps = np.asarray(psi_star_act, dtype=float).reshape(-1)
    pd = np.asarray(psi_dagger_act, dtype=float).reshape(-1)
    dx, sx = xs - xd, xs + xd
    dpv = (ps - pd) * v
    spv = (ps + pd) * v
    return float(
        -dx @ terms.L1 @ sx
        - dpv @ terms.L2 @ spv
        + dx @ terms.L3 @ spv
        + sx @ terms.L3 @ dpv
        - dx @ terms.L4
        + dpv @ terms.L5
    )


def gap_unconstrained(L1, x_star, x_dagger) -> float:
    xs = np.asarray(x_star, dtype=float)
    xd = np.asarray(x_dagger, dtype=float)
    return float(-(xs - xd) @ np.atleast_2d(L1) @ (xs + xd))


def lqr_lambda1(pred: PredictionMatrices, H) -> np.ndarray:
    h_tilde = 2.0 * pred.Bbold.T @ pred.Qbold @ pred.Abold
    return pred.Abold.T @ pred.Qbold @ pred.Abold - 0.5 * h_tilde.T @ np.linalg.solve(H, h_tilde)


@dataclass
class ConvergenceDiagnostics:
    gap_decay_slope: float | None
    regret_increment_tail_max: float | None
    window: int
    reliable: bool
    converged: bool


def convergence_report(series: RegretSeries, tail: int = 20, min_window: int = 5) -> ConvergenceDiagnostics:
    """Decay rate of ``|gap|`` and size of late regret increments after Phi entry.

    The slope is an ordinary least-squares fit of ``log|gap|`` against the step
    index, over post-entry steps with ``|gap| >= 1e-14``.
    """
    if series.phi_entry is None:
        raise ValidationError("no Phi entry detected; convergence report undefined")
    k0 = series.phi_entry
    gap = np.asarray(series.gap[k0:], dtype=float)
    window = gap.size
    reliable = window >= min_window
    keep = np.abs(gap) >= GAP_FLOOR
    ks = np.arange(k0, k0 + window)[keep]
    slope = None
    converged = not np.any(keep)
    if ks.size >= 2:
        slope = float(np.polyfit(ks, np.log(np.abs(gap[keep])), 1)[0])

    reg = np.asarray(series.closed_loop, dtype=float)
    inc = np.abs(np.diff(reg[k0:])) if reg.size > k0 + 1 else np.zeros(0)
    inc_tail = float(inc[-tail:].max()) if inc.size else None
    return ConvergenceDiagnostics(slope, inc_tail, window, reliable, converged)
