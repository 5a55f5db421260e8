"""Exact versus moment-robust tightened sets and the volume of their erosion."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ValidationError
from .polytope import Polytope, VolumeEstimate, erode, volume
from .tightening import RiskAllocation, TighteningMode, psi_dr, psi_gaussian, spread


def tightened_pair(F, g, sigma_x, allocation: RiskAllocation, mode="gaussian", exact_psis=None):
    """Return ``(X_True, X_DR)`` sharing the normals ``F``.

    ``exact_psis`` overrides the Gaussian quantiles (e.g. with empirical
    quantiles for non-Gaussian noise).
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    g = np.asarray(g, dtype=float).reshape(-1)
    if allocation.deltas.size != g.size:
        raise ValidationError("allocation must provide one risk per row")
    v = spread(F, sigma_x)
    if exact_psis is None:
        if TighteningMode(mode) is not TighteningMode.GAUSSIAN:
            raise ValidationError("non-Gaussian exact tightening needs explicit constants")
        exact_psis = psi_gaussian(allocation.deltas)
    exact_psis = np.asarray(exact_psis, dtype=float).reshape(-1)
    g_true = g - exact_psis * v
    g_dr = g - psi_dr(allocation.deltas) * v
    return Polytope(F, g_true), Polytope(F, g_dr)


def build_lifted_diff(F, g_true, g_dr) -> Polytope:
    """Lifted representation ``{(x1, x2) | F x1 + F x2 <= g_true, F x2 <= g_dr}``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    g_true = np.asarray(g_true, dtype=float).reshape(-1)
    g_dr = np.asarray(g_dr, dtype=float).reshape(-1)
    if g_true.size != F.shape[0] or g_dr.size != F.shape[0]:
        raise ValidationError("offset vectors must match the rows of F")
    H = np.block([[F, F], [np.zeros_like(F), F]])
    return Polytope(H, np.concatenate([g_true, g_dr]))


@dataclass
class ConservatismResult:
    estimate: VolumeEstimate
    X_true: Polytope = field(repr=False)
    X_dr: Polytope = field(repr=False)
    eroded: Polytope = field(repr=False)
    flags: list = field(default_factory=list)

    @property
    def value(self) -> float:
        return self.estimate.value

    def to_dict(self) -> dict:
        est = asdict(self.estimate)
        return {"value": est["value"], "std_error": est["std_error"], "method": est["method"],
                "samples": est["samples"], "flags": list(self.flags) + list(est["warnings"])}


def conservatism(F, g, sigma_x, allocation: RiskAllocation, mode="gaussian", exact_psis=None,
                 n_samples: int = 1_000_000, seed: int = 0) -> ConservatismResult:
    """Volume of ``X_True`` eroded by ``X_DR``.

    When ``X_DR`` is empty the erosion is ``X_True`` itself and the result is
    flagged ``subtrahend_empty``.
    """
    X_true, X_dr = tightened_pair(F, g, sigma_x, allocation, mode, exact_psis)
    res = erode(X_true, X_dr, with_flags=True)
    flags = []
    if res.subtrahend_empty:
        flags.append("subtrahend_empty")
    if res.unbounded_rows:
        flags.append("unbounded_support")
    est = volume(res.polytope, n_samples=n_samples, seed=seed)
    return ConservatismResult(est, X_true, X_dr, res.polytope, flags)
