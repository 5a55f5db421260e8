"""Risk allocation and deterministic constraint tightening.

A single chance constraint ``P[f'x > g] <= delta`` on a random vector with
mean ``xbar`` and covariance ``S`` is enforced through

    f' xbar <= g - psi * ||S^{1/2} f||

where ``psi`` is the ``1 - delta`` quantile of the normalized margin when the
distribution is known, and ``sqrt((1 - delta) / delta)`` (the one-sided
Chebyshev / Cantelli bound) when only the first two moments are known.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import ndtri

from .errors import ValidationError

SQRT_EIG_FLOOR = 1e-12


class TighteningMode(str, Enum):
    DR = "dr"
    GAUSSIAN = "gaussian"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class RiskAllocation:
    total: float
    deltas: np.ndarray

    def __post_init__(self):
        deltas = np.asarray(self.deltas, dtype=float).reshape(-1)
        if not 0.0 < self.total <= 0.5:
            raise ValidationError(f"total risk must lie in (0, 0.5], got {self.total}")
        if deltas.size and (np.any(deltas <= 0.0) or np.any(deltas > 0.5)):
            raise ValidationError("every individual risk must lie in (0, 0.5]")
        if deltas.sum() > self.total + 1e-12:
            raise ValidationError("individual risks exceed the total budget")
        deltas.setflags(write=False)
        object.__setattr__(self, "deltas", deltas)


@dataclass(frozen=True)
class TighteningSpec:
    mode: TighteningMode
    psis: np.ndarray
    quantile_samples: int = 0
    # Gaussian constants kept alongside empirical ones for reporting.
    reference_psis: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        psis = np.asarray(self.psis, dtype=float).reshape(-1)
        if not np.all(np.isfinite(psis)) or np.any(psis < 0):
            raise ValidationError("tightening constants must be finite and nonnegative")
        psis.setflags(write=False)
        object.__setattr__(self, "psis", psis)
        object.__setattr__(self, "mode", TighteningMode(self.mode))


def _check_delta(delta):
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0.0)) or np.any(d > 0.5):
        raise ValidationError(f"risk level must lie in (0, 0.5], got {delta}")
    return d


def allocate_uniform(total: float, n_rows: int) -> RiskAllocation:
    """Boole split of ``total`` into ``n_rows`` equal individual risks."""
    if not 0.0 < total <= 0.5:
        raise ValidationError(f"total risk must lie in (0, 0.5], got {total}")
    if n_rows < 1:
        raise ValidationError("need at least one constraint row")
    return RiskAllocation(total, np.full(n_rows, total / n_rows))


def psi_dr(delta):
    """Moment-robust tightening constant ``sqrt((1 - delta) / delta)``."""
    d = _check_delta(delta)
    out = np.sqrt((1.0 - d) / d)
    return float(out) if out.ndim == 0 else out


def psi_gaussian(delta):
    """Standard normal quantile at ``1 - delta``."""
    d = _check_delta(delta)
    # ndtri(1 - d) loses digits for small d; the symmetric form does not.
    out = -ndtri(d)
    out = np.where(d == 0.5, 0.0, out)
    return float(out) if out.ndim == 0 else out


def psi_empirical(samples, delta, min_samples=10_000) -> float:
    """Empirical ``1 - delta`` quantile (linear interpolation of order statistics)."""
    _check_delta(delta)
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size < min_samples:
        raise ValidationError(f"need at least {min_samples} samples, got {samples.size}")
    return float(np.quantile(samples, 1.0 - float(delta), method="linear"))


def psd_sqrt(S) -> np.ndarray:
    """Symmetric PSD square root with tiny negative eigenvalues clamped to zero."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    S = 0.5 * (S + S.T)
    if S.size == 0:
        return S
    vals, vecs = np.linalg.eigh(S)
    scale = max(1.0, float(np.abs(vals).max()))
    if vals.min() < -1e-9 * scale:
        raise ValidationError("covariance is not positive semidefinite")
    vals = np.where(vals < SQRT_EIG_FLOOR, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.T


def spread(F, sigma_x) -> np.ndarray:
    """Row-wise ``||sigma_x^{1/2} f_i||_2`` for the rows of ``F``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    root = psd_sqrt(sigma_x)
    return np.linalg.norm(F @ root, axis=1)


def tighten(F_row, g_row: float, sigma_x, psi: float) -> float:
    if psi < 0:
        raise ValidationError("psi must be nonnegative")
    return float(g_row - psi * spread(np.atleast_2d(F_row), sigma_x)[0])


def tighten_rows(F, g, sigma_x, psis) -> np.ndarray:
    return np.asarray(g, dtype=float) - np.asarray(psis, dtype=float) * spread(F, sigma_x)


def normalized_margin_samples(F, Dbold, sigma_w_stacked, noise_draws) -> np.ndarray:
    """Samples of ``f'(x - xbar) / ||Sigma_x^{1/2} f||`` for every row of ``F``.

    ``noise_draws`` is a ``(samples, N*n)`` array of stacked disturbance
    sequences; the result has shape ``(samples, rows)``.  Rows whose spread is
    zero yield zero columns.
    """
    G = np.atleast_2d(F) @ Dbold
    sd = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", G, sigma_w_stacked, G), 0.0))
    Z = np.asarray(noise_draws) @ G.T
    safe = np.where(sd > 0, sd, 1.0)
    return np.where(sd > 0, Z / safe, 0.0)


def build_tightening(mode, allocation: RiskAllocation, margin_sampler=None,
                     quantile_samples: int = 1_000_000) -> TighteningSpec:
    """Tightening constants for each allocated row.

    ``margin_sampler(n_samples)`` must return an ``(n_samples, rows)`` array of
    normalized constraint margins; it is required for the empirical mode.
    """
    mode = TighteningMode(mode)
    gauss = psi_gaussian(allocation.deltas) if allocation.deltas.size else np.zeros(0)
    if mode is TighteningMode.DR:
        psis = psi_dr(allocation.deltas) if allocation.deltas.size else np.zeros(0)
        return TighteningSpec(mode, psis, reference_psis=np.atleast_1d(gauss))
    if mode is TighteningMode.GAUSSIAN:
        return TighteningSpec(mode, np.atleast_1d(gauss), reference_psis=np.atleast_1d(gauss))
    if margin_sampler is None:
        raise ValidationError("empirical tightening needs a margin sampler")
    Z = margin_sampler(quantile_samples)
    psis = np.array([max(0.0, psi_empirical(Z[:, i], d)) for i, d in enumerate(allocation.deltas)])
    return TighteningSpec(mode, psis, quantile_samples=quantile_samples,
                          reference_psis=np.atleast_1d(gauss))
