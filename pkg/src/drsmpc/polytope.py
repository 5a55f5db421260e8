"""H-representation polytopes: support function, erosion, Chebyshev ball, volume."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .errors import EmptySetError, ValidationError

MC_DIM_WARN = 8


@dataclass(frozen=True)
class Polytope:
    """The set ``{x | F x <= g}``."""

    F: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        g = np.asarray(self.g, dtype=float).reshape(-1)
        if F.shape[0] != g.size:
            raise ValidationError(f"F has {F.shape[0]} rows but g has {g.size}")
        if F.shape[0] < 1:
            raise ValidationError("a polytope needs at least one row")
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(g) | (g == -np.inf))):
            raise ValidationError("polytope data must be finite")
        F.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "g", g)

    @property
    def dim(self) -> int:
        return self.F.shape[1]

    @property
    def n_rows(self) -> int:
        return self.F.shape[0]

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.F.T <= self.g + tol, axis=-1)

    def intersect(self, other: "Polytope") -> "Polytope":
        return Polytope(np.vstack([self.F, other.F]), np.concatenate([self.g, other.g]))

    def is_empty(self) -> bool:
        return chebyshev_center(self)[1] < 0


def box(lo, hi) -> Polytope:
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    d = lo.size
    return Polytope(np.vstack([np.eye(d), -np.eye(d)]), np.concatenate([hi, -lo]))


def support_value(poly: Polytope, direction) -> float:
    """``sup { d'x | x in poly }``; ``+inf`` when unbounded in that direction."""
    direction = np.asarray(direction, dtype=float).reshape(-1)
    if np.any(poly.g == -np.inf):
        raise EmptySetError("polytope is empty")
    res = lp.linprog(-direction, poly.F, poly.g)
    if res.status == lp.INFEASIBLE:
        raise EmptySetError("polytope is empty")
    if res.status == lp.UNBOUNDED:
        return np.inf
    return -res.value


def chebyshev_center(poly: Polytope):
    """Center and radius of the largest inscribed ball.

    The radius is negative for an empty set and ``inf`` for a set containing
    arbitrarily large balls.
    """
    F, g = poly.F, poly.g
    if np.any(g == -np.inf):
        return np.full(poly.dim, np.nan), -np.inf
    norms = np.linalg.norm(F, axis=1)
    A = np.hstack([F, norms[:, None]])
    c = np.zeros(poly.dim + 1)
    c[-1] = -1.0
    res = lp.linprog(c, A, g)
    if res.status == lp.UNBOUNDED:
        return np.full(poly.dim, np.nan), np.inf
    if res.status == lp.INFEASIBLE:  # cannot happen with a free radius, kept defensive
        return np.full(poly.dim, np.nan), -np.inf
    return res.x[:-1], float(res.x[-1])


@dataclass
class ErosionResult:
    polytope: Polytope
    unbounded_rows: tuple = ()
    subtrahend_empty: bool = False


def erode(A: Polytope, B: Polytope, with_flags=False):
    """Pontryagin difference ``{a in A | a + b in A for all b in B}``.

    Each row of ``A`` is shifted by the support value of ``B`` in its normal
    direction; the original rows of ``A`` are kept so the result stays inside
    ``A`` even when ``B`` does not contain the origin.  An empty ``B`` leaves
    ``A`` unchanged.
    """
    if A.dim != B.dim:
        raise ValidationError("dimension mismatch in erosion")
    if B.is_empty():
        out = ErosionResult(A, subtrahend_empty=True)
        return out if with_flags else out.polytope
    shifts = np.array([support_value(B, f) for f in A.F])
    unbounded = tuple(int(i) for i in np.flatnonzero(~np.isfinite(shifts)))
    g = np.where(np.isfinite(shifts), A.g - np.where(np.isfinite(shifts), shifts, 0.0), -np.inf)
    out = ErosionResult(Polytope(np.vstack([A.F, A.F]), np.concatenate([g, A.g])), unbounded)
    return out if with_flags else out.polytope


def axis_intervals(poly: Polytope):
    """Per-axis ``(lo, hi)`` if every row is a scaled coordinate vector, else ``None``."""
    F, g = poly.F, poly.g
    d = poly.dim
    lo = np.full(d, -np.inf)
    hi = np.full(d, np.inf)
    for f, gi in zip(F, g):
        nz = np.flatnonzero(f != 0.0)
        if nz.size == 0:
            if gi < 0:
                return np.zeros(d), np.full(d, -1.0)
            continue
        if nz.size > 1:
            return None
        j = nz[0]
        if f[j] > 0:
            hi[j] = min(hi[j], gi / f[j])
        else:
            lo[j] = max(lo[j], gi / f[j])
    return lo, hi


@dataclass
class VolumeEstimate:
    value: float
    std_error: float
    method: str
    samples: int = 0
    warnings: list = field(default_factory=list)


def _bounding_box(poly: Polytope):
    d = poly.dim
    lo, hi = np.empty(d), np.empty(d)
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        hi[j] = support_value(poly, e)
        lo[j] = -support_value(poly, -e)
    return lo, hi


def volume(poly: Polytope, n_samples: int = 1_000_000, seed: int = 0,
           method: str = "auto", chunk: int = 200_000) -> VolumeEstimate:
    """Lebesgue volume of a bounded polytope.

    Axis-aligned boxes are measured exactly.  Otherwise points are drawn
    uniformly from the bounding box and the hit fraction is scaled by the box
    volume; the binomial standard error is reported with it.
    """
    intervals = axis_intervals(poly) if method in ("auto", "analytic_box") else None
    if method == "analytic_box" and intervals is None:
        raise ValidationError("analytic volume needs axis-aligned rows")
    if intervals is not None:
        lo, hi = intervals
        if np.any(hi - lo <= 0):
            return VolumeEstimate(0.0, 0.0, "analytic_box")
        if not np.all(np.isfinite(hi - lo)):
            raise ValidationError("polytope is unbounded")
        return VolumeEstimate(float(np.prod(hi - lo)), 0.0, "analytic_box")

    if chebyshev_center(poly)[1] <= 0:
        return VolumeEstimate(0.0, 0.0, "analytic_box")
    lo, hi = _bounding_box(poly)
    if not np.all(np.isfinite(hi - lo)):
        raise ValidationError("polytope is unbounded")
    notes = []
    if poly.dim > MC_DIM_WARN:
        msg = f"rejection sampling in dimension {poly.dim} is inefficient"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    rng = np.random.Generator(np.random.Philox(seed))
    hits = 0
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        pts = lo + (hi - lo) * rng.random((k, poly.dim))
        hits += int(np.count_nonzero(poly.contains(pts)))
        done += k
    box_vol = float(np.prod(hi - lo))
    p = hits / n_samples
    return VolumeEstimate(box_vol * p, box_vol * np.sqrt(p * (1 - p) / n_samples),
                          "monte_carlo", n_samples, notes)
