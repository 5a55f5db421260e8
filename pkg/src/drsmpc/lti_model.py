"""Stochastic LTI plant and horizon-stacked prediction operators.

The plant is ``x_{k+1} = A x_k + B u_k + w_k`` with zero-mean i.i.d. noise of
known covariance.  Over a horizon of ``N`` steps the stacked state obeys

    x = Abold x0 + Bbold u + Dbold w

and the mean / covariance follow directly from that expression.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError

PSD_TOL = 1e-10


def _check_symmetric_psd(name: str, M: np.ndarray, tol: float = PSD_TOL) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigurationError(f"{name} must be square, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    if np.max(np.abs(M - M.T), initial=0.0) > tol * scale:
        raise ValidationError(f"{name} is not symmetric")
    if M.size and np.linalg.eigvalsh(M).min() < -tol * scale:
        raise ValidationError(f"{name} is not positive semidefinite")


def solve_riccati(A, B, Q, R, tol=1e-10, max_iter=100_000):
    """Fixed point of ``P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA``."""
    P = np.array(Q, dtype=float)
    for _ in range(max_iter):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ K
        P_next = 0.5 * (P_next + P_next.T)
        if np.max(np.abs(P_next - P)) <= tol * max(1.0, np.max(np.abs(P_next))):
            return P_next
        P = P_next
    raise ConfigurationError("Riccati iteration did not converge")


@dataclass(frozen=True)
class SystemModel:
    """LTI matrices, noise covariance and quadratic stage/terminal weights.

    ``Qf=None`` selects the stationary Riccati solution, so that the finite
    horizon cost matches the infinite-horizon LQR cost when no constraint is
    active.
    """

    A: np.ndarray
    B: np.ndarray
    sigma_w: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Qf: np.ndarray | None = None
    dt: float = 1.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ConfigurationError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ConfigurationError(f"B must have {n} rows, got {B.shape}")
        m = B.shape[1]
        sigma_w = np.atleast_2d(np.asarray(self.sigma_w, dtype=float))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        for name, M, shape in (("sigma_w", sigma_w, (n, n)), ("Q", Q, (n, n)), ("R", R, (m, m))):
            if M.shape != shape:
                raise ConfigurationError(f"{name} must have shape {shape}, got {M.shape}")
            _check_symmetric_psd(name, M)
        if np.linalg.eigvalsh(R).min() <= 1e-12:
            raise ValidationError("R must be positive definite")
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if self.Qf is None:
            Qf = solve_riccati(A, B, Q, R)
        else:
            Qf = np.atleast_2d(np.asarray(self.Qf, dtype=float))
            if Qf.shape != (n, n):
                raise ConfigurationError(f"Qf must have shape {(n, n)}, got {Qf.shape}")
            _check_symmetric_psd("Qf", Qf)
        for name, value in (("A", A), ("B", B), ("sigma_w", sigma_w), ("Q", Q), ("R", R), ("Qf", Qf)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def double_integrator(dt=0.05, noise_std=0.01, Q=((1.0, 0.0), (0.0, 0.1)), R=0.1, Qf=None):
    """Discretized double integrator with isotropic process noise."""
    A = np.array([[1.0, dt], [0.0, 1.0]])
    B = np.array([[0.0], [dt]])
    return SystemModel(A=A, B=B, sigma_w=noise_std**2 * np.eye(2), Q=np.array(Q),
                       R=np.atleast_2d(R), Qf=Qf, dt=dt)


@dataclass(frozen=True)
class PredictionMatrices:
    Abold: np.ndarray
    Bbold: np.ndarray
    Dbold: np.ndarray
    Qbold: np.ndarray
    Rbold: np.ndarray
    N: int

    @property
    def n(self) -> int:
        return self.Abold.shape[1]

    @property
    def m(self) -> int:
        return self.Bbold.shape[1] // self.N


@dataclass(frozen=True)
class MomentState:
    mean: np.ndarray
    covariance: np.ndarray


def build_prediction_matrices(model: SystemModel, N: int) -> PredictionMatrices:
    """Stack the dynamics over ``N`` steps.

    Block row ``i`` of ``Abold`` is ``A^i``; block ``(i, j)`` of ``Bbold`` is
    ``A^(i-1-j) B`` for ``j < i`` and zero otherwise.  ``Dbold`` has the same
    structure with the identity in place of ``B``.
    """
    if int(N) != N or N < 1:
        raise ConfigurationError(f"horizon must be a positive integer, got {N}")
    N = int(N)
    A, B = model.A, model.B
    n, m = model.n, model.m

    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(A @ powers[-1])

    Abold = np.vstack(powers)
    Bbold = np.zeros(((N + 1) * n, N * m))
    Dbold = np.zeros(((N + 1) * n, N * n))
    for i in range(1, N + 1):
        for j in range(i):
            P = powers[i - 1 - j]
            Bbold[i * n:(i + 1) * n, j * m:(j + 1) * m] = P @ B
            Dbold[i * n:(i + 1) * n, j * n:(j + 1) * n] = P

    Qbold = np.zeros(((N + 1) * n, (N + 1) * n))
    for i in range(N):
        Qbold[i * n:(i + 1) * n, i * n:(i + 1) * n] = model.Q
    Qbold[N * n:, N * n:] = model.Qf
    Rbold = np.kron(np.eye(N), model.R)

    mats = dict(Abold=Abold, Bbold=Bbold, Dbold=Dbold, Qbold=Qbold, Rbold=Rbold)
    for M in mats.values():
        M.setflags(write=False)
    return PredictionMatrices(N=N, **mats)


def propagate_mean(pred: PredictionMatrices, x0, useq) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    useq = np.asarray(useq, dtype=float).reshape(-1)
    if x0.size != pred.n or useq.size != pred.Bbold.shape[1]:
        raise ConfigurationError("x0 / useq dimension mismatch")
    return pred.Abold @ x0 + pred.Bbold @ useq


def stacked_noise_covariance(sigma_w, N: int) -> np.ndarray:
    return np.kron(np.eye(N), np.asarray(sigma_w, dtype=float))


def propagate_covariance(pred: PredictionMatrices, sigma_w) -> np.ndarray:
    sigma_w = np.atleast_2d(np.asarray(sigma_w, dtype=float))
    if sigma_w.shape != (pred.n, pred.n):
        raise ConfigurationError("sigma_w dimension mismatch")
    _check_symmetric_psd("sigma_w", sigma_w)
    S = pred.Dbold @ stacked_noise_covariance(sigma_w, pred.N) @ pred.Dbold.T
    return 0.5 * (S + S.T)


def propagate_moments(pred: PredictionMatrices, x0, useq, sigma_w) -> MomentState:
    return MomentState(propagate_mean(pred, x0, useq), propagate_covariance(pred, sigma_w))


def step(model: SystemModel, x, u, w) -> np.ndarray:
    return model.A @ np.asarray(x, dtype=float) + model.B @ np.atleast_1d(u) + np.asarray(w, dtype=float)
