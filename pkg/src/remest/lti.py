"""Plant/measurement model and the sensor's steady-state Kalman filter.

The plant is a Schur-stable LTI system x_{k+1} = A x_k + w_k observed
through y_k = C x_k + v_k.  The sensor runs a stationary Kalman filter
whose gains and covariances are obtained from the discrete algebraic
Riccati equation and a companion Lyapunov equation, both solved by
fixed-point iteration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence, SingularInnovation

COND_LIMIT = 1e12


def _as_matrix(x, n, m):
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if a.shape != (n, m):
        raise ValueError(f"expected shape {(n, m)}, got {a.shape}")
    return a


def _check_symmetric_psd(M, name, strict=False):
    if not np.allclose(M, M.T, atol=1e-10):
        raise ValueError(f"{name} must be symmetric")
    eig = np.linalg.eigvalsh((M + M.T) / 2)
    if strict:
        if eig.min() <= 0:
            raise ValueError(f"{name} must be positive definite")
    elif eig.min() < -1e-10 * max(1.0, abs(eig.max())):
        raise ValueError(f"{name} must be positive semidefinite")


def cholesky_factor(cov):
    """Cholesky factor of a PSD covariance, regularized when singular.

    Singular-but-PSD inputs get a diagonal shift of 1e-14 * trace before
    factorization; an exactly zero matrix factors to zero.
    """
    cov = np.asarray(cov, dtype=float)
    if not cov.any():
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        shift = 1e-14 * np.trace(cov)
        return np.linalg.cholesky(cov + shift * np.eye(cov.shape[0]))


def sample_gaussian(cov_chol, rng, size=None):
    """Draw N(0, L L^T) samples given a Cholesky factor L."""
    n = cov_chol.shape[0]
    if size is None:
        return cov_chol @ rng.standard_normal(n)
    return rng.standard_normal((size, n)) @ cov_chol.T


@dataclass(frozen=True)
class SystemModel:
    """Plant and measurement model with Gaussian noise statistics."""

    A: np.ndarray
    C: np.ndarray
    Sigma_w: np.ndarray
    Sigma_v: np.ndarray
    x0_mean: np.ndarray = None
    P_x0: np.ndarray = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        C = _as_matrix(self.C, np.atleast_2d(np.asarray(self.C)).shape[0], n)
        m = C.shape[0]
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "Sigma_w", _as_matrix(self.Sigma_w, n, n))
        object.__setattr__(self, "Sigma_v", _as_matrix(self.Sigma_v, m, m))
        x0 = np.zeros(n) if self.x0_mean is None else np.asarray(self.x0_mean, dtype=float).reshape(n)
        P0 = np.zeros((n, n)) if self.P_x0 is None else _as_matrix(self.P_x0, n, n)
        object.__setattr__(self, "x0_mean", x0)
        object.__setattr__(self, "P_x0", P0)
        self.validate()

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.C.shape[0]

    def validate(self):
        rho = max(abs(np.linalg.eigvals(self.A)))
        if rho >= 1.0:
            raise ValueError(f"A must be Schur stable (spectral radius {rho:.6g} >= 1)")
        _check_symmetric_psd(self.Sigma_w, "Sigma_w")
        _check_symmetric_psd(self.Sigma_v, "Sigma_v", strict=True)
        _check_symmetric_psd(self.P_x0, "P_x0")
        self._detectability_warning()

    def _detectability_warning(self):
        # PBH rank test at eigenvalues on/outside the unit circle; vacuous
        # for a Schur-stable A but kept as a model sanity check.
        n = self.n
        for lam in np.linalg.eigvals(self.A):
            if abs(lam) < 1.0 - 1e-12:
                continue
            M = np.vstack([lam * np.eye(n) - self.A, self.C])
            if np.linalg.matrix_rank(M) < n:
                warnings.warn(f"(A, C) not detectable at eigenvalue {lam}")

    @classmethod
    def scalar(cls, a, c, sigma_w2, sigma_v2, x0_mean=0.0, p_x0=0.0):
        return cls(A=[[a]], C=[[c]], Sigma_w=[[sigma_w2]], Sigma_v=[[sigma_v2]],
                   x0_mean=[x0_mean], P_x0=[[p_x0]])


@dataclass(frozen=True)
class SensorSteadyState:
    """Stationary sensor filter quantities derived from the Riccati fixed point."""

    P_s: np.ndarray
    K_f: np.ndarray
    K_s: np.ndarray
    Sigma_s: np.ndarray
    innov_cov: np.ndarray = field(default=None)
    filt_est_cov: np.ndarray = field(default=None)


def dare_residual(P, model):
    """Residual P - (A P A' + Sw - A P C' (C P C' + Sv)^-1 C P A')."""
    A, C = model.A, model.C
    D = C @ P @ C.T + model.Sigma_v
    return P - (A @ P @ A.T + model.Sigma_w - A @ P @ C.T @ np.linalg.solve(D, C @ P @ A.T))


def lyapunov_residual(S, model, ss):
    innov = model.C @ ss.P_s @ model.C.T + model.Sigma_v
    return S - (model.A @ S @ model.A.T + ss.K_s @ innov @ ss.K_s.T)


def solve_dare(model, tol=1e-12, max_iter=1_000_000):
    """Fixed-point iteration of the prediction Riccati map, started from Sigma_w.

    Returns the stationary sensor quantities.  Raises NonConvergence when the
    iteration budget is exhausted and SingularInnovation when C P C' + Sigma_v
    is numerically singular.
    """
    A, C = model.A, model.C
    Sw, Sv = model.Sigma_w, model.Sigma_v
    P = Sw.copy()
    for _ in range(int(max_iter)):
        D = C @ P @ C.T + Sv
        if np.linalg.cond(D) > COND_LIMIT:
            raise SingularInnovation(f"innovation covariance condition {np.linalg.cond(D):.3g}")
        Pn = A @ P @ A.T + Sw - A @ P @ C.T @ np.linalg.solve(D, C @ P @ A.T)
        Pn = (Pn + Pn.T) / 2
        if np.max(np.abs(Pn - P)) < tol:
            P = Pn
            break
        P = Pn
    else:
        raise NonConvergence(f"DARE iteration did not converge in {max_iter} steps")

    D = C @ P @ C.T + Sv
    if np.linalg.cond(D) > COND_LIMIT:
        raise SingularInnovation(f"innovation covariance condition {np.linalg.cond(D):.3g}")
    K_f = P @ C.T @ np.linalg.inv(D)
    K_s = A @ K_f

    G = K_s @ D @ K_s.T
    S = np.zeros_like(P)
    for _ in range(int(max_iter)):
        Sn = A @ S @ A.T + G
        Sn = (Sn + Sn.T) / 2
        if np.max(np.abs(Sn - S)) < tol:
            S = Sn
            break
        S = Sn
    else:
        raise NonConvergence(f"Lyapunov iteration did not converge in {max_iter} steps")

    innov_cov = K_f @ D @ K_f.T
    return SensorSteadyState(P_s=P, K_f=K_f, K_s=K_s, Sigma_s=S,
                             innov_cov=innov_cov, filt_est_cov=S + innov_cov)


def plant_step(x, model, rng, w_chol=None, v_chol=None):
    """One step of the plant: returns (x_next, y)."""
    if w_chol is None:
        w_chol = cholesky_factor(model.Sigma_w)
    if v_chol is None:
        v_chol = cholesky_factor(model.Sigma_v)
    x = np.asarray(x, dtype=float)
    x_next = model.A @ x + sample_gaussian(w_chol, rng)
    y = model.C @ x + sample_gaussian(v_chol, rng)
    return x_next, y


def sensor_filter_step(xhat_pred, y, ss, model):
    """Stationary filter/predictor update; returns (xhat_filt, xhat_pred_next, innov)."""
    resid = y - model.C @ xhat_pred
    innov = ss.K_f @ resid
    xhat_filt = xhat_pred + innov
    xhat_pred_next = model.A @ xhat_pred + ss.K_s @ resid
    return xhat_filt, xhat_pred_next, innov
