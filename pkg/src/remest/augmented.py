"""Receiver-side augmented model and the random Riccati recursion.

The receiver estimates the stacked state (x_k, sensor one-step
prediction).  Both transmit options are linear observations of that
augmented state, with correlated process/measurement noise.  The error
covariance obeys a random Riccati recursion whose iterates stay in the
structured class parameterized by the (1,1) block:

    [[P11, P11 - P_s], [P11 - P_s, P11 - P_s]],   P11 >= P_s.

A scalar fast path evaluates the recursion through closed forms in P11;
it must agree with the full matrix path to 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularInnovation, StructureViolation
from .lti import COND_LIMIT

PROJECT_TOL = 1e-6


@dataclass(frozen=True)
class AugmentedModel:
    """Augmented state-space matrices for the receiver's filter."""

    Acal: np.ndarray
    Ccal0: np.ndarray
    Ccal1: np.ndarray
    Q: np.ndarray
    R0: np.ndarray
    R1: np.ndarray
    S: np.ndarray
    Ps: np.ndarray
    n: int
    scalar: "ScalarKernel" = field(default=None, compare=False)

    @classmethod
    def build(cls, model, ss, plan, shared_R_trace=None):
        """Assemble 2n x 2n augmented matrices from model, filter and rate plan.

        When shared_R_trace is given (scalar DP use), both R matrices use a
        common quantization-noise trace instead of the per-stream ones.
        """
        n = model.n
        A, C = model.A, model.C
        Kf, Ks = ss.K_f, ss.K_s
        Acal = np.block([[A, np.zeros((n, n))], [Ks @ C, A - Ks @ C]])
        KfC = Kf @ C
        Ccal0 = np.hstack([KfC, -KfC])
        Ccal1 = np.hstack([KfC, np.eye(n) - KfC])
        Q = np.block([[model.Sigma_w, np.zeros((n, n))],
                      [np.zeros((n, n)), Ks @ model.Sigma_v @ Ks.T]])
        base_R = Kf @ model.Sigma_v @ Kf.T
        if shared_R_trace is not None:
            shared = shared_R_trace / n * np.eye(n)
            R0 = base_R + shared
            R1 = base_R + shared
        else:
            R0 = base_R + plan.Sigma_q_eps
            R1 = base_R + plan.Sigma_q_x
        S = np.vstack([np.zeros((n, n)), Ks @ model.Sigma_v @ Kf.T])
        kern = None
        if n == 1 and model.m == 1:
            kern = ScalarKernel(
                a=float(A[0, 0]), c=float(C[0, 0]),
                sigma_w2=float(model.Sigma_w[0, 0]),
                Ps=float(ss.P_s[0, 0]), Kf=float(Kf[0, 0]),
                R0=float(R0[0, 0]), R1=float(R1[0, 0]),
                Rbase=float(base_R[0, 0]))
        return cls(Acal=Acal, Ccal0=Ccal0, Ccal1=Ccal1, Q=Q, R0=R0, R1=R1,
                   S=S, Ps=ss.P_s.copy(), n=n, scalar=kern)

    def Ccal(self, nu):
        return self.Ccal1 if nu else self.Ccal0

    def R(self, nu):
        return self.R1 if nu else self.R0


@dataclass(frozen=True)
class ScalarKernel:
    """Precomputed constants for the scalar closed-form recursion."""

    a: float
    c: float
    sigma_w2: float
    Ps: float
    Kf: float
    R0: float
    R1: float
    Rbase: float = 0.0

    def step(self, P11, gamma, nu):
        """Closed form for the (1,1) block of one random Riccati step."""
        a2 = self.a * self.a
        openloop = a2 * P11 + self.sigma_w2
        if not gamma:
            return openloop
        x = P11 - self.Ps
        kcp = self.Kf * self.c * self.Ps
        num = nu * x + kcp
        den = nu * x + self.Kf * self.c * kcp + (self.R1 if nu else self.R0)
        return openloop - a2 * num * num / den

    def expected(self, P11, nu, p):
        return (1.0 - p) * self.step(P11, 1, nu) + p * self.step(P11, 0, nu)


@dataclass(frozen=True)
class StructuredCov:
    """Structured covariance parameterized by its (1,1) block."""

    P11: np.ndarray
    Ps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P11", np.atleast_2d(np.asarray(self.P11, dtype=float)))
        object.__setattr__(self, "Ps", np.atleast_2d(np.asarray(self.Ps, dtype=float)))

    def full(self):
        off = self.P11 - self.Ps
        return np.block([[self.P11, off], [off, off]])

    @property
    def trace(self):
        return float(np.trace(self.P11))


def lift(P11, Ps):
    """Embed a (1,1) block into the structured class; P11 - Ps must be PSD."""
    sc = StructuredCov(P11=P11, Ps=Ps)
    diff = sc.P11 - sc.Ps
    eig_min = np.linalg.eigvalsh((diff + diff.T) / 2).min()
    if eig_min < -1e-10 * max(1.0, float(np.trace(sc.P11))):
        raise StructureViolation(f"P11 - Ps not PSD (min eigenvalue {eig_min:.3g})",
                                 max_deviation=-eig_min)
    return sc


def project(P, Ps, tol=PROJECT_TOL):
    """Recover the (1,1) block, checking membership in the structured class."""
    P = np.asarray(P, dtype=float)
    n = Ps.shape[0]
    P11 = P[:n, :n]
    expect_off = P11 - Ps
    dev = max(np.max(np.abs(P[:n, n:] - expect_off)),
              np.max(np.abs(P[n:, :n] - expect_off)),
              np.max(np.abs(P[n:, n:] - expect_off)))
    if dev > tol:
        raise StructureViolation(
            f"matrix deviates from structured form by {dev:.3g} (tol {tol:.3g})",
            max_deviation=dev)
    return P11


def riccati_step(P, gamma, nu, aug):
    """One step of the random Riccati recursion at the receiver."""
    A, Q, S = aug.Acal, aug.Q, aug.S
    P = np.asarray(P, dtype=float)
    out = A @ P @ A.T + Q
    if gamma:
        C = aug.Ccal(nu)
        R = aug.R(nu)
        D = C @ P @ C.T + R
        if np.linalg.cond(D) > COND_LIMIT:
            raise SingularInnovation(f"innovation covariance condition {np.linalg.cond(D):.3g}")
        M = A @ P @ C.T + S
        out = out - M @ np.linalg.solve(D, M.T)
    return (out + out.T) / 2


def expected_riccati(P, nu, p, aug):
    """Expectation of the random Riccati step over packet delivery."""
    full = P.full()
    mixed = (1.0 - p) * riccati_step(full, 1, nu, aug) + p * riccati_step(full, 0, nu, aug)
    return StructuredCov(P11=project(mixed, aug.Ps), Ps=aug.Ps)


def receiver_gain(P, nu, aug):
    """Kalman gain of the correlated-noise measurement update."""
    C = aug.Ccal(nu)
    R = aug.R(nu)
    D = C @ P @ C.T + R
    if np.linalg.cond(D) > COND_LIMIT:
        raise SingularInnovation(f"innovation covariance condition {np.linalg.cond(D):.3g}")
    M = aug.Acal @ P @ C.T + aug.S
    return np.linalg.solve(D.T, M.T).T


def receiver_estimate_step(theta_hat, P, z, gamma, nu, aug):
    """Mean update of the receiver's filter; prediction only on dropout."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    pred = aug.Acal @ theta_hat
    if not gamma:
        return pred
    K = receiver_gain(P, nu, aug)
    return pred + K @ (np.asarray(z, dtype=float) - aug.Ccal(nu) @ theta_hat)
