"""High-resolution quantizer noise model and bit-rate selection.

Quantization is modeled as additive white Gaussian noise whose covariance
is a scale factor alpha times the covariance of the quantized signal.
Two quantizer families are supported: asymptotically optimal lattice
vector quantizers and Lloyd-Max quantizers (scalar constants only known
for source dimensions 1 and 2).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import RateOverflow, UnknownConstant
from .lti import cholesky_factor, sample_gaussian

MAX_RATE_BITS = 64

LLOYD_MAX_B1 = math.pi * math.sqrt(3.0) / 2.0


class Family(enum.Enum):
    LLOYD_MAX = "lloyd-max"
    LATTICE = "lattice"


@dataclass(frozen=True)
class QuantizerSpec:
    family: Family
    m: int = 1
    lattice_moment: float = 1.0 / 12.0  # interval cell for m=1
    B_m: float = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("source dimension m must be >= 1")
        if self.family is Family.LLOYD_MAX:
            if self.m >= 3:
                raise UnknownConstant(
                    f"Lloyd-Max constant unknown for dimension m={self.m}")
            if self.B_m is None:
                if self.m == 1:
                    object.__setattr__(self, "B_m", LLOYD_MAX_B1)
                else:
                    raise UnknownConstant("B_m must be supplied for m=2")
        elif self.lattice_moment <= 0:
            raise ValueError("lattice_moment must be positive")


def _lattice_prefactor(spec):
    m = spec.m
    eta2 = 0.5
    V = math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)
    return spec.lattice_moment * V ** (2.0 / m) / eta2


def _alpha_real(spec, n_bits):
    """alpha for a (possibly non-integer) rate n_bits."""
    m = spec.m
    if spec.family is Family.LLOYD_MAX:
        return spec.B_m / 2.0 ** (2.0 * n_bits / m)
    pref = _lattice_prefactor(spec)
    return pref * (2.0 * n_bits * math.log(2.0) / m) / 2.0 ** (2.0 * n_bits / m)


def alpha_of_rate(spec, n_bits):
    """Quantization-noise scale factor for an integer rate of n_bits."""
    n_bits = int(n_bits)
    if n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    if spec.family is Family.LLOYD_MAX and spec.m >= 3:
        raise UnknownConstant(f"Lloyd-Max constant unknown for m={spec.m}")
    return _alpha_real(spec, n_bits)


def _rate_for_alpha(spec, alpha_target):
    """Real-valued rate n with alpha(n) == alpha_target; monotone branch n >= 1."""
    m = spec.m
    if spec.family is Family.LLOYD_MAX:
        n = (m / 2.0) * math.log2(spec.B_m / alpha_target)
    else:
        f = lambda n: _alpha_real(spec, n) - alpha_target
        if f(1.0) <= 0:
            n = 1.0
        else:
            hi = 2.0
            while f(hi) > 0 and hi < 4 * MAX_RATE_BITS:
                hi *= 2.0
            if f(hi) > 0:
                raise RateOverflow(f"required rate exceeds {MAX_RATE_BITS} bits")
            n = brentq(f, 1.0, hi, xtol=1e-12)
    if n > MAX_RATE_BITS:
        raise RateOverflow(f"required rate {n:.2f} exceeds {MAX_RATE_BITS} bits")
    return max(n, 1.0)


@dataclass(frozen=True)
class RatePlan:
    """Integer bit rates and resulting quantization-noise covariances."""

    n0: int
    n1: int
    alpha0: float
    alpha1: float
    Sigma_q_x: np.ndarray
    Sigma_q_eps: np.ndarray
    target_trace: float


def select_rates(spec, ss, target_trace):
    """Pick rates n0, n1 that (approximately) equalize both noise traces.

    The real-valued rates solving trace(alpha(n) * input covariance) ==
    target_trace are rounded to the nearest integers, then the alphas and
    noise covariances are recomputed from the rounded rates.
    """
    if target_trace <= 0:
        raise ValueError("target_trace must be positive")
    tr_eps = float(np.trace(ss.innov_cov))
    tr_x = float(np.trace(ss.filt_est_cov))
    n0_real = _rate_for_alpha(spec, target_trace / tr_eps)
    n1_real = _rate_for_alpha(spec, target_trace / tr_x)
    n0 = max(1, round(n0_real))
    n1 = max(1, round(n1_real))
    alpha0 = alpha_of_rate(spec, n0)
    alpha1 = alpha_of_rate(spec, n1)
    return RatePlan(n0=n0, n1=n1, alpha0=alpha0, alpha1=alpha1,
                    Sigma_q_x=alpha1 * ss.filt_est_cov,
                    Sigma_q_eps=alpha0 * ss.innov_cov,
                    target_trace=float(target_trace))


def real_valued_rates(spec, ss, target_trace):
    """Pre-rounding rates (n0_real, n1_real); exposed for diagnostics."""
    return (_rate_for_alpha(spec, target_trace / float(np.trace(ss.innov_cov))),
            _rate_for_alpha(spec, target_trace / float(np.trace(ss.filt_est_cov))))


def quantize(value, Sigma_q, rng, q_chol=None):
    """Additive white Gaussian quantization-noise model: value + N(0, Sigma_q)."""
    if q_chol is None:
        q_chol = cholesky_factor(np.atleast_2d(Sigma_q))
    return np.asarray(value, dtype=float) + sample_gaussian(q_chol, rng)
