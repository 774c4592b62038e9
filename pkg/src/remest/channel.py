"""Forward erasure channel and erroneous ternary feedback channel.

The forward link drops an n-bit packet whenever any bit is in error:
p = 1 - (1 - p_b)^n, with the BPSK/AWGN bit error p_b = Q(sqrt(2 Eb/N0)).
Both transmit decisions share a single packet loss probability p; the
shorter (innovation) packet therefore tolerates a larger bit error rate
and needs less energy per bit.

The feedback link delivers the acknowledgment bit with erasure
probability eta and, conditioned on delivery, flips it with probability
delta, giving a ternary observation in {0, 1, 2=erasure}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError


def packet_loss_from_bit_error(p_b, n):
    """Packet loss probability of an n-bit packet with i.i.d. bit errors."""
    return 1.0 - (1.0 - p_b) ** n


def bit_error_from_packet_loss(p, n):
    """Inverse of packet_loss_from_bit_error."""
    return 1.0 - (1.0 - p) ** (1.0 / n)


def q_function(x):
    """Standard normal tail probability Q(x) = erfc(x / sqrt(2)) / 2."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def bit_error_from_energy(E_b, N0):
    """BPSK over AWGN: p_b = Q(sqrt(2 E_b / N0))."""
    if N0 <= 0:
        raise DomainError("N0 must be positive")
    if E_b < 0:
        raise DomainError("E_b must be nonnegative")
    return q_function(math.sqrt(2.0 * E_b / N0))


def energy_from_bit_error(p_b, N0):
    """Invert the BPSK bit error map by root finding on the forward map."""
    if not 0.0 < p_b < 0.5:
        raise DomainError(f"p_b must be in (0, 0.5), got {p_b}")
    # Q is strictly decreasing; bracket the argument then polish with brentq.
    f = lambda x: q_function(x) - p_b
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
    x = brentq(f, 0.0, hi, xtol=1e-14, rtol=8.881784197001252e-16)
    return N0 * x * x / 2.0


@dataclass(frozen=True)
class ForwardChannel:
    """Erasure channel state shared by the two packet types."""

    p: float
    p_b0: float
    p_b1: float
    E_b0: float
    E_b1: float
    N0: float
    n0: int
    n1: int

    @classmethod
    def from_loss_prob(cls, p, n0, n1, N0):
        if not 0.0 < p < 1.0:
            raise DomainError(f"packet loss probability must be in (0, 1), got {p}")
        p_b0 = bit_error_from_packet_loss(p, n0)
        p_b1 = bit_error_from_packet_loss(p, n1)
        # A commanded loss rate can imply a per-bit error above 1/2, which
        # BPSK cannot produce at any energy; the energy saturates at zero
        # (a zero-power transmitter already errs at rate 1/2) while the
        # commanded p still drives the delivery process.
        def _energy(p_b):
            return 0.0 if p_b >= 0.5 else energy_from_bit_error(p_b, N0)
        return cls(p=p, p_b0=p_b0, p_b1=p_b1,
                   E_b0=_energy(p_b0), E_b1=_energy(p_b1),
                   N0=N0, n0=int(n0), n1=int(n1))

    @classmethod
    def from_energies(cls, E_b0, E_b1, n0, n1, N0, tol=1e-9):
        p_b0 = bit_error_from_energy(E_b0, N0)
        p_b1 = bit_error_from_energy(E_b1, N0)
        p0 = packet_loss_from_bit_error(p_b0, n0)
        p1 = packet_loss_from_bit_error(p_b1, n1)
        if abs(p0 - p1) > tol:
            raise DomainError(
                f"energies imply inconsistent packet loss: {p0:.12g} vs {p1:.12g}")
        return cls(p=p0, p_b0=p_b0, p_b1=p_b1, E_b0=E_b0, E_b1=E_b1,
                   N0=N0, n0=int(n0), n1=int(n1))


@dataclass(frozen=True)
class FeedbackChannel:
    """Ternary acknowledgment channel: erasure prob eta, flip prob delta."""

    eta: float
    delta: float
    Amat: np.ndarray = field(default=None)

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0 or not 0.0 <= self.delta <= 1.0:
            raise DomainError("eta and delta must lie in [0, 1]")
        e, d = self.eta, self.delta
        A = np.array([[(1 - d) * (1 - e), d * (1 - e), e],
                      [d * (1 - e), (1 - d) * (1 - e), e]])
        object.__setattr__(self, "Amat", A)

    def cond_prob(self, gamma_hat, gamma):
        return self.Amat[gamma, gamma_hat]


def packet_energy(plan, fwd, nu):
    """Energy of one packet: bits times energy per bit for the chosen stream."""
    return plan.n0 * fwd.E_b0 if nu == 0 else plan.n1 * fwd.E_b1


def forward_draw(fwd, rng):
    """Bernoulli(1 - p) packet delivery indicator."""
    return int(rng.random() >= fwd.p)


def feedback_draw(fb, gamma, rng):
    """Ternary acknowledgment drawn from row gamma of the transition matrix."""
    u = rng.random()
    row = fb.Amat[gamma]
    if u < row[0]:
        return 0
    if u < row[0] + row[1]:
        return 1
    return 2
