"""Compiled scalar episode loops.

All randomness is pre-drawn into arrays by the caller (one substream per
noise source), so episodes are deterministic given the arrays and the
kernels stay pure functions.  Decision encodings:

  dec_mode: 0 = always nu=0, 1 = always nu=1, 2 = threshold phi,
            3 = action table (step interpolation on the grid)
  info_mode: 0 = decide from the receiver's true P11 (perfect-ack info),
             1 = decide from the sensor's Bayes estimate of P11
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _step(P, gamma, nu, a, c, sw2, Ps, Kf, R0, R1):
    openl = a * a * P + sw2
    if gamma == 0:
        return openl
    xt = P - Ps
    num = nu * xt + Kf * c * Ps
    den = nu * xt + Kf * Kf * c * c * Ps + (R1 if nu == 1 else R0)
    return openl - a * a * num * num / den


@njit(cache=True, nogil=True)
def _sub_step(P, gamma_hat, nu, a, c, sw2, Ps, Kf, R0, R1, p, Amat):
    if gamma_hat == 2:
        return ((1.0 - p) * _step(P, 1, nu, a, c, sw2, Ps, Kf, R0, R1)
                + p * _step(P, 0, nu, a, c, sw2, Ps, Kf, R0, R1))
    w0 = Amat[0, gamma_hat] * p
    w1 = Amat[1, gamma_hat] * (1.0 - p)
    wa = w0 / (w0 + w1)
    if wa == 0.0:
        return _step(P, 1, nu, a, c, sw2, Ps, Kf, R0, R1)
    if wa == 1.0:
        return _step(P, 0, nu, a, c, sw2, Ps, Kf, R0, R1)
    return (wa * _step(P, 0, nu, a, c, sw2, Ps, Kf, R0, R1)
            + (1.0 - wa) * _step(P, 1, nu, a, c, sw2, Ps, Kf, R0, R1))


@njit(cache=True, nogil=True)
def _decide(info, dec_mode, phi, grid, action):
    if dec_mode == 0:
        return 0
    if dec_mode == 1:
        return 1
    if dec_mode == 2:
        return 1 if info > phi else 0
    x = min(max(info, grid[0]), grid[-1])
    j = np.searchsorted(grid, x, side="right") - 1
    if j >= grid.size - 1:
        j = grid.size - 2
    f = (x - grid[j]) / (grid[j + 1] - grid[j])
    v = action[j] * (1.0 - f) + action[j + 1] * f
    return 1 if v >= 0.5 else 0


@njit(cache=True, nogil=True)
def scalar_episode(a, c, sw_std, sv_std, Ps, Kf, Ks, R0, R1,
                   sq0_std, sq1_std, p, Amat, lam, J0, J1,
                   dec_mode, info_mode, phi, grid, action,
                   P0, Ph0, x0, T, burn,
                   wn, vn, qn, u_fwd, u_fb, trace):
    """Full scalar episode: plant, sensor filter, quantize, channel,
    receiver mean/covariance, feedback, sensor-side estimate.

    Returns (avg_cost, avg_est_var, avg_energy) over steps >= burn; when
    trace has T rows it is filled with (P11, Phat11, nu, gamma, gamma_hat,
    cost) per step.
    """
    sw2 = sw_std * sw_std
    x = x0
    xs = 0.0
    th1 = 0.0
    th2 = 0.0
    P = P0
    Ph = Ph0
    record = trace.shape[0] == T
    acc_c = 0.0
    acc_v = 0.0
    acc_e = 0.0
    m = 0
    for k in range(T):
        y = c * x + sv_std * vn[k]
        innov = Kf * (y - c * xs)
        xf = xs + innov

        info = P if info_mode == 0 else Ph
        nu = _decide(info, dec_mode, phi, grid, action)

        if nu == 1:
            z = xf + sq1_std * qn[k]
        else:
            z = innov + sq0_std * qn[k]
        gamma = 1 if u_fwd[k] >= p else 0

        xt = P - Ps
        num = nu * xt + Kf * c * Ps
        den = nu * xt + Kf * Kf * c * c * Ps + (R1 if nu == 1 else R0)
        pred1 = a * th1
        pred2 = Ks * c * th1 + (a - Ks * c) * th2
        if gamma == 1:
            if nu == 1:
                cth = Kf * c * th1 + (1.0 - Kf * c) * th2
            else:
                cth = Kf * c * (th1 - th2)
            gK = a * num / den
            resid = z - cth
            th1 = pred1 + gK * resid
            th2 = pred2 + gK * resid
        else:
            th1 = pred1
            th2 = pred2
        Pn = _step(P, gamma, nu, a, c, sw2, Ps, Kf, R0, R1)

        u = u_fb[k]
        if u < Amat[gamma, 0]:
            gh = 0
        elif u < Amat[gamma, 0] + Amat[gamma, 1]:
            gh = 1
        else:
            gh = 2
        if info_mode == 1:
            Ph = _sub_step(Ph, gh, nu, a, c, sw2, Ps, Kf, R0, R1, p, Amat)

        e = J1 if nu == 1 else J0
        ck = lam * Pn + (1.0 - lam) * e
        if k >= burn:
            acc_c += ck
            acc_v += Pn
            acc_e += e
            m += 1
        if record:
            trace[k, 0] = Pn
            trace[k, 1] = Ph
            trace[k, 2] = nu
            trace[k, 3] = gamma
            trace[k, 4] = gh
            trace[k, 5] = ck
        P = Pn
        x = a * x + sw_std * wn[k]
        xs = a * xf
    return acc_c / m, acc_v / m, acc_e / m


@njit(cache=True, nogil=True)
def belief_episode(a, c, sw_std, sv_std, Ps, Kf, Ks, R0, R1,
                   sq0_std, sq1_std, p, Amat, lam, J0, J1,
                   grid, Bmat, actions,
                   succ_idx, succ_frac,
                   P0, x0, T, burn,
                   wn, vn, qn, u_fwd, u_fb):
    """Episode driven by the point-based belief policy.

    succ_idx/succ_frac, shape (2, 2, G): interpolation split of
    _step(grid[i], gamma, nu) onto the grid, precomputed by the caller.
    The per-step decision is the action of the L1-nearest sampled belief.
    """
    sw2 = sw_std * sw_std
    G = grid.size
    NB = Bmat.shape[0]
    w = np.zeros(G)
    # start as a point mass at P0
    x0g = min(max(P0, grid[0]), grid[-1])
    j0 = min(np.searchsorted(grid, x0g, side="right") - 1, G - 2)
    f0 = (x0g - grid[j0]) / (grid[j0 + 1] - grid[j0])
    w[j0] = 1.0 - f0
    w[j0 + 1] += f0

    x = x0
    xs = 0.0
    th1 = 0.0
    th2 = 0.0
    P = P0
    nw = np.zeros(G)
    acc_c = 0.0
    acc_v = 0.0
    acc_e = 0.0
    m = 0
    for k in range(T):
        y = c * x + sv_std * vn[k]
        innov = Kf * (y - c * xs)
        xf = xs + innov

        best = 0
        bd = 1e300
        for i in range(NB):
            d = 0.0
            for j in range(G):
                d += abs(w[j] - Bmat[i, j])
                if d >= bd:
                    break
            if d < bd:
                bd = d
                best = i
        nu = actions[best]

        if nu == 1:
            z = xf + sq1_std * qn[k]
        else:
            z = innov + sq0_std * qn[k]
        gamma = 1 if u_fwd[k] >= p else 0

        xt = P - Ps
        num = nu * xt + Kf * c * Ps
        den = nu * xt + Kf * Kf * c * c * Ps + (R1 if nu == 1 else R0)
        pred1 = a * th1
        pred2 = Ks * c * th1 + (a - Ks * c) * th2
        if gamma == 1:
            if nu == 1:
                cth = Kf * c * th1 + (1.0 - Kf * c) * th2
            else:
                cth = Kf * c * (th1 - th2)
            gK = a * num / den
            resid = z - cth
            th1 = pred1 + gK * resid
            th2 = pred2 + gK * resid
        else:
            th1 = pred1
            th2 = pred2
        Pn = _step(P, gamma, nu, a, c, sw2, Ps, Kf, R0, R1)

        u = u_fb[k]
        if u < Amat[gamma, 0]:
            gh = 0
        elif u < Amat[gamma, 0] + Amat[gamma, 1]:
            gh = 1
        else:
            gh = 2

        # belief push through the two gamma branches
        if gh == 2:
            wg0 = Amat[0, 2] * p
            wg1 = Amat[1, 2] * (1.0 - p)
        else:
            wg0 = Amat[0, gh] * p
            wg1 = Amat[1, gh] * (1.0 - p)
        norm = wg0 + wg1
        wg0 /= norm
        wg1 /= norm
        for j in range(G):
            nw[j] = 0.0
        if wg0 > 0.0:
            for i in range(G):
                mmass = w[i] * wg0
                jj = succ_idx[0, nu, i]
                ff = succ_frac[0, nu, i]
                nw[jj] += mmass * (1.0 - ff)
                nw[jj + 1] += mmass * ff
        if wg1 > 0.0:
            for i in range(G):
                mmass = w[i] * wg1
                jj = succ_idx[1, nu, i]
                ff = succ_frac[1, nu, i]
                nw[jj] += mmass * (1.0 - ff)
                nw[jj + 1] += mmass * ff
        tot = 0.0
        for j in range(G):
            tot += nw[j]
        for j in range(G):
            w[j] = nw[j] / tot

        e = J1 if nu == 1 else J0
        ck = lam * Pn + (1.0 - lam) * e
        if k >= burn:
            acc_c += ck
            acc_v += Pn
            acc_e += e
            m += 1
        P = Pn
        x = a * x + sw_std * wn[k]
        xs = a * xf
    return acc_c / m, acc_v / m, acc_e / m
