"""Jitted inner loops for window-batched rollout and its reverse sweep.

Every kernel loops over the batch axis outermost, so each window sees exactly
the same floating-point operation sequence regardless of how many windows are
stacked next to it; batched and sequential rollouts are therefore bit
identical. Keep these loops free of math shortcuts (no fastmath) so the
reverse sweep differentiates exactly what the forward sweep computed.

Array conventions: states are (B, n) row-per-window; trajectories are
(K, B, n) time-major. Stage storage for the reverse sweep keeps the three
intermediate stage states (s2, s3, s4) and all four slopes (k1..k4).
"""

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_DIVERGED = 1


@njit(cache=True)
def _vf_into(ei, ej, gamma, kappa, delta, rad_on, T, u, out):
    """out[b, i] = gamma_i * (u_i - [L(delta) T]_i - rad_on * kappa_i T_i^4)."""
    B, n = T.shape
    m = ei.shape[0]
    for b in range(B):
        for i in range(n):
            out[b, i] = u[b, i]
        for e in range(m):
            i = ei[e]
            j = ej[e]
            flux = delta[e] * (T[b, i] - T[b, j])
            out[b, i] -= flux
            out[b, j] += flux
        if rad_on:
            for i in range(n):
                if kappa[i] != 0.0:
                    t2 = T[b, i] * T[b, i]
                    out[b, i] -= kappa[i] * t2 * t2
        for i in range(n):
            out[b, i] *= gamma[i]


@njit(cache=True)
def _limiter(t, v):
    if t < v:
        return v * math.tanh(t / v - 1.0) + v
    if t > 2.0 * v:
        return v * math.tanh(t / v - 2.0) + 2.0 * v
    return t


@njit(cache=True)
def _limiter_deriv(t, v):
    if t < v:
        th = math.tanh(t / v - 1.0)
        return 1.0 - th * th
    if t > 2.0 * v:
        th = math.tanh(t / v - 2.0)
        return 1.0 - th * th
    return 1.0


@njit(cache=True)
def forward_window(ei, ej, gamma, kappa, delta, T0, inputs, dt, rad_on, lim_on, v):
    """Roll a batch of windows forward with RK4 and zero-order-hold inputs.

    T0 is (B, n); inputs is (K, B, n) and its last row is unused (K states need
    K-1 steps). Returns (status, bad_step, bad_node, states). With the limiter
    off, a non-finite post-step state stops integration and reports the index
    of the offending step and node.
    """
    K = inputs.shape[0]
    B, n = T0.shape
    states = np.empty((K, B, n))
    for b in range(B):
        for i in range(n):
            states[0, b, i] = T0[b, i]
    k1 = np.empty((B, n))
    k2 = np.empty((B, n))
    k3 = np.empty((B, n))
    k4 = np.empty((B, n))
    stage = np.empty((B, n))
    for k in range(K - 1):
        Tk = states[k]
        u = inputs[k]
        _vf_into(ei, ej, gamma, kappa, delta, rad_on, Tk, u, k1)
        for b in range(B):
            for i in range(n):
                stage[b, i] = Tk[b, i] + 0.5 * dt * k1[b, i]
        _vf_into(ei, ej, gamma, kappa, delta, rad_on, stage, u, k2)
        for b in range(B):
            for i in range(n):
                stage[b, i] = Tk[b, i] + 0.5 * dt * k2[b, i]
        _vf_into(ei, ej, gamma, kappa, delta, rad_on, stage, u, k3)
        for b in range(B):
            for i in range(n):
                stage[b, i] = Tk[b, i] + dt * k3[b, i]
        _vf_into(ei, ej, gamma, kappa, delta, rad_on, stage, u, k4)
        for b in range(B):
            for i in range(n):
                y = Tk[b, i] + (dt / 6.0) * (k1[b, i] + 2.0 * k2[b, i] + 2.0 * k3[b, i] + k4[b, i])
                if lim_on:
                    y = _limiter(y, v)
                elif not math.isfinite(y):
                    return STATUS_DIVERGED, k, i, states
                states[k + 1, b, i] = y
    return STATUS_OK, -1, -1, states


@njit(cache=True)
def forward_window_stored(ei, ej, gamma, kappa, delta, T0, inputs, dt, rad_on, lim_on, v):
    """forward_window variant that also stores what the reverse sweep needs.

    Returns (status, bad_step, bad_node, states, ypre, stage_T, stage_k) where
    ypre is the pre-limiter RK4 output per step, stage_T holds s2/s3/s4 and
    stage_k holds k1..k4.
    """
    K = inputs.shape[0]
    B, n = T0.shape
    states = np.empty((K, B, n))
    ypre = np.empty((max(K - 1, 0), B, n))
    stage_T = np.empty((max(K - 1, 0), 3, B, n))
    stage_k = np.empty((max(K - 1, 0), 4, B, n))
    for b in range(B):
        for i in range(n):
            states[0, b, i] = T0[b, i]
    for k in range(K - 1):
        Tk = states[k]
        u = inputs[k]
        _vf_into(ei, ej, gamma, kappa, delta, rad_on, Tk, u, stage_k[k, 0])
        for b in range(B):
            for i in range(n):
                stage_T[k, 0, b, i] = Tk[b, i] + 0.5 * dt * stage_k[k, 0, b, i]
        _vf_into(ei, ej, gamma, kappa, delta, rad_on, stage_T[k, 0], u, stage_k[k, 1])
        for b in range(B):
            for i in range(n):
                stage_T[k, 1, b, i] = Tk[b, i] + 0.5 * dt * stage_k[k, 1, b, i]
        _vf_into(ei, ej, gamma, kappa, delta, rad_on, stage_T[k, 1], u, stage_k[k, 2])
        for b in range(B):
            for i in range(n):
                stage_T[k, 2, b, i] = Tk[b, i] + dt * stage_k[k, 2, b, i]
        _vf_into(ei, ej, gamma, kappa, delta, rad_on, stage_T[k, 2], u, stage_k[k, 3])
        for b in range(B):
            for i in range(n):
                y = Tk[b, i] + (dt / 6.0) * (
                    stage_k[k, 0, b, i] + 2.0 * stage_k[k, 1, b, i]
                    + 2.0 * stage_k[k, 2, b, i] + stage_k[k, 3, b, i]
                )
                ypre[k, b, i] = y
                if lim_on:
                    y = _limiter(y, v)
                elif not math.isfinite(y):
                    return STATUS_DIVERGED, k, i, states, ypre, stage_T, stage_k
                states[k + 1, b, i] = y
    return STATUS_OK, -1, -1, states, ypre, stage_T, stage_k


@njit(cache=True)
def _vf_vjp(ei, ej, gamma, kappa, delta, rad_on, sT, ks, bar, sbar, gbar_row, ggamma, gdelta):
    """Reverse-mode pullback of one vector-field evaluation.

    Given the stage state sT, the stored slope ks = f(sT) and the slope
    cotangent bar, writes the state cotangent into sbar and accumulates the
    gamma/delta gradient contributions.
    """
    B, n = sT.shape
    m = ei.shape[0]
    for b in range(B):
        for i in range(n):
            gb = gamma[i] * bar[b, i]
            gbar_row[i] = gb
            ggamma[i] += bar[b, i] * (ks[b, i] / gamma[i])
            sbar[b, i] = 0.0
        for e in range(m):
            i = ei[e]
            j = ej[e]
            gdiff = gbar_row[i] - gbar_row[j]
            f = delta[e] * gdiff
            sbar[b, i] -= f
            sbar[b, j] += f
            gdelta[e] -= gdiff * (sT[b, i] - sT[b, j])
        if rad_on:
            for i in range(n):
                if kappa[i] != 0.0:
                    t = sT[b, i]
                    sbar[b, i] -= gbar_row[i] * 4.0 * kappa[i] * t * t * t


@njit(cache=True)
def adjoint_window(ei, ej, gamma, kappa, delta, dt, rad_on, lim_on, v,
                   states, ypre, stage_T, stage_k, resid_cot):
    """Reverse sweep through the stored forward pass.

    resid_cot is dLoss/dstates, shape (K, B, n). Returns (grad_gamma,
    grad_delta): the exact gradient of the loss with respect to the physical
    parameters. The initial states are data (no parameter dependence), so
    their cotangent is discarded.
    """
    K, B, n = states.shape
    m = ei.shape[0]
    ggamma = np.zeros(n)
    gdelta = np.zeros(m)
    c = np.empty((B, n))
    for b in range(B):
        for i in range(n):
            c[b, i] = resid_cot[K - 1, b, i]
    cbar = np.empty((B, n))
    cnew = np.empty((B, n))
    kb = np.empty((B, n))
    sbar = np.empty((B, n))
    gbar_row = np.empty(n)
    for k in range(K - 2, -1, -1):
        if lim_on:
            for b in range(B):
                for i in range(n):
                    cbar[b, i] = c[b, i] * _limiter_deriv(ypre[k, b, i], v)
        else:
            for b in range(B):
                for i in range(n):
                    cbar[b, i] = c[b, i]
        for b in range(B):
            for i in range(n):
                cnew[b, i] = cbar[b, i]
                kb[b, i] = (dt / 6.0) * cbar[b, i]
        _vf_vjp(ei, ej, gamma, kappa, delta, rad_on, stage_T[k, 2], stage_k[k, 3],
                kb, sbar, gbar_row, ggamma, gdelta)
        for b in range(B):
            for i in range(n):
                cnew[b, i] += sbar[b, i]
                kb[b, i] = (dt / 3.0) * cbar[b, i] + dt * sbar[b, i]
        _vf_vjp(ei, ej, gamma, kappa, delta, rad_on, stage_T[k, 1], stage_k[k, 2],
                kb, sbar, gbar_row, ggamma, gdelta)
        for b in range(B):
            for i in range(n):
                cnew[b, i] += sbar[b, i]
                kb[b, i] = (dt / 3.0) * cbar[b, i] + 0.5 * dt * sbar[b, i]
        _vf_vjp(ei, ej, gamma, kappa, delta, rad_on, stage_T[k, 0], stage_k[k, 1],
                kb, sbar, gbar_row, ggamma, gdelta)
        for b in range(B):
            for i in range(n):
                cnew[b, i] += sbar[b, i]
                kb[b, i] = (dt / 6.0) * cbar[b, i] + 0.5 * dt * sbar[b, i]
        _vf_vjp(ei, ej, gamma, kappa, delta, rad_on, states[k], stage_k[k, 0],
                kb, sbar, gbar_row, ggamma, gdelta)
        for b in range(B):
            for i in range(n):
                c[b, i] = cnew[b, i] + sbar[b, i] + resid_cot[k, b, i]
    return ggamma, gdelta


def warmup():
    """Compile (or load from cache) every kernel on a tiny system."""
    ei = np.array([0], dtype=np.int64)
    ej = np.array([1], dtype=np.int64)
    gamma = np.ones(2)
    kappa = np.zeros(2)
    delta = np.ones(1)
    T0 = np.zeros((1, 2))
    inputs = np.zeros((3, 1, 2))
    out = forward_window(ei, ej, gamma, kappa, delta, T0, inputs, 0.1, True, True, 200.0)
    res = forward_window_stored(ei, ej, gamma, kappa, delta, T0, inputs, 0.1, True, True, 200.0)
    adjoint_window(ei, ej, gamma, kappa, delta, 0.1, True, True, 200.0,
                   res[3], res[4], res[5], res[6], np.zeros_like(res[3]))
    return out[0] == STATUS_OK
