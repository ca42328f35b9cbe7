"""Compiled inner loops."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def sample_layer(drive, uniforms, decay_m, kappa0, rho0, theta, delta_u, dt, max_exp):
    """Sequential escape-noise sampling for independent neurons.

    ``drive`` (n, K) is the synaptic part of u; the reset part is built here
    from the neuron's own spikes. ``uniforms`` is (K, n), step-major, matching
    the order in which a step-by-step simulation would consume them.
    """
    n, K = drive.shape
    spikes = np.zeros((n, K))
    u = np.empty((n, K))
    rho = np.empty((n, K))
    reset = np.empty((n, K))
    for j in range(n):
        r = 0.0
        for t in range(K):
            rv = kappa0 * r
            uu = drive[j, t] + rv
            x = (uu - theta) / delta_u
            if x > max_exp:
                x = max_exp
            rr = rho0 * math.exp(x)
            p = rr * dt
            if p > 1.0:
                p = 1.0
            s = 1.0 if uniforms[t, j] < p else 0.0
            spikes[j, t] = s
            u[j, t] = uu
            rho[j, t] = rr
            reset[j, t] = rv
            r = (r + s) * decay_m
    return spikes, u, rho, reset


@njit(cache=True)
def exp_filter_rows(x, decay):
    """Row-wise y[t] = sum_{s < t} x[s] decay**(t - s)."""
    n, K = x.shape
    y = np.empty((n, K))
    for j in range(n):
        s = 0.0
        for t in range(K):
            y[j, t] = s
            s = (s + x[j, t]) * decay
    return y


@njit(cache=True)
def psp_filter_rows(x, a, b, eps0):
    n, K = x.shape
    y = np.empty((n, K))
    for j in range(n):
        sa = 0.0
        sb = 0.0
        for t in range(K):
            y[j, t] = eps0 * (sa - sb)
            sa = (sa + x[j, t]) * a
            sb = (sb + x[j, t]) * b
    return y


@njit(cache=True)
def delayed_impulses(x, w, delays):
    """imp[h, t + d_hi] += w_hi * x[i, t], dropping arrivals at or after K."""
    n_i, K = x.shape
    n_h = w.shape[0]
    imp = np.zeros((n_h, K))
    for i in range(n_i):
        for t in range(K):
            c = x[i, t]
            if c != 0.0:
                for h in range(n_h):
                    s = t + delays[h, i]
                    if s < K:
                        imp[h, s] += w[h, i] * c
    return imp


@njit(cache=True)
def gated_input_sum(y, coef, psp_in, delays):
    """dw[h, i] = sum_t y[h, t] coef[h, t] psp_in[i, t - d_hi]."""
    n_h, K = y.shape
    n_i = psp_in.shape[0]
    dw = np.zeros((n_h, n_i))
    for h in range(n_h):
        for t in range(K):
            c = y[h, t]
            if c != 0.0:
                c = c * coef[h, t]
                for i in range(n_i):
                    lag = t - delays[h, i]
                    if lag >= 0:
                        dw[h, i] += c * psp_in[i, lag]
    return dw
