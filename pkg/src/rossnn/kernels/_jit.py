"""Numba-compiled twins of :mod:`rossnn.kernels._numpy`."""

import numpy as np
from numba import njit


@njit(cache=True)
def narma_recursion(u, order, guard):
    n = u.shape[0]
    y = np.zeros(n)
    for k in range(n - 1):
        acc = 0.0
        for i in range(1, order + 1):
            if k - i >= 0:
                acc += y[k - i]
        u_old = u[k - order] if k - order >= 0 else 0.0
        y[k + 1] = 0.3 * y[k] + 0.05 * y[k] * acc + 1.5 * u_old * u[k] + 0.1
        if not abs(y[k + 1]) < guard:
            return y, k + 1
    return y, -1


@njit(cache=True)
def viterbi(rx, levels, taps, offset):
    n = rx.shape[0]
    m = levels.shape[0]
    nu = taps.shape[0] - 1
    out = np.empty(n, dtype=np.int64)

    if nu == 0:
        total = 0.0
        for k in range(n):
            best = np.inf
            arg = 0
            for j in range(m):
                d = (rx[k] - offset - taps[0] * levels[j]) ** 2
                if d < best:
                    best = d
                    arg = j
            out[k] = arg
            total += best
        return out, total

    n_states = m**nu
    block = m ** (nu - 1)
    hist = np.zeros(n_states)
    for st in range(n_states):
        rem = st
        acc = 0.0
        for j in range(1, nu + 1):
            acc += taps[j] * levels[rem % m]
            rem //= m
        hist[st] = acc

    metric = np.zeros(n_states)
    new_metric = np.empty(n_states)
    back = np.empty((n, n_states), dtype=np.int64)
    for k in range(n):
        x = rx[k]
        for ns in range(n_states):
            sym = ns % m
            r = ns // m
            base = offset + taps[0] * levels[sym]
            best = np.inf
            arg = 0
            for q in range(m):
                p = r + block * q
                d = x - (base + hist[p])
                c = metric[p] + d * d
                if c < best:
                    best = c
                    arg = p
            new_metric[ns] = best
            back[k, ns] = arg
        for ns in range(n_states):
            metric[ns] = new_metric[ns]

    s = 0
    best = metric[0]
    for ns in range(1, n_states):
        if metric[ns] < best:
            best = metric[ns]
            s = ns
    for k in range(n - 1, -1, -1):
        out[k] = s % m
        s = back[k, s]
    return out, best


@njit(cache=True)
def lk_integrate(n_out, substeps, dt, e0, n0, pump, g, s_sat, beta, t_n, n_tr,
                 alpha, t_ph, noise):
    field = np.empty(n_out, dtype=np.complex128)
    carriers = np.empty(n_out)
    e = complex(e0)
    nc = float(n0)
    use_noise = noise.shape[0] > 0
    rot = 0.5 * (1.0 + 1j * alpha)
    step = 0
    for k in range(n_out):
        for _ in range(substeps):
            p = e.real * e.real + e.imag * e.imag
            gain = g * (nc - n_tr) / (1.0 + s_sat * p)
            de = rot * (gain - 1.0 / t_ph) * e * dt
            if use_noise:
                de += np.sqrt(2.0 * beta * max(nc, 0.0) * dt) * noise[step]
            dn = (pump - nc / t_n - gain * p) * dt
            e += de
            nc += dn
            step += 1
        p = e.real * e.real + e.imag * e.imag
        if not (p < 1e15 and np.isfinite(nc)):
            return field, carriers, False
        field[k] = e
        carriers[k] = nc
    return field, carriers, True
