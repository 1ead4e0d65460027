"""Pure-numpy reference implementations of the hot loops.

Every function here has a twin in :mod:`rossnn.kernels._jit` with the same
signature and the same floating-point operation order, so both backends give
identical results up to compiler reassociation.
"""

import numpy as np


def narma_recursion(u, order, guard):
    """Run the NARMA recursion with zero initial history.

    Returns ``(y, diverged_at)`` where ``diverged_at`` is -1 when ``|y|``
    stayed below ``guard`` for the whole sequence.
    """
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


def viterbi(rx, levels, taps, offset):
    """Full-traceback Viterbi detector for a real linear ISI channel.

    The channel model is ``rx[n] = offset + sum_j taps[j] * x[n - j]`` with
    symbols drawn from ``levels``; symbols preceding the block are free.

    Returns the decided level indices and the winning path metric.
    """
    n = rx.shape[0]
    m = levels.shape[0]
    nu = taps.shape[0] - 1
    n_states = m**nu
    block = m ** (nu - 1) if nu > 0 else 1

    # state s encodes the last nu symbols: s = x[n-1] + m*x[n-2] + ...
    states = np.arange(n_states)
    hist = np.zeros(n_states)
    rem = states.copy()
    for j in range(1, nu + 1):
        hist += taps[j] * levels[rem % m]
        rem //= m
    # expected[s', q]: new state s' = sym + m*r, predecessor s = r + block*q
    new_states = np.arange(n_states) if nu > 0 else np.arange(1)
    sym = new_states % m if nu > 0 else np.zeros(1, dtype=np.int64)
    r = new_states // m if nu > 0 else np.zeros(1, dtype=np.int64)
    if nu > 0:
        pred = r[:, None] + block * np.arange(m)[None, :]
        expected = offset + taps[0] * levels[sym][:, None] + hist[pred]
    else:
        pred = np.zeros((1, 1), dtype=np.int64)
        expected = None

    if nu == 0:
        out = np.empty(n, dtype=np.int64)
        total = 0.0
        for k in range(n):
            d = (rx[k] - offset - taps[0] * levels) ** 2
            out[k] = int(np.argmin(d))
            total += d[out[k]]
        return out, total

    metric = np.zeros(n_states)
    back = np.empty((n, n_states), dtype=np.int64)
    for k in range(n):
        cand = metric[pred] + (rx[k] - expected) ** 2
        q = np.argmin(cand, axis=1)
        back[k] = pred[np.arange(n_states), q]
        metric = cand[np.arange(n_states), q]

    out = np.empty(n, dtype=np.int64)
    s = int(np.argmin(metric))
    best = metric[s]
    for k in range(n - 1, -1, -1):
        out[k] = s % m
        s = back[k, s]
    return out, best


def lk_integrate(n_out, substeps, dt, e0, n0, pump, g, s_sat, beta, t_n, n_tr,
                 alpha, t_ph, noise):
    """Euler-Maruyama integration of the solitary-laser rate equations.

    ``pump`` is I/q (carriers per second).  ``noise`` holds one complex
    unit-variance sample per integration step, or is empty for noise-free
    runs.  Returns ``(field, carriers, ok)``.
    """
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
