"""Digital reference equalizers: Volterra NLE and Viterbi MLSE.

The FFE baseline is the plain readout of :mod:`rossnn.readout` applied to a
single photodiode, so it has no code of its own here.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from . import kernels
from .readout import FeatureMatrix, ReadoutError, window_offsets


class BaselineError(ValueError):
    pass


@dataclass(frozen=True)
class VolterraSpec:
    k1: int
    k2: int = 0
    k3: int = 0
    lam: float | None = None

    def __post_init__(self):
        if not self.k1 >= self.k2 >= self.k3 >= 0 or self.k1 < 1:
            raise BaselineError(f"need k1 >= k2 >= k3 >= 0 and k1 >= 1, got {(self.k1, self.k2, self.k3)}")

    @property
    def n_features(self) -> int:
        return self.k1 + comb(self.k2 + 1, 2) + comb(self.k3 + 2, 3) + 1


def multiplication_count(spec: VolterraSpec, kernel: str = "symmetric") -> int:
    """Real multiplications per output symbol.

    ``symmetric`` counts the unique-product implementation (a p-th order
    term costs p multiplications: p-1 to form the product, one weight);
    ``full`` counts the direct form with the whole ``k_p**p`` kernel.
    """
    k1, k2, k3 = spec.k1, spec.k2, spec.k3
    if kernel == "symmetric":
        return k1 + 2 * comb(k2 + 1, 2) + 3 * comb(k3 + 2, 3)
    if kernel == "full":
        return k1 + 2 * k2**2 + 3 * k3**3
    raise BaselineError(f"unknown kernel form {kernel!r}")


def volterra_features(x, spec: VolterraSpec) -> FeatureMatrix:
    """Linear, unique pairwise and unique triple products over centred windows, plus bias."""
    x = np.asarray(getattr(x, "values", x), dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise BaselineError("Volterra features take a single output")
        x = x[:, 0]
    n = x.size
    if spec.k1 >= n:
        raise ReadoutError(f"{spec.k1} taps do not fit in a trace of {n} symbols")
    off1 = window_offsets(spec.k1)
    lo, hi = off1[0], off1[-1]
    for k in (spec.k2, spec.k3):
        if k:
            o = window_offsets(k)
            lo, hi = min(lo, o[0]), max(hi, o[-1])
    rows = np.arange(-lo, n - hi)
    cols = [x[rows[:, None] + off1[None, :]]]
    for order, k in ((2, spec.k2), (3, spec.k3)):
        if k == 0:
            continue
        W = x[rows[:, None] + window_offsets(k)[None, :]]
        combos = list(combinations_with_replacement(range(k), order))
        P = np.empty((rows.size, len(combos)))
        for c, idx in enumerate(combos):
            p = W[:, idx[0]].copy()
            for i in idx[1:]:
                p *= W[:, i]
            P[:, c] = p
        cols.append(P)
    cols.append(np.ones((rows.size, 1)))
    return FeatureMatrix(np.hstack(cols), rows)


@dataclass(frozen=True)
class ChannelEstimate:
    taps: np.ndarray
    offset: float
    delay: int
    residual: float

    @property
    def memory(self) -> int:
        return self.taps.size - 1


def _ls_channel(rx, tx, nu, delay, fit_offset):
    n = min(rx.size - delay, tx.size)
    k = np.arange(nu, n)
    A = np.column_stack([tx[k - j] for j in range(nu + 1)] + ([np.ones(k.size)] if fit_offset else []))
    b = rx[k + delay]
    rank = np.linalg.matrix_rank(A)
    if rank < A.shape[1]:
        raise BaselineError(f"channel estimate is rank deficient: rank {rank} < {A.shape[1]}")
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    res = float(np.sqrt(np.mean((A @ sol - b) ** 2)))
    taps = sol[: nu + 1]
    off = float(sol[nu + 1]) if fit_offset else 0.0
    return ChannelEstimate(taps, off, delay, res)


def estimate_channel(rx, tx, nu: int, delay="auto", fit_offset: bool = False,
                     max_delay: int | None = None) -> ChannelEstimate:
    """Least-squares FIR fit ``rx[n + delay] ~ offset + sum_j h_j tx[n - j]``.

    ``delay="auto"`` tries ``0..max_delay`` (default ``nu + 2``) and keeps the
    smallest residual.
    """
    rx = np.asarray(rx, dtype=float)
    tx = np.asarray(tx, dtype=float)
    if nu < 0:
        raise BaselineError("channel memory must be non-negative")
    if min(rx.size, tx.size) < 10 * (nu + 1):
        raise BaselineError(f"training length must be >= {10 * (nu + 1)} symbols")
    if delay != "auto":
        return _ls_channel(rx, tx, nu, int(delay), fit_offset)
    md = nu + 2 if max_delay is None else max_delay
    best = None
    for d in range(md + 1):
        est = _ls_channel(rx, tx, nu, d, fit_offset)
        if best is None or est.residual < best.residual:
            best = est
    return best


def mlse_viterbi(rx, h, levels, offset: float = 0.0, delay: int = 0,
                 state_budget: int = 4096) -> np.ndarray:
    """Maximum-likelihood sequence under ``rx[n+delay] = offset + sum_j h_j x[n-j] + noise``.

    ``h`` may be a :class:`ChannelEstimate`, in which case its offset and
    delay are used.  Returns level indices for symbols ``0..len(rx)-delay-1``.
    """
    if isinstance(h, ChannelEstimate):
        offset, delay, h = h.offset, h.delay, h.taps
    h = np.asarray(h, dtype=float)
    levels = np.asarray(levels, dtype=float)
    nu = h.size - 1
    if levels.size**nu > state_budget:
        raise BaselineError(f"{levels.size}^{nu} = {levels.size**nu} states exceed the budget {state_budget}")
    y = np.ascontiguousarray(np.asarray(rx, dtype=float)[delay:])
    idx, _ = kernels.viterbi(y, levels, h, float(offset))
    return idx
