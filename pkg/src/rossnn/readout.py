"""Linear readout: tapped features, ridge training, decisions and metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .transmitter import constellation

log = logging.getLogger(__name__)

LAMBDA_GRID = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)


class ReadoutError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMatrix:
    """Design matrix with a trailing bias column.

    ``index[r]`` is the symbol that row ``r`` is aligned with.
    """

    X: np.ndarray
    index: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def width(self) -> int:
        return self.X.shape[1]


def _as_columns(samples) -> np.ndarray:
    v = getattr(samples, "values", samples)
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2:
        raise ReadoutError("samples must be 1-D or (n_symbols, n_outputs)")
    return v


def window_offsets(k: int, mode: str = "centered") -> np.ndarray:
    """Symbol offsets of a ``k``-tap window relative to the aligned symbol."""
    if mode == "centered":
        return np.arange(-((k - 1) // 2), k // 2 + 1)
    if mode == "past":
        return np.arange(-(k - 1), 1)
    raise ReadoutError(f"unknown window mode {mode!r}")


def assemble_features(samples, k: int, mode: str = "centered") -> FeatureMatrix:
    """Tapped-delay features over all outputs plus a bias column.

    ``centered`` windows need odd ``k`` and span ``-m..+m``; ``past``
    windows span the ``k`` most recent samples.  Edge rows whose window
    would leave the trace are dropped.
    """
    v = _as_columns(samples)
    n, n_out = v.shape
    if k < 1:
        raise ReadoutError("k must be >= 1")
    if mode == "centered" and k % 2 == 0:
        raise ReadoutError(f"centered windows need an odd tap count, got {k}")
    if k >= n:
        raise ReadoutError(f"{k} taps do not fit in a trace of {n} symbols")
    off = window_offsets(k, mode)
    rows = np.arange(-off[0], n - off[-1])
    cols = [v[rows[:, None] + off[None, :], j] for j in range(n_out)]
    X = np.hstack(cols + [np.ones((rows.size, 1))])
    return FeatureMatrix(X, rows)


@dataclass(frozen=True)
class ReadoutModel:
    weights: np.ndarray
    lam: float
    mean: np.ndarray
    std: np.ndarray

    @property
    def width(self) -> int:
        return self.mean.size

    def to_record(self) -> dict:
        """Flat record for the results file."""
        w = np.atleast_2d(self.weights.T)
        rec = {"lambda": repr(self.lam), "width": self.width}
        for t, row in enumerate(w):
            rec[f"w{t}"] = " ".join(repr(float(x)) for x in row)
        rec["mean"] = " ".join(repr(float(x)) for x in self.mean)
        rec["std"] = " ".join(repr(float(x)) for x in self.std)
        return rec


def _stats(X: np.ndarray, standardize: bool):
    mean = np.zeros(X.shape[1])
    std = np.ones(X.shape[1])
    if standardize:
        mean[:-1] = X[:, :-1].mean(axis=0)
        s = X[:, :-1].std(axis=0)
        std[:-1] = np.where(s > 0, s, 1.0)
    return mean, std


def ridge_solve(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """``argmin |Xw - y|^2 + lam |w|^2`` by least squares on the augmented system."""
    n, p = X.shape
    if lam < 0:
        raise ReadoutError("lambda must be non-negative")
    if lam == 0:
        rank = np.linalg.matrix_rank(X)
        if rank < p:
            raise ReadoutError(f"singular system with lambda = 0: rank {rank} < {p} columns")
        return np.linalg.lstsq(X, y, rcond=None)[0]
    A = np.vstack([X, np.sqrt(lam) * np.eye(p)])
    pad = np.zeros((p,) + y.shape[1:])
    return np.linalg.lstsq(A, np.concatenate([y, pad]), rcond=None)[0]


def train_ridge(F, y, lam: float, standardize: bool = True) -> ReadoutModel:
    """Ridge fit on standardised columns; the bias column is left as is.

    ``y`` may be 1-D or have one column per target (I and Q for QAM).
    """
    X = getattr(F, "X", F)
    y = np.asarray(y, dtype=float)
    if y.shape[0] != X.shape[0]:
        raise ReadoutError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
    if X.shape[0] < X.shape[1]:
        log.warning("ridge: %d rows < %d columns", X.shape[0], X.shape[1])
    mean, std = _stats(X, standardize)
    w = ridge_solve((X - mean) / std, y, lam)
    return ReadoutModel(w, float(lam), mean, std)


def predict(model: ReadoutModel, F) -> np.ndarray:
    X = getattr(F, "X", F)
    if X.shape[1] != model.width:
        raise ReadoutError(f"feature width {X.shape[1]} does not match model width {model.width}")
    return ((X - model.mean) / model.std) @ model.weights


def select_lambda(F, y, grid=LAMBDA_GRID, scale: float | None = None, val_fraction: float = 0.25,
                  standardize: bool = True):
    """Pick ``lam`` from ``grid * scale`` by MSE on the last ``val_fraction`` of the rows.

    ``scale`` defaults to the number of fitting rows, which for standardised
    columns is the trace power of each column.  Returns ``(lam, mses)``.
    """
    X = getattr(F, "X", F)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    n_fit = int(round(n * (1 - val_fraction)))
    if n_fit < 2 or n_fit >= n:
        raise ReadoutError("validation split leaves no data")
    scale = n_fit if scale is None else scale
    mses = []
    for g in grid:
        m = train_ridge(X[:n_fit], y[:n_fit], g * scale, standardize)
        r = predict(m, X[n_fit:]) - y[n_fit:]
        mses.append(float(np.mean(r**2)))
    return float(grid[int(np.argmin(mses))] * scale), mses


def fit_readout(F, y, lam=None, grid=LAMBDA_GRID) -> ReadoutModel:
    """Ridge fit with ``lam`` chosen on a validation split when not given."""
    if lam is None:
        lam, _ = select_lambda(F, y, grid)
    return train_ridge(F, y, lam)


# -- decisions ------------------------------------------------------------

def pam_thresholds(levels) -> np.ndarray:
    lv = np.sort(np.asarray(levels, dtype=float))
    return 0.5 * (lv[1:] + lv[:-1])


def level_means(estimates, indices, m: int) -> np.ndarray:
    """Mean estimate per transmitted level (training decision levels)."""
    est = np.asarray(estimates, dtype=float)
    idx = np.asarray(indices)
    out = np.empty(m)
    for k in range(m):
        sel = est[idx == k]
        if sel.size == 0:
            raise ReadoutError(f"level {k} never occurs in the training data")
        out[k] = sel.mean()
    return out


def decide(estimates, fmt: str, levels=None) -> np.ndarray:
    """Nearest-level slicing to constellation indices.

    For PAM4, ``levels`` are the (trained) decision level means, thresholds
    lying midway.  QAM16 slices I and Q independently; QAM32 uses
    minimum distance.  Complex estimates may be passed as an ``(n, 2)`` array.
    """
    est = np.asarray(estimates)
    if est.ndim == 2 and est.shape[1] == 2:
        est = est[:, 0] + 1j * est[:, 1]
    if fmt == "PAM4":
        lv = constellation("PAM4").real if levels is None else np.asarray(levels, dtype=float)
        order = np.argsort(lv)
        return order[np.searchsorted(pam_thresholds(lv), np.real(est))]
    if fmt == "QAM16":
        ax = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(10.0)
        th = pam_thresholds(ax)
        return 4 * np.searchsorted(th, est.real) + np.searchsorted(th, est.imag)
    if fmt == "QAM32":
        pts = constellation("QAM32")
        return np.argmin(np.abs(est[:, None] - pts[None, :]), axis=1)
    raise ReadoutError(f"cannot slice format {fmt!r}")


# -- metrics --------------------------------------------------------------

_GRAY2 = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.int8)


def symbol_bits(indices, fmt: str) -> np.ndarray:
    """Bit labels: Gray per PAM4 level and per QAM16 axis; natural binary for QAM32."""
    idx = np.asarray(indices, dtype=np.int64)
    if fmt == "PAM4":
        return _GRAY2[idx]
    if fmt == "QAM16":
        return np.hstack([_GRAY2[idx // 4], _GRAY2[idx % 4]])
    if fmt == "QAM32":
        return ((idx[:, None] >> np.arange(4, -1, -1)[None, :]) & 1).astype(np.int8)
    raise ReadoutError(f"no bit mapping for format {fmt!r}")


def _check_lengths(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape[0] != b.shape[0]:
        raise ReadoutError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] == 0:
        raise ReadoutError("empty sequences")
    return a, b


def compute_ser(decided, reference) -> float:
    a, b = _check_lengths(decided, reference)
    return float(np.mean(a != b))


def compute_ber(decided, reference, fmt: str | None = None) -> float:
    """Bit error rate.

    With ``fmt`` the inputs are symbol indices and are mapped to bits first;
    without it they are compared elementwise (already bits).
    """
    a, b = _check_lengths(decided, reference)
    if fmt is None:
        return float(np.mean(a != b))
    return float(np.mean(symbol_bits(a, fmt) != symbol_bits(b, fmt)))


def compute_nmse(estimate, reference) -> float:
    e, r = _check_lengths(estimate, reference)
    e, r = e.astype(float), r.astype(float)
    var = np.var(r)
    if var == 0:
        raise ReadoutError("reference has zero variance")
    return float(np.mean((e - r) ** 2) / var)


def tap_count(dispersion_ps_nm_km: float, bandwidth_nm: float, length_km: float, baud: float,
              lo: int = 11, hi: int = 71) -> int:
    """Odd FFE length covering the dispersive spread ``D * dlambda * L``."""
    spread = abs(dispersion_ps_nm_km) * bandwidth_nm * length_km * 1e-12
    k = 2 * int(np.ceil(spread * baud / 2)) + 1
    return int(min(max(k, lo), hi))
