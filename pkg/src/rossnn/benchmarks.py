"""Fibre-free tasks: NARMA-10 emulation, memory capacity and power fading.

NARMA and memory-capacity runs share one optical front end: the input
values amplitude-modulate a CW laser, a preamplifier follows, the network
slices the field and every output is photodetected and sampled once per
symbol.  A linear ridge readout over past taps then reconstructs the
target.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import Seeds
from .fiber import FiberSpec, amplify, beta2_from_dispersion, propagate
from .network import NetworkTopology, process
from .pipeline import link_from_config
from .readout import assemble_features, compute_nmse, fit_readout, predict
from .receiver import adc_sample, photodetect
from .signal import SampledWaveform
from .transmitter import SymbolStream, make_rng, modulate

log = logging.getLogger(__name__)


class BenchmarkError(ValueError):
    pass


class NarmaDivergence(BenchmarkError):
    pass


# -- NARMA-10 -------------------------------------------------------------

NARMA_ORDER = 10


@dataclass(frozen=True)
class NarmaConfig:
    n_symbols: int = 4096
    value_range: tuple = (0.0, 0.5)
    seed: int = 0
    guard: float = 10.0
    max_regenerations: int = 10

    def __post_init__(self):
        if self.n_symbols < 100:
            raise BenchmarkError("NARMA needs at least 100 symbols")
        lo, hi = self.value_range
        if not 0 <= lo < hi:
            raise BenchmarkError(f"bad input range {self.value_range}")


def narma10(u, guard: float = 10.0) -> np.ndarray:
    """NARMA-10 response to ``u`` with zero history.

    ``y[n+1] = 0.3 y[n] + 0.05 y[n] sum_{i=1..10} y[n-i] + 1.5 u[n-10] u[n] + 0.1``

    Raises
    ------
    NarmaDivergence
        if ``|y|`` exceeds ``guard``.
    """
    u = np.ascontiguousarray(np.asarray(u, dtype=float))
    if u.ndim != 1:
        raise BenchmarkError("NARMA input must be one-dimensional")
    if u.size and (u.min() < 0 or u.max() > 0.5):
        raise BenchmarkError("NARMA-10 input must lie in [0, 0.5]")
    y, at = kernels.narma_recursion(u, NARMA_ORDER, float(guard))
    if at >= 0:
        raise NarmaDivergence(f"|y| exceeded {guard} at step {at}")
    return y


def generate_narma(cfg: NarmaConfig):
    """Input/target pair; diverging draws are regenerated with a fresh seed.

    Returns ``(u, y, n_regenerations)``.
    """
    lo, hi = cfg.value_range
    for attempt in range(cfg.max_regenerations + 1):
        seed = cfg.seed if attempt == 0 else (cfg.seed, attempt)
        u = make_rng(seed).uniform(lo, hi, cfg.n_symbols)
        try:
            y = narma10(u, cfg.guard)
        except NarmaDivergence as exc:
            log.info("NARMA draw %d diverged (%s), regenerating", attempt, exc)
            continue
        if attempt:
            log.info("NARMA input regenerated %d time(s)", attempt)
        return u, y, attempt
    raise NarmaDivergence(f"still diverging after {cfg.max_regenerations} regenerations")


# -- shared optical front end ---------------------------------------------

NARMA_DEFAULTS = {
    "signal": {"format": "ANALOG", "baud_gbd": 40.0},
    "transmitter": {"oversampling": 8, "mzm_bandwidth_ghz": None, "extinction_ratio_db": 20.0,
                    "power_dbm": 0.0, "laser": {"mode": "phase_noise_cw", "linewidth_khz": 100.0}},
    "amplifier": {"gain_db": 10.0, "noise_figure_db": 5.0},
    "receiver": {"bandwidth_ghz": None},
    "adc": {"bits": None, "analog_bandwidth_ghz": None, "sampling_phase": 0.5},
}


def _merged(cfg: dict, defaults: dict) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in defaults.items()}
    for k, v in (cfg or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def optical_features(values, topology: NetworkTopology | None, cfg: dict, seeds: Seeds,
                     tag: str = "run", subsamples: bool = False) -> np.ndarray:
    """Per-symbol photocurrents ``(n_symbols, n_outputs)`` for analog input ``values``.

    With ``subsamples`` every output contributes all of its samples within
    the symbol period instead of one, giving ``n_outputs * sps`` columns.

    ``cfg`` uses the experiment sections ``signal``, ``transmitter``,
    ``amplifier``, ``receiver`` and ``adc``; missing entries fall back to
    the NARMA setup (40 GBd, 8 samples per symbol, 0 dBm, ER 20 dB,
    10 dB / NF 5 dB preamplifier).
    """
    c = _merged(cfg, NARMA_DEFAULTS)
    c["fiber"] = []
    link = link_from_config(c)
    v = np.asarray(values, dtype=float)
    lo, hi = c["signal"].get("value_range", [float(v.min()), float(v.max())])
    if hi <= lo:
        raise BenchmarkError("input has zero range")
    stream = SymbolStream(v.astype(np.complex128), "ANALOG", link.baud, 0, None, (float(lo), float(hi)))
    w = modulate(stream, link.tx, seeds(tag, "laser"))
    if link.amplifier is not None:
        w = amplify(w, link.amplifier, seeds(tag, "amplifier"))
    outs = [w] if topology is None else process(w, topology)
    cols = []
    phase = link.adc.sampling_phase
    phase = 0.0 if phase == "auto" else float(phase)
    sps = link.tx.oversampling
    phases = [(phase + q / sps) % 1.0 for q in range(sps)] if subsamples else [phase]
    for j, o in enumerate(outs):
        e = photodetect(o, link.pd, seeds(tag, "pd", j))
        for ph in phases:
            cols.append(adc_sample(e, link.adc, link.baud, v.size, ph))
    return np.column_stack(cols)


# -- NARMA experiment -----------------------------------------------------

@dataclass(frozen=True)
class NarmaResult:
    nmse: float
    nmse_train: float
    lam: float
    n_train: int
    n_test: int
    regenerations: int


def run_narma_experiment(topology: NetworkTopology | None, cfg: dict | None = None) -> NarmaResult:
    """Train the readout on the first half of a NARMA trace and score the second.

    The ``narma`` section holds ``n_symbols`` (4096), ``n_train`` and
    ``n_test`` (2000 each), ``washout`` (the symbols dropped before
    training, default the rest), ``taps`` (10 past samples per output)
    and ``latency`` (0).  Features ending at symbol ``n + latency`` predict
    ``y[n+1]``: the latency absorbs the group delay of narrow rings.
    """
    cfg = dict(cfg or {})
    nc = cfg.get("narma", {}) or {}
    seeds = Seeds.from_config(cfg)
    n = int(nc.get("n_symbols", 4096))
    n_train = int(nc.get("n_train", 2000))
    n_test = int(nc.get("n_test", 2000))
    k = int(nc.get("taps", 10))
    lat = int(nc.get("latency", 0))
    washout = int(nc.get("washout", n - 1 - lat - n_train - n_test))
    if lat < 0:
        raise BenchmarkError("latency must be non-negative")
    if washout < k - 1 or washout + n_train + n_test > n - 1 - lat:
        raise BenchmarkError(f"{n} symbols cannot hold washout {washout} + {n_train} + {n_test}")
    u, y, regen = generate_narma(NarmaConfig(n, seed=seeds("narma", "input")))
    cfg.setdefault("signal", {})
    cfg["signal"] = {**cfg["signal"], "value_range": [0.0, 0.5]}
    S = optical_features(u, topology, cfg, seeds, "narma")
    F = assemble_features(S, k, "past")
    # row r ends at symbol F.index[r] = n + latency and targets y[n + 1]
    base = F.index - lat
    sel = (base >= washout) & (base < washout + n_train + n_test)
    X, idx = F.X[sel], base[sel]
    t = y[idx + 1]
    Xtr, ytr = X[:n_train], t[:n_train]
    Xte, yte = X[n_train:], t[n_train:]
    model = fit_readout(Xtr, ytr, nc.get("lambda"))
    return NarmaResult(compute_nmse(predict(model, Xte), yte), compute_nmse(predict(model, Xtr), ytr),
                       model.lam, int(ytr.size), int(yte.size), regen)


# -- memory capacity ------------------------------------------------------

def squared_correlation(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    va, vb = np.var(a), np.var(b)
    if va == 0 or vb == 0:
        raise BenchmarkError("memory function undefined for a constant signal")
    c = np.mean((a - a.mean()) * (b - b.mean()))
    return float(min(c * c / (va * vb), 1.0))


def memory_function(states, u, i: int, n_washout: int, n_train: int, lam=None, taps: int = 1) -> float:
    """``m(i)``: squared correlation between ``u[n-i]`` and its trained reconstruction.

    ``states`` has one row per input sample.  The readout is fitted on
    ``n_train`` rows after the washout and scored on the rest.
    """
    if i < 1:
        raise BenchmarkError("delays start at 1")
    S = np.asarray(states, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    u = np.asarray(u, dtype=float)
    F = assemble_features(S, taps, "past")
    sel = F.index >= max(n_washout, i)
    X, idx = F.X[sel], F.index[sel]
    if idx.size <= n_train + 10:
        raise BenchmarkError("not enough samples left for testing")
    tgt = u[idx - i]
    model = fit_readout(X[:n_train], tgt[:n_train], lam)
    return squared_correlation(predict(model, X[n_train:]), tgt[n_train:])


def memory_capacity(states, u, i_max: int, n_washout: int = 100, n_train: int | None = None,
                    lam=None, taps: int = 1):
    """``MC = sum_{i=1..i_max} m(i)``; returns ``(MC, m)``."""
    u = np.asarray(u, dtype=float)
    if u.size < 50 * i_max:
        raise BenchmarkError(f"input length must be >= 50 * i_max = {50 * i_max}")
    if n_train is None:
        n_train = (u.size - n_washout) // 2
    m = np.array([memory_function(states, u, i, n_washout, n_train, lam, taps)
                  for i in range(1, i_max + 1)])
    return float(m.sum()), m


@dataclass(frozen=True)
class MemoryCapacityConfig:
    i_max: int = 30
    n_symbols: int = 8192
    seed: int = 0
    washout: int = 100
    taps: int = 1
    subsamples: bool = True

    def __post_init__(self):
        if self.n_symbols < 50 * self.i_max:
            raise BenchmarkError("input length must be >= 50 * i_max")


def run_memory_capacity(topology: NetworkTopology | None, cfg: dict | None = None):
    """MC of the optical system for white uniform input in ``[0, 1]``.

    The ``memcap`` section holds ``i_max``, ``n_symbols``, ``washout``,
    ``taps`` (symbols per output fed to the readout, default 1: the
    current symbol only) and ``subsamples`` (default true: use every
    sample of that symbol period).  Returns ``(MC, m)``.
    """
    cfg = dict(cfg or {})
    mc = cfg.get("memcap", {}) or {}
    seeds = Seeds.from_config(cfg)
    spec = MemoryCapacityConfig(int(mc.get("i_max", 30)), int(mc.get("n_symbols", 8192)),
                                seeds("memcap", "input"), int(mc.get("washout", 100)),
                                int(mc.get("taps", 1)), bool(mc.get("subsamples", True)))
    u = make_rng(spec.seed).uniform(0.0, 1.0, spec.n_symbols)
    cfg["signal"] = {**(cfg.get("signal") or {}), "value_range": [0.0, 1.0]}
    S = optical_features(u, topology, cfg, seeds, "memcap", spec.subsamples)
    return memory_capacity(S, u, spec.i_max, spec.washout, None, mc.get("lambda"), spec.taps)


# -- power fading ---------------------------------------------------------

@dataclass(frozen=True)
class FadingProfile:
    frequency: np.ndarray
    magnitude_db: np.ndarray
    analytic_db: np.ndarray
    nulls: np.ndarray
    analytic_nulls: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["frequency_Hz", "magnitude_dB", "analytic_dB"])
            for f, m, a in zip(self.frequency, self.magnitude_db, self.analytic_db):
                wr.writerow([repr(float(f)), repr(float(m)), repr(float(a))])


def fading_nulls(beta2_l: float, f_max: float) -> np.ndarray:
    """Roots of ``cos(2 pi^2 beta2 L f^2)`` below ``f_max``."""
    if beta2_l == 0:
        return np.zeros(0)
    k = np.arange(0, 10_000)
    f = np.sqrt((k + 0.5) / (2 * np.pi * abs(beta2_l)))
    return f[f <= f_max]


def fading_profile(fiber: FiberSpec, sample_rate: float = 320e9, n: int = 2**14,
                   n_tones: int = 256, f_max: float = 60e9, depth: float = 1e-3,
                   power: float = 1e-3, seed: int = 0) -> FadingProfile:
    """Small-signal IM-to-IM response of ``fiber`` followed by a square-law detector.

    A CW carrier is intensity-modulated by a multitone probe of
    ``n_tones`` grid tones up to ``f_max`` with random phases.  The
    detected current is divided by the back-to-back current at every tone
    (so no PD model enters) and the nulls are located as sign changes of
    the real part of that ratio, refined linearly.
    """
    df = sample_rate / n
    bins = np.unique(np.round(np.linspace(1, f_max / df, n_tones)).astype(int))
    freq = bins * df
    t = np.arange(n) / sample_rate
    phases = make_rng(seed).uniform(0, 2 * np.pi, bins.size)
    m = depth * np.sum(np.cos(2 * np.pi * freq[:, None] * t[None, :] + phases[:, None]), axis=0)
    env = np.sqrt(power * (1.0 + m))
    w = SampledWaveform(env.astype(np.complex128), sample_rate)
    ref = np.fft.fft(np.abs(w.samples) ** 2)[bins]
    out = propagate(w, fiber)
    rx = np.fft.fft(np.abs(out.samples) ** 2)[bins]
    ratio = rx / ref
    ratio = ratio / np.abs(ratio[0])
    mag = 20 * np.log10(np.maximum(np.abs(ratio), 1e-12))
    b2l = beta2_from_dispersion(fiber.dispersion, fiber.wavelength) * fiber.length
    ana = 20 * np.log10(np.maximum(np.abs(np.cos(2 * np.pi**2 * b2l * freq**2)), 1e-12))
    re = ratio.real
    s = np.nonzero(np.sign(re[:-1]) * np.sign(re[1:]) < 0)[0]
    nulls = freq[s] + (freq[s + 1] - freq[s]) * re[s] / (re[s] - re[s + 1])
    return FadingProfile(freq, mag, ana, nulls, fading_nulls(b2l, freq[-1]))
