"""Square-law photodetection and ADC sampling."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.constants import e as Q_E

from .filters import ButterworthSpec, butterworth_response
from .signal import SampledWaveform, sample_response
from .transmitter import make_rng


class ReceiverError(ValueError):
    pass


@dataclass(frozen=True)
class PdSpec:
    responsivity: float = 0.8
    bandwidth: float | None = 35e9
    thermal_noise_density: float = 10e-12
    shot_noise: bool = True
    thermal_noise: bool = True
    order: int = 2

    def __post_init__(self):
        if not self.responsivity > 0:
            raise ReceiverError("responsivity must be positive")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ReceiverError("PD bandwidth must be positive")
        if self.thermal_noise_density < 0:
            raise ReceiverError("thermal noise density must be non-negative")

    @property
    def noiseless(self) -> "PdSpec":
        return PdSpec(self.responsivity, self.bandwidth, self.thermal_noise_density, False, False, self.order)


@dataclass(frozen=True)
class AdcSpec:
    """``sampling_phase`` is a fraction of the symbol period or ``"auto"``.

    ``full_scale`` of ``None`` means mean +- ``full_scale_sigma`` standard
    deviations of the training segment.
    """

    bits: int | None = 8
    analog_bandwidth: float | None = 35e9
    sampling_phase: object = "auto"
    full_scale: tuple | None = None
    full_scale_sigma: float = 4.0
    order: int = 2

    def __post_init__(self):
        if self.bits is not None and not 1 <= self.bits <= 16:
            raise ReceiverError("ADC bits must lie in [1, 16]")
        if self.sampling_phase != "auto" and not 0 <= float(self.sampling_phase) < 1:
            raise ReceiverError("sampling_phase must be 'auto' or a fraction in [0, 1)")


@dataclass(frozen=True)
class ElectricalWaveform:
    """Real photocurrent samples in A."""

    samples: np.ndarray
    sample_rate: float

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class DecisionSamples:
    """One sample per symbol per output, shape ``(n_symbols, n_outputs)``."""

    values: np.ndarray
    phase: float = 0.0

    @property
    def n_symbols(self) -> int:
        return self.values.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.values.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["symbol_index", "output_index", "value"])
            for i in range(self.n_symbols):
                for j in range(self.n_outputs):
                    wr.writerow([i, j, repr(float(self.values[i, j]))])


def _lowpass(x: np.ndarray, fs: float, bandwidth: float, order: int) -> np.ndarray:
    h = sample_response(butterworth_response(ButterworthSpec(order, bandwidth)), x.size, fs)
    return np.fft.ifft(np.fft.fft(x) * h).real


def photodetect(w: SampledWaveform, pd: PdSpec, seed=0) -> ElectricalWaveform:
    """``R |E|^2`` plus white shot and thermal noise, then the PD lowpass.

    The white sources have one-sided densities ``2 q R |E|^2`` and
    ``density**2`` over ``fs/2``; the lowpass shapes them to its noise
    bandwidth.
    """
    fs = w.sample_rate
    i = pd.responsivity * np.abs(w.samples) ** 2
    if pd.shot_noise or pd.thermal_noise:
        psd = np.zeros_like(i)
        if pd.shot_noise:
            psd = psd + 2 * Q_E * i
        if pd.thermal_noise:
            psd = psd + pd.thermal_noise_density**2
        rng = make_rng(seed)
        i = i + np.sqrt(psd * fs / 2) * rng.standard_normal(i.size)
    if pd.bandwidth is not None:
        i = _lowpass(i, fs, pd.bandwidth, pd.order)
    return ElectricalWaveform(i, fs)


def quantize(x: np.ndarray, bits: int, lo: float, hi: float) -> np.ndarray:
    """Mid-rise uniform quantizer with ``2**bits`` levels over ``[lo, hi]``, clipping outside."""
    if not hi > lo:
        raise ReceiverError("full-scale range is empty")
    n = 2**bits
    lsb = (hi - lo) / n
    code = np.clip(np.floor((np.asarray(x) - lo) / lsb), 0, n - 1)
    return lo + (code + 0.5) * lsb


def samples_per_symbol(sample_rate: float, baud: float) -> int:
    sps = sample_rate / baud
    k = int(round(sps))
    if k < 1 or abs(sps - k) > 1e-9 * sps:
        raise ReceiverError(f"sample rate {sample_rate:g} is not an integer multiple of the baud {baud:g}")
    return k


def analog_front_end(e: ElectricalWaveform, adc: AdcSpec) -> np.ndarray:
    if adc.analog_bandwidth is None:
        return np.asarray(e.samples, dtype=float)
    return _lowpass(np.asarray(e.samples, dtype=float), e.sample_rate, adc.analog_bandwidth, adc.order)


def decimate(x: np.ndarray, sps: int, phase: float, n_symbols: int) -> np.ndarray:
    off = int(round(phase * sps)) % sps
    idx = off + sps * np.arange(n_symbols)
    if idx[-1] >= x.size:
        raise ReceiverError(f"trace of {x.size} samples does not cover {n_symbols} symbols")
    return x[idx]


def full_scale_range(train: np.ndarray, sigma: float) -> tuple[float, float]:
    m, s = float(np.mean(train)), float(np.std(train))
    if s == 0:
        s = max(abs(m), 1e-30) * 1e-3
    return m - sigma * s, m + sigma * s


def adc_sample(e: ElectricalWaveform, adc: AdcSpec, baud: float, n_symbols: int,
               phase: float | None = None, full_scale: tuple | None = None,
               n_train: int | None = None) -> np.ndarray:
    """Filter, decimate and quantize one output to ``n_symbols`` values.

    ``phase`` overrides ``adc.sampling_phase`` (required when that is
    ``"auto"``; see :func:`optimize_phase`).  Without an explicit
    ``full_scale`` the range is derived from the first ``n_train`` samples.
    """
    if phase is None:
        if adc.sampling_phase == "auto":
            raise ReceiverError("sampling_phase is 'auto': pass the phase chosen by optimize_phase")
        phase = float(adc.sampling_phase)
    sps = samples_per_symbol(e.sample_rate, baud)
    x = decimate(analog_front_end(e, adc), sps, phase, n_symbols)
    if adc.bits is None:
        return x
    if full_scale is None:
        full_scale = adc.full_scale
    if full_scale is None:
        full_scale = full_scale_range(x[: n_train or x.size], adc.full_scale_sigma)
    return quantize(x, adc.bits, *full_scale)


def optimize_phase(e_list, adc: AdcSpec, baud: float, n_symbols: int, score, n_train=None):
    """Choose the sampling phase minimising ``score(DecisionSamples)``.

    ``score`` should only look at training symbols.  Returns
    ``(phase, scores)`` over the candidate phases ``k/sps``.
    """
    sps = samples_per_symbol(e_list[0].sample_rate, baud)
    filtered = [analog_front_end(e, adc) for e in e_list]
    scores = []
    for k in range(sps):
        cols = []
        for x in filtered:
            v = decimate(x, sps, k / sps, n_symbols)
            if adc.bits is not None:
                fsr = adc.full_scale or full_scale_range(v[: n_train or v.size], adc.full_scale_sigma)
                v = quantize(v, adc.bits, *fsr)
            cols.append(v)
        scores.append(float(score(DecisionSamples(np.column_stack(cols), k / sps))))
    best = int(np.argmin(scores))
    return best / sps, scores


def digitize(e_list, adc: AdcSpec, baud: float, n_symbols: int, phase: float,
             n_train: int | None = None, full_scales=None) -> DecisionSamples:
    """Sample every output at one common phase."""
    cols = []
    for j, e in enumerate(e_list):
        fs = None if full_scales is None else full_scales[j]
        cols.append(adc_sample(e, adc, baud, n_symbols, phase, fs, n_train))
    return DecisionSamples(np.column_stack(cols), phase)
