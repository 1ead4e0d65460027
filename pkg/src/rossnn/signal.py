"""Complex-baseband waveforms and frequency-domain linear operations.

All filtering in the package is multiplication on the periodic FFT grid
(circular convolution).  Transforms use the unitary ``norm="ortho"``
convention so that Parseval holds without scale factors, and the phase
convention is fixed so that ``exp(-2j*pi*f*tau)`` delays a signal by ``tau``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class SignalError(ValueError):
    """Raised for malformed waveforms, spectra or responses."""


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(int(n) - 1, 0).bit_length()


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SampledWaveform:
    """Uniformly sampled complex envelope.

    ``|samples|**2`` is instantaneous power in W.  ``center_offset`` is the
    frequency of the grid center relative to the optical carrier.
    """

    samples: np.ndarray
    sample_rate: float
    center_offset: float = 0.0

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.complex128)
        if x.ndim != 1:
            raise SignalError(f"samples must be one-dimensional, got shape {x.shape}")
        if x.size < 2:
            raise SignalError("a waveform needs at least 2 samples")
        if not self.sample_rate > 0:
            raise SignalError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", _frozen(x))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "center_offset", float(self.center_offset))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def energy(self) -> float:
        """Total energy in J."""
        return float(np.sum(self.power) / self.sample_rate)

    def mean_power(self) -> float:
        return float(np.mean(self.power))

    def with_samples(self, samples) -> "SampledWaveform":
        return SampledWaveform(samples, self.sample_rate, self.center_offset)

    def scaled(self, k) -> "SampledWaveform":
        return self.with_samples(self.samples * k)


@dataclass(frozen=True)
class Spectrum:
    """DFT bins in ascending frequency order together with their frequencies."""

    bins: np.ndarray
    freqs: np.ndarray
    sample_rate: float
    center_offset: float = 0.0

    def __post_init__(self):
        b = np.array(self.bins, dtype=np.complex128)
        f = np.array(self.freqs, dtype=float)
        if b.shape != f.shape or b.ndim != 1:
            raise SignalError("bins and freqs must be matching 1-D arrays")
        object.__setattr__(self, "bins", _frozen(b))
        object.__setattr__(self, "freqs", _frozen(f))


@dataclass(frozen=True)
class FrequencyResponse:
    """Complex gain as a function of baseband frequency (Hz).

    ``bandwidth`` is the nominal full 3-dB width, ``center`` the nominal
    center and ``peak`` a known upper bound on ``|H|`` (NaN if unknown); all
    three are metadata.  Responses multiply: ``H1 * H2`` is the cascade.
    """

    func: Callable[[np.ndarray], np.ndarray]
    bandwidth: float = float("nan")
    center: float = 0.0
    label: str = field(default="", compare=False)
    peak: float = float("nan")

    def __call__(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return np.broadcast_to(np.asarray(self.func(f), dtype=np.complex128), f.shape)

    def __mul__(self, other):
        if isinstance(other, FrequencyResponse):
            a, b = self.func, other.func
            return FrequencyResponse(lambda f: a(f) * b(f), self.bandwidth, self.center,
                                     f"{self.label}*{other.label}", self.peak * other.peak)
        if np.isscalar(other):
            a = self.func
            k = complex(other)
            return FrequencyResponse(lambda f: k * a(f), self.bandwidth, self.center, self.label,
                                     abs(k) * self.peak)
        return NotImplemented

    __rmul__ = __mul__

    def magnitude_db(self, f) -> np.ndarray:
        return 20 * np.log10(np.maximum(np.abs(self(f)), 1e-300))


def constant_response(value: complex = 1.0) -> FrequencyResponse:
    v = complex(value)
    return FrequencyResponse(lambda f: np.full(np.shape(f), v), label="const", peak=abs(v))


def delay_response(tau: float) -> FrequencyResponse:
    """Pure delay ``exp(-2j*pi*f*tau)``."""
    return FrequencyResponse(lambda f: np.exp(-2j * np.pi * f * tau), label=f"delay({tau:g})", peak=1.0)


def grid_frequencies(n: int, sample_rate: float) -> np.ndarray:
    """Baseband bin frequencies in FFT (unshifted) order."""
    return np.fft.fftfreq(n, d=1.0 / sample_rate)


def forward_spectrum(w: SampledWaveform) -> Spectrum:
    n = len(w)
    if not is_power_of_two(n):
        raise SignalError(f"waveform length {n} is not a power of two")
    bins = np.fft.fftshift(np.fft.fft(w.samples, norm="ortho"))
    freqs = np.fft.fftshift(grid_frequencies(n, w.sample_rate))
    return Spectrum(bins, freqs, w.sample_rate, w.center_offset)


def inverse_spectrum(s: Spectrum) -> SampledWaveform:
    n = s.bins.size
    if not is_power_of_two(n):
        raise SignalError(f"spectrum length {n} is not a power of two")
    expected = np.fft.fftshift(grid_frequencies(n, s.sample_rate))
    df = s.sample_rate / n
    if not np.allclose(s.freqs, expected, rtol=0, atol=1e-9 * df):
        raise SignalError("spectrum bins are not on the uniform grid implied by its sample rate")
    x = np.fft.ifft(np.fft.ifftshift(s.bins), norm="ortho")
    return SampledWaveform(x, s.sample_rate, s.center_offset)


def sample_response(H: FrequencyResponse, n: int, sample_rate: float,
                    center_offset: float = 0.0) -> np.ndarray:
    """Evaluate ``H`` on the FFT grid (unshifted order), checking finiteness."""
    f = grid_frequencies(n, sample_rate) + center_offset
    h = np.asarray(H(f), dtype=np.complex128)
    bad = ~np.isfinite(h)
    if bad.any():
        raise SignalError(f"response is not finite at f = {f[bad][0]:.6g} Hz")
    return h


def apply_response(w: SampledWaveform, H: FrequencyResponse) -> SampledWaveform:
    """Filter ``w`` by ``H``; bin ``k`` is multiplied by ``H(f_k + center_offset)``."""
    h = sample_response(H, len(w), w.sample_rate, w.center_offset)
    y = np.fft.ifft(np.fft.fft(w.samples) * h)
    return w.with_samples(y)


def apply_responses(w: SampledWaveform, responses) -> list[SampledWaveform]:
    """Filter one waveform by several responses, sharing the forward FFT."""
    X = np.fft.fft(w.samples)
    out = []
    for H in responses:
        h = sample_response(H, len(w), w.sample_rate, w.center_offset)
        out.append(w.with_samples(np.fft.ifft(X * h)))
    return out
