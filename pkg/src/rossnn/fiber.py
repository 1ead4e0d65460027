"""Scalar fibre propagation and optical amplification.

The envelope obeys ``dA/dz = -(alpha/2) A - i(beta2/2) d2A/dt2 + i gamma |A|^2 A``.
With numpy's ``exp(+2j*pi*f*t)`` inverse-transform convention the linear
operator in the frequency domain is ``exp(-alpha z / 2 + 2j*pi**2*beta2*z*f**2)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT, h as H_PLANCK

from .signal import FrequencyResponse, SampledWaveform, grid_frequencies
from .transmitter import make_rng

log = logging.getLogger(__name__)


class FiberError(ValueError):
    pass


def beta2_from_dispersion(d: float, wavelength: float) -> float:
    """GVD ``beta2`` (s^2/m) from ``D`` (s/m^2) at ``wavelength`` (m)."""
    return -d * wavelength**2 / (2 * np.pi * C_LIGHT)


@dataclass(frozen=True)
class FiberSpec:
    """Single-mode fibre span, SI units internally.

    ``dispersion`` is D in s/m^2 (17 ps/(nm km) = 17e-6 s/m^2), ``alpha_db_km``
    the attenuation and ``gamma`` the Kerr coefficient in 1/(W m).
    """

    length: float
    dispersion: float = 17e-6
    alpha_db_km: float = 0.0
    gamma: float = 0.0
    wavelength: float = 1550e-9
    max_step: float = 50.0
    max_phase: float | None = None

    def __post_init__(self):
        if self.length < 0:
            raise FiberError("fibre length must be non-negative")
        if not self.max_step > 0:
            raise FiberError("max_step must be positive")
        if self.alpha_db_km < 0 or self.gamma < 0:
            raise FiberError("alpha and gamma must be non-negative")

    @classmethod
    def from_config(cls, cfg: dict) -> "FiberSpec":
        """Build from config units: ``length_km``, ``dispersion_ps_nm_km``,
        ``alpha_db_km``, ``gamma_per_w_km``, ``wavelength_nm``, ``max_step_m``."""
        mp = cfg.get("max_phase_rad")
        return cls(
            length=float(cfg.get("length_km", 0.0)) * 1e3,
            dispersion=float(cfg.get("dispersion_ps_nm_km", 17.0)) * 1e-6,
            alpha_db_km=float(cfg.get("alpha_db_km", 0.0)),
            gamma=float(cfg.get("gamma_per_w_km", 0.0)) * 1e-3,
            wavelength=float(cfg.get("wavelength_nm", 1550.0)) * 1e-9,
            max_step=float(cfg.get("max_step_m", 50.0)),
            max_phase=None if mp is None else float(mp),
        )

    @property
    def beta2(self) -> float:
        return beta2_from_dispersion(self.dispersion, self.wavelength)

    @property
    def alpha(self) -> float:
        """Power attenuation in 1/m."""
        return self.alpha_db_km * np.log(10.0) / 10.0 / 1e3


@dataclass(frozen=True)
class AmplifierSpec:
    gain_db: float
    noise_figure_db: float = 5.0
    frequency: float = 193.4e12
    noise: bool = True

    def __post_init__(self):
        if self.gain_db < 0:
            raise FiberError("amplifier gain must be >= 0 dB")
        if self.noise and self.noise_figure_db < 3.0:
            log.warning("noise figure %.2f dB is below the 3 dB quantum limit", self.noise_figure_db)

    @property
    def n_sp(self) -> float:
        return 10 ** (self.noise_figure_db / 10) / 2


def analytic_dispersion_response(beta2_l: float) -> FrequencyResponse:
    """Lossless dispersion ``exp(+2j*pi**2*beta2*L*f**2)`` for accumulated ``beta2*L`` (s^2)."""
    k = 2 * np.pi**2 * beta2_l
    return FrequencyResponse(lambda f: np.exp(1j * k * np.asarray(f) ** 2), label="dispersion", peak=1.0)


def occupied_bandwidth(x: np.ndarray, sample_rate: float, fraction: float = 0.99) -> float:
    """One-sided ``|f|`` below which ``fraction`` of the power lies."""
    X = np.abs(np.fft.fft(x)) ** 2
    f = np.abs(grid_frequencies(x.size, sample_rate))
    order = np.argsort(f, kind="stable")
    cum = np.cumsum(X[order])
    if cum[-1] == 0:
        return 0.0
    k = int(np.searchsorted(cum, fraction * cum[-1]))
    return float(f[order][min(k, f.size - 1)])


def _linear_operator(fiber: FiberSpec, f2: np.ndarray, dz: float) -> np.ndarray:
    return np.exp(-fiber.alpha * dz / 2 + 2j * np.pi**2 * fiber.beta2 * dz * f2)


def propagate(w: SampledWaveform, fiber: FiberSpec) -> SampledWaveform:
    """Symmetric split-step Fourier integration over ``fiber.length``.

    With ``gamma == 0`` the span is one exact linear step.  Otherwise the
    step is ``min(max_step, max_phase / (gamma * max|A|^2))`` (the latter
    only when ``max_phase`` is set), shrunk so that steps tile the span.
    """
    if fiber.length == 0:
        return w
    f = grid_frequencies(len(w), w.sample_rate) + w.center_offset
    f2 = f * f
    A = np.array(w.samples)
    if fiber.gamma == 0:
        out = np.fft.ifft(np.fft.fft(A) * _linear_operator(fiber, f2, fiber.length))
        return w.with_samples(out)

    bw = occupied_bandwidth(A, w.sample_rate)
    if bw > w.sample_rate / 4:
        raise FiberError(f"aliasing guard: 99% bandwidth {bw:.4g} Hz exceeds sample_rate/4 "
                         f"= {w.sample_rate / 4:.4g} Hz; increase oversampling")

    z = 0.0
    n_steps = 0
    L = fiber.length
    while z < L * (1 - 1e-12):
        h = min(fiber.max_step, L - z)
        if fiber.max_phase is not None:
            pk = float(np.max(np.abs(A) ** 2))
            if pk > 0:
                h = min(h, fiber.max_phase / (fiber.gamma * pk))
        lin = _linear_operator(fiber, f2, h / 2)
        A = np.fft.ifft(np.fft.fft(A) * lin)
        A = A * np.exp(1j * fiber.gamma * np.abs(A) ** 2 * h)
        A = np.fft.ifft(np.fft.fft(A) * lin)
        z += h
        n_steps += 1
        if not np.all(np.isfinite(A)):
            raise FiberError(f"non-finite field after step {n_steps} at z = {z:.1f} m (h = {h:.3g} m)")
    log.debug("propagate: %d steps over %.1f m", n_steps, L)
    return w.with_samples(A)


def amplify(w: SampledWaveform, amp: AmplifierSpec, seed=0) -> SampledWaveform:
    """Gain ``G`` plus ASE of per-sample variance ``(G-1) n_sp h nu fs``."""
    G = 10 ** (amp.gain_db / 10)
    out = w.samples * np.sqrt(G)
    if amp.noise and G > 1:
        var = (G - 1) * amp.n_sp * H_PLANCK * amp.frequency * w.sample_rate
        rng = make_rng(seed)
        n = len(w)
        out = out + np.sqrt(var / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return w.with_samples(out)
