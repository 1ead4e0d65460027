"""Closed-form transfer functions of the optical building blocks.

Conventions
-----------
* Frequencies are baseband offsets from the optical carrier, in Hz.
* ``exp(-2j*pi*f*tau)`` is a delay by ``tau``; every phase below follows it.
* The add/drop ring uses lossless couplers, ``T**2 + K**2 == 1``.  The
  through port is ``(T1 - T2*z) / (1 - T1*T2*z)`` and the drop port
  ``-K1*K2*z / (1 - T1*T2*z)`` with ``z = exp(Phi)`` the full round trip.
  For a lossless ring these satisfy ``|thru|**2 + |drop|**2 == 1`` exactly,
  so no half-round-trip phase is needed on the drop numerator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT

from .signal import FrequencyResponse, SampledWaveform, next_power_of_two, grid_frequencies


class FilterError(ValueError):
    pass


class StabilityError(FilterError):
    """The loop gain of a recurrent node reaches or exceeds one."""

    def __init__(self, margin: float):
        self.margin = margin
        super().__init__(f"recurrent loop is unstable: sqrt(a*b)*L*sup|H| = {margin:.6g} >= 1")


@dataclass(frozen=True)
class MzdiSpec:
    """Mach-Zehnder delay interferometer centred at ``f0`` with arm delay ``delta_t``."""

    f0: float
    delta_t: float

    def __post_init__(self):
        if not self.delta_t > 0:
            raise FilterError(f"MZDI arm delay must be positive, got {self.delta_t}")

    @classmethod
    def from_bandwidth(cls, bandwidth: float, f0: float = 0.0) -> "MzdiSpec":
        """Full 3-dB width ``bandwidth``; the FSR is then ``2*bandwidth``."""
        if not bandwidth > 0:
            raise FilterError(f"bandwidth must be positive, got {bandwidth}")
        return cls(f0=f0, delta_t=1.0 / (2.0 * bandwidth))

    @property
    def fsr(self) -> float:
        return 1.0 / self.delta_t

    @property
    def bandwidth(self) -> float:
        return 1.0 / (2.0 * self.delta_t)


@dataclass(frozen=True)
class MrrSpec:
    """Add/drop micro-ring.

    ``t1, t2`` are field self-coupling (transmittance) coefficients and
    ``k1, k2`` the cross-coupling coefficients of the two bus couplers.
    ``loss`` is the power attenuation coefficient in 1/m, ``length`` the
    ring circumference in m.
    """

    t1: float
    t2: float
    k1: float
    k2: float
    loss: float
    length: float
    n_eff: float
    f0: float = 0.0

    def __post_init__(self):
        for name in ("t1", "t2"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise FilterError(f"{name} must lie in (0, 1], got {v}")
        for name in ("k1", "k2"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise FilterError(f"{name} must lie in [0, 1), got {v}")
        for t, k, j in ((self.t1, self.k1, 1), (self.t2, self.k2, 2)):
            if abs(t * t + k * k - 1.0) > 1e-9:
                raise FilterError(f"coupler {j} violates T^2 + K^2 = 1 (got {t * t + k * k:.12g})")
        if self.loss < 0 or not self.length > 0 or not self.n_eff > 0:
            raise FilterError("ring loss must be >= 0, length and n_eff > 0")

    @classmethod
    def symmetric(cls, k: float, length: float, n_eff: float, loss: float = 0.0,
                  f0: float = 0.0) -> "MrrSpec":
        t = float(np.sqrt(1.0 - k * k))
        return cls(t, t, k, k, loss, length, n_eff, f0)

    @classmethod
    def from_geometry(cls, radius: float, loss_db_per_cm: float, k: float,
                      n_eff: float = 2.6, f0: float = 0.0) -> "MrrSpec":
        """Ring of the given radius (m) and propagation loss (dB/cm)."""
        return cls.symmetric(k, 2 * np.pi * radius, n_eff, db_per_cm_to_loss(loss_db_per_cm), f0)

    @property
    def round_trip(self) -> float:
        return self.length * self.n_eff / C_LIGHT

    @property
    def fsr(self) -> float:
        return 1.0 / self.round_trip

    @property
    def bandwidth(self) -> float:
        return mrr_bandwidth(self)

    def with_f0(self, f0: float) -> "MrrSpec":
        return MrrSpec(self.t1, self.t2, self.k1, self.k2, self.loss, self.length, self.n_eff, f0)


@dataclass(frozen=True)
class ButterworthSpec:
    """Butterworth response; ``f0 != 0`` gives the frequency-shifted bandpass."""

    order: int
    f_3db: float
    f0: float = 0.0

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise FilterError(f"Butterworth order must be a positive integer, got {self.order}")
        if not self.f_3db > 0:
            raise FilterError(f"f_3db must be positive, got {self.f_3db}")


@dataclass(frozen=True)
class RecurrentNodeSpec:
    """Filter-in-a-loop: input coupler ``a``, output coupler ``b``, loop
    amplitude ``loop_gain`` (VOA), loop delay ``delay`` and phase ``phase``."""

    inner: FrequencyResponse
    a: float
    b: float
    loop_gain: float
    delay: float
    phase: float = 0.0

    def __post_init__(self):
        if not (0 <= self.a < 1 and 0 <= self.b < 1):
            raise FilterError(f"coupling ratios must lie in [0, 1), got a={self.a}, b={self.b}")
        if not 0 <= self.loop_gain <= 1:
            raise FilterError(f"loop gain must lie in [0, 1], got {self.loop_gain}")
        if self.delay < 0:
            raise FilterError("loop delay must be non-negative")
        m = self.margin
        if not m < 1:
            raise StabilityError(m)

    @property
    def margin(self) -> float:
        return float(np.sqrt(self.a * self.b) * self.loop_gain * response_peak(self.inner))


def db_per_cm_to_loss(db_per_cm: float) -> float:
    """Power attenuation coefficient (1/m) from a loss in dB/cm."""
    return db_per_cm * 100.0 * np.log(10.0) / 10.0


def response_peak(H: FrequencyResponse) -> float:
    """``sup |H|``: the declared peak when known, otherwise a dense sample."""
    if np.isfinite(H.peak):
        return float(H.peak)
    f = np.linspace(-2e12, 2e12, 400001)
    return float(np.max(np.abs(H(f))))


def mzdi_response(spec: MzdiSpec) -> FrequencyResponse:
    f0, dt = spec.f0, spec.delta_t
    return FrequencyResponse(lambda f: 0.5 * (1.0 + np.exp(-2j * np.pi * (f - f0) * dt)),
                             spec.bandwidth, f0, "mzdi", 1.0)


def _ring_z(spec: MrrSpec, f):
    return np.exp(-spec.loss * spec.length / 2.0 - 2j * np.pi * (f - spec.f0) * spec.round_trip)


def mrr_response(spec: MrrSpec, port: str = "drop") -> FrequencyResponse:
    t1, t2, k1, k2 = spec.t1, spec.t2, spec.k1, spec.k2
    if port == "drop":
        def func(f):
            z = _ring_z(spec, f)
            return -k1 * k2 * z / (1.0 - t1 * t2 * z)
    elif port in ("through", "thru"):
        def func(f):
            z = _ring_z(spec, f)
            return (t1 - t2 * z) / (1.0 - t1 * t2 * z)
    else:
        raise FilterError(f"unknown ring port {port!r}; use 'through' or 'drop'")
    return FrequencyResponse(func, mrr_bandwidth(spec), spec.f0, f"mrr-{port}", 1.0)


def mrr_bandwidth(spec: MrrSpec) -> float:
    """Full 3-dB width of the drop resonance."""
    x = spec.t1 * spec.t2 * np.exp(-spec.loss * spec.length / 2.0)
    cos_half = 1.0 - (1.0 - x) ** 2 / (2.0 * x)
    if cos_half <= -1:
        return spec.fsr
    return float(np.arccos(cos_half) / (np.pi * spec.round_trip))


def mrr_coupling_for_bandwidth(bandwidth: float, length: float, n_eff: float,
                               loss: float = 0.0) -> float:
    """Symmetric field coupling ``K`` giving a drop 3-dB width ``bandwidth``."""
    tau = length * n_eff / C_LIGHT
    theta = np.pi * bandwidth * tau
    if not 0 < theta < np.pi / 2:
        raise FilterError(f"bandwidth {bandwidth:g} Hz is not below half the ring FSR {1 / tau:g} Hz")
    # solve 1 - (1-x)^2/(2x) = cos(theta) for x = T^2 A in (0,1)
    cq = 1.0 - np.cos(theta)
    x = (1.0 + cq) - np.sqrt((1.0 + cq) ** 2 - 1.0)
    amp = np.exp(-loss * length / 2.0)
    t2 = x / amp
    if not 0 < t2 < 1:
        raise FilterError("requested bandwidth is unreachable with this ring loss")
    return float(np.sqrt(1.0 - t2))


def butterworth_response(spec: ButterworthSpec) -> FrequencyResponse:
    n = int(spec.order)
    k = np.arange(1, n + 1)
    poles = np.exp(1j * np.pi * (2 * k + n - 1) / (2 * n))
    fc, f0 = spec.f_3db, spec.f0

    def func(f):
        s = 1j * (np.asarray(f) - f0) / fc
        h = np.ones(np.shape(s), dtype=np.complex128)
        for p in poles:
            h = h * (-p) / (s - p)
        return h

    return FrequencyResponse(func, 2 * fc, f0, f"butter{n}", 1.0)


def node_response(spec: RecurrentNodeSpec) -> FrequencyResponse:
    inner = spec.inner
    fwd = np.sqrt(1.0 - spec.a) * np.sqrt(1.0 - spec.b)
    fb = np.sqrt(spec.a * spec.b) * spec.loop_gain
    td, phi = spec.delay, spec.phase

    def func(f):
        h = inner(f)
        return fwd * h / (1.0 + fb * h * np.exp(-1j * (2 * np.pi * f * td + phi)))

    peak = fwd * response_peak(inner) / (1.0 - spec.margin)
    return FrequencyResponse(func, inner.bandwidth, inner.center, "node", peak)


def decay_time(spec: RecurrentNodeSpec, floor: float = 1e-6) -> float:
    """Time for the echo train of a node to fall below ``floor`` of its peak."""
    t = 0.0
    if spec.margin > 0:
        t += np.log(floor) / np.log(spec.margin) * spec.delay
    bw = spec.inner.bandwidth
    if np.isfinite(bw) and bw > 0:
        t += -np.log(floor) / (np.pi * bw)
    return float(t)


def node_impulse_response(spec: RecurrentNodeSpec, duration: float,
                          sample_rate: float) -> SampledWaveform:
    """Discrete impulse response ``ifft(H_node)`` on a power-of-two grid.

    Normalised so that ``y[n] = sum_m h[m] x[n-m]``; consequently
    ``sum |h|**2 == mean |H_node|**2`` over the grid.
    """
    need = decay_time(spec)
    if duration < need:
        raise FilterError(f"duration {duration:.3e} s is shorter than the estimated decay time {need:.3e} s")
    n = next_power_of_two(int(np.ceil(duration * sample_rate)))
    H = node_response(spec)(grid_frequencies(n, sample_rate))
    return SampledWaveform(np.fft.ifft(H), sample_rate)
