"""Symbol generation, laser sources and optical modulation.

Random draws use numpy's MT19937 bit generator seeded through
``SeedSequence``, one independent stream per seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import e as Q_E

from . import kernels
from .filters import ButterworthSpec, butterworth_response
from .signal import SampledWaveform, apply_response

log = logging.getLogger(__name__)

FORMATS = ("PAM4", "QAM16", "QAM32", "ANALOG")


class TransmitterError(ValueError):
    pass


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.MT19937(np.random.SeedSequence(seed)))


def constellation(fmt: str) -> np.ndarray:
    """Unit-average-power constellation, ordered so index -> Gray bits is simple.

    PAM4 is ordered by ascending level.  QAM16 index is ``4*i_idx + q_idx``
    with per-axis ascending levels.  QAM32 is the 6x6 cross (corners removed),
    row-major by ascending I then Q.
    """
    if fmt == "PAM4":
        pts = np.array([-3.0, -1.0, 1.0, 3.0]) + 0j
    elif fmt == "QAM16":
        ax = np.array([-3.0, -1.0, 1.0, 3.0])
        pts = (ax[:, None] + 1j * ax[None, :]).ravel()
    elif fmt == "QAM32":
        ax = np.array([-5.0, -3.0, -1.0, 1.0, 3.0, 5.0])
        grid = (ax[:, None] + 1j * ax[None, :]).ravel()
        pts = grid[~((np.abs(grid.real) == 5) & (np.abs(grid.imag) == 5))]
    else:
        raise TransmitterError(f"no constellation for format {fmt!r}")
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


@dataclass(frozen=True)
class SymbolStream:
    symbols: np.ndarray
    format: str
    baud: float
    seed: int
    indices: np.ndarray | None = None
    value_range: tuple = (0.0, 0.5)

    def __len__(self):
        return self.symbols.size


def generate_symbols(fmt: str, n: int, seed, baud: float = 1.0,
                     value_range: tuple = (0.0, 0.5)) -> SymbolStream:
    """i.i.d. symbols; ``ANALOG`` draws uniform values in ``value_range``."""
    if fmt not in FORMATS:
        raise TransmitterError(f"unsupported format {fmt!r}; choose one of {FORMATS}")
    if n < 1:
        raise TransmitterError("need at least one symbol")
    rng = make_rng(seed)
    if fmt == "ANALOG":
        lo, hi = value_range
        vals = rng.uniform(lo, hi, n)
        return SymbolStream(vals.astype(np.complex128), fmt, baud, seed, None, (lo, hi))
    pts = constellation(fmt)
    idx = rng.integers(0, pts.size, n)
    return SymbolStream(pts[idx], fmt, baud, seed, idx)


@dataclass(frozen=True)
class LangKobayashiParams:
    """Solitary-laser rate-equation parameters in SI units.

    Defaults follow the published table, converted from ps^-1; the photon
    lifetime ``t_ph`` is not listed there and defaults to 2 ps.
    """

    g: float = 1.2e4            # differential gain, 1/s
    s: float = 5e-7             # gain saturation
    beta: float = 150.0         # spontaneous emission rate, 1/s
    t_n: float = 2e-9           # carrier lifetime, s
    n0: float = 1.5e8           # transparency carrier number
    alpha: float = 3.0          # linewidth enhancement factor
    omega0: float = 1.206e15    # rad/s
    current: float = 35e-3      # A
    t_ph: float = 2e-12         # s

    @property
    def pump(self) -> float:
        return self.current / Q_E

    @property
    def threshold_current(self) -> float:
        n_th = self.n0 + 1.0 / (self.g * self.t_ph)
        return Q_E * n_th / self.t_n

    def steady_state(self) -> tuple[float, float]:
        """Noise-free lasing fixed point ``(|E|^2, N)``."""
        k = 1.0 / (self.g * self.t_ph * self.t_n)
        p = (self.pump - self.n0 / self.t_n - k) / (self.s * k + 1.0 / self.t_ph)
        if p <= 0:
            raise TransmitterError("bias current is below threshold")
        n = self.n0 + (1.0 + self.s * p) / (self.g * self.t_ph)
        return float(p), float(n)


@dataclass(frozen=True)
class LaserSpec:
    mode: str = "phase_noise_cw"
    power: float = 1e-3
    linewidth: float = 100e3
    noise: bool = True
    lk: LangKobayashiParams = field(default_factory=LangKobayashiParams)
    max_step: float = 1e-12
    warmup: float = 2e-9

    def __post_init__(self):
        if self.mode not in ("phase_noise_cw", "lang_kobayashi"):
            raise TransmitterError(f"unknown laser mode {self.mode!r}")
        if not self.power > 0:
            raise TransmitterError("laser power must be positive")
        if self.linewidth < 0:
            raise TransmitterError("linewidth must be non-negative")
        if self.mode == "lang_kobayashi" and self.lk.current <= self.lk.threshold_current:
            raise TransmitterError("Lang-Kobayashi bias is not above threshold")


@dataclass(frozen=True)
class TxSpec:
    laser: LaserSpec = field(default_factory=LaserSpec)
    oversampling: int = 8
    mzm_bandwidth: float | None = 60e9
    extinction_ratio_db: float = 20.0
    cspr_db: float = 9.0
    pulse: str = "nrz"
    rolloff: float = 0.1

    def __post_init__(self):
        if self.pulse not in ("nrz", "rc"):
            raise TransmitterError(f"unknown pulse shape {self.pulse!r}; use 'nrz' or 'rc'")
        if not 0 <= self.rolloff <= 1:
            raise TransmitterError("roll-off must lie in [0, 1]")
        if int(self.oversampling) != self.oversampling or self.oversampling < 2:
            raise TransmitterError("oversampling must be an integer >= 2")
        if self.mzm_bandwidth is not None and not self.mzm_bandwidth > 0:
            raise TransmitterError("MZM bandwidth must be positive")


def integrate_lang_kobayashi(p: LangKobayashiParams, n_out: int, dt_out: float, max_step: float,
                             rng: np.random.Generator | None, e0=None, n0=None):
    """Integrate the rate equations; returns ``(field, carriers)``, one sample per ``dt_out``.

    ``e0``/``n0`` default to the noise-free fixed point.  Field is in
    sqrt(photon number) units.
    """
    substeps = max(1, int(np.ceil(dt_out / max_step - 1e-9)))
    dt = dt_out / substeps
    if e0 is None or n0 is None:
        ps, ns = p.steady_state()
        e0 = np.sqrt(ps) if e0 is None else e0
        n0 = ns if n0 is None else n0
    if rng is None:
        noise = np.empty(0, dtype=np.complex128)
    else:
        m = n_out * substeps
        noise = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2.0)
    fld, car, ok = kernels.lk_integrate(n_out, substeps, dt, complex(e0), float(n0), p.pump,
                                        p.g, p.s, p.beta, p.t_n, p.n0, p.alpha, p.t_ph, noise)
    if not ok:
        raise TransmitterError("Lang-Kobayashi integration diverged; reduce max_step")
    return fld, car


def laser_field(spec: LaserSpec, duration: float, sample_rate: float, seed=0) -> SampledWaveform:
    """CW laser field with average power ``spec.power``."""
    n = int(round(duration * sample_rate))
    if n < 2:
        raise TransmitterError("duration * sample_rate must be at least 2")
    rng = make_rng(seed)
    dt = 1.0 / sample_rate
    if spec.mode == "phase_noise_cw":
        if spec.noise and spec.linewidth > 0:
            steps = rng.standard_normal(n) * np.sqrt(2 * np.pi * spec.linewidth * dt)
            phase = np.cumsum(steps) - steps[0]
        else:
            phase = np.zeros(n)
        return SampledWaveform(np.sqrt(spec.power) * np.exp(1j * phase), sample_rate)

    noise_rng = rng if spec.noise else None
    n_warm = int(np.ceil(spec.warmup / dt))
    fld, _ = integrate_lang_kobayashi(spec.lk, n_warm + n, dt, spec.max_step, noise_rng)
    fld = fld[n_warm:]
    fld = fld * np.sqrt(spec.power / np.mean(np.abs(fld) ** 2))
    return SampledWaveform(fld, sample_rate)


def raised_cosine(f, baud: float, rolloff: float) -> np.ndarray:
    """Raised-cosine spectrum with unit DC gain (zero ISI at the symbol instants)."""
    af = np.abs(np.asarray(f, dtype=float))
    f1 = (1 - rolloff) * baud / 2
    f2 = (1 + rolloff) * baud / 2
    h = np.where(af <= f1, 1.0, 0.0)
    if rolloff > 0:
        band = (af > f1) & (af <= f2)
        h = np.where(band, 0.5 * (1 + np.cos(np.pi / (rolloff * baud) * (af - f1))), h)
    return h


def drive_waveform(stream: SymbolStream, tx: TxSpec) -> np.ndarray:
    """Pulse-shaped drive followed by the modulator's 2nd-order Butterworth response.

    ``nrz`` holds each symbol for one period; ``rc`` places weighted
    impulses and applies a raised-cosine spectrum.
    """
    sps = int(tx.oversampling)
    fs = stream.baud * sps
    sym = np.asarray(stream.symbols, dtype=np.complex128)
    if tx.pulse == "nrz":
        x = np.repeat(sym, sps)
    else:
        x = np.zeros(sym.size * sps, dtype=np.complex128)
        x[::sps] = sym * sps
        f = np.fft.fftfreq(x.size, d=1.0 / fs)
        x = np.fft.ifft(np.fft.fft(x) * raised_cosine(f, stream.baud, tx.rolloff))
    if tx.mzm_bandwidth is not None:
        if tx.mzm_bandwidth >= fs / 2:
            raise TransmitterError("oversampling too low for the requested MZM bandwidth")
        H = butterworth_response(ButterworthSpec(2, tx.mzm_bandwidth))
        x = apply_response(SampledWaveform(x, fs), H).samples
    if stream.format in ("PAM4", "ANALOG"):
        x = x.real
    return x


def modulate(stream: SymbolStream, tx: TxSpec, seed=0) -> SampledWaveform:
    """Optical field for a symbol stream.

    Intensity formats map the drive linearly onto optical power between
    ``P_max`` and ``P_min = P_max * 10**(-ER/10)``; QAM formats add a real
    carrier ``c`` to the complex drive ``s`` with ``|c|^2 / <|s|^2>`` equal to
    the CSPR.  The laser field supplies the phase noise.
    """
    if len(stream) == 0:
        raise TransmitterError("empty symbol stream")
    sps = int(tx.oversampling)
    fs = stream.baud * sps
    d = drive_waveform(stream, tx)
    P = tx.laser.power
    laser = laser_field(tx.laser, d.size / fs, fs, seed)
    carrier = laser.samples / np.sqrt(P)

    if stream.format in ("PAM4", "ANALOG"):
        if stream.format == "PAM4":
            lv = constellation("PAM4").real
            lo, hi = lv.min(), lv.max()
        else:
            lo, hi = stream.value_range
        level = (np.real(d) - lo) / (hi - lo)
        eps = 10 ** (-tx.extinction_ratio_db / 10)
        p_max = 2 * P / (1 + eps)
        p_min = eps * p_max
        power = np.maximum(p_min + (p_max - p_min) * level, 0.0)
        env = np.sqrt(power)
    else:
        cspr = 10 ** (tx.cspr_db / 10)
        s = d * np.sqrt(P / (1 + cspr) / np.mean(np.abs(d) ** 2))
        env = np.sqrt(P * cspr / (1 + cspr)) + s
    return SampledWaveform(env * carrier, fs)
