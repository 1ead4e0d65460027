import numpy as np
import pytest
from scipy.optimize import fsolve

from rossnn.readout import symbol_bits
from rossnn.transmitter import (
    LangKobayashiParams, LaserSpec, TransmitterError, TxSpec, constellation, drive_waveform,
    generate_symbols, integrate_lang_kobayashi, laser_field, modulate, raised_cosine,
)


@pytest.mark.parametrize("fmt,m", [("PAM4", 4), ("QAM16", 16), ("QAM32", 32)])
def test_constellations_unit_power(fmt, m):
    pts = constellation(fmt)
    assert pts.size == m and np.unique(pts).size == m
    assert np.isclose(np.mean(np.abs(pts) ** 2), 1.0)


@pytest.mark.parametrize("fmt", ["PAM4", "QAM16"])
def test_gray_labels_differ_by_one_bit_between_neighbours(fmt):
    pts = constellation(fmt)
    bits = symbol_bits(np.arange(pts.size), fmt)
    d = np.abs(pts[:, None] - pts[None, :])
    dmin = np.min(d[d > 0])
    for i, j in zip(*np.nonzero(np.isclose(d, dmin))):
        assert np.sum(bits[i] != bits[j]) == 1


def test_symbols_are_seeded():
    a = generate_symbols("PAM4", 100, 7)
    b = generate_symbols("PAM4", 100, 7)
    c = generate_symbols("PAM4", 100, 8)
    np.testing.assert_array_equal(a.indices, b.indices)
    assert not np.array_equal(a.indices, c.indices)
    with pytest.raises(TransmitterError):
        generate_symbols("OOK", 10, 0)


def quiet_tx(**kw):
    return TxSpec(laser=LaserSpec(noise=False), **kw)


def test_pam4_extinction_ratio_and_power():
    st = generate_symbols("PAM4", 4000, 1, baud=50e9)
    w = modulate(st, quiet_tx(mzm_bandwidth=None, extinction_ratio_db=10.0))
    p = w.power
    assert np.isclose(p.max() / p.min(), 10.0)
    assert np.isclose(w.mean_power(), 1e-3, rtol=0.02)


def test_cspr_of_self_coherent_field():
    st = generate_symbols("QAM16", 8192, 2, baud=60e9)
    w = modulate(st, quiet_tx(cspr_db=9.0))
    carrier = np.mean(w.samples)
    cspr = abs(carrier) ** 2 / np.mean(np.abs(w.samples - carrier) ** 2)
    assert cspr == pytest.approx(10 ** 0.9, rel=0.02)


def test_raised_cosine_is_nyquist():
    st = generate_symbols("PAM4", 256, 3, baud=1e9)
    x = drive_waveform(st, TxSpec(pulse="rc", rolloff=0.2, mzm_bandwidth=None))
    np.testing.assert_allclose(x[::8], st.symbols.real, atol=1e-9)
    assert raised_cosine(np.array([0.0]), 1e9, 0.1)[0] == 1.0


def test_phase_noise_matches_linewidth():
    lw, fs = 1e6, 10e9
    w = laser_field(LaserSpec(linewidth=lw), 2e-5, fs, seed=4)
    dphi = np.diff(np.unwrap(np.angle(w.samples)))
    assert np.var(dphi) == pytest.approx(2 * np.pi * lw / fs, rel=0.05)
    assert np.allclose(np.abs(w.samples) ** 2, 1e-3)


def lk_residual(p: LangKobayashiParams):
    def f(v):
        P, N = v[0] * 1e5, v[1] * 1e8
        gain = p.g * (N - p.n0) / (1 + p.s * P)
        return [(gain - 1 / p.t_ph) * p.t_ph, (p.pump - N / p.t_n - gain * P) * p.t_n / 1e8]
    return f


def test_lang_kobayashi_steady_state_matches_root_finder():
    p = LangKobayashiParams()
    P, N = p.steady_state()
    sol = fsolve(lk_residual(p), [P / 1e5 * 1.3, N / 1e8 * 0.9], xtol=1e-13)
    assert sol[0] * 1e5 == pytest.approx(P, rel=1e-8)
    assert sol[1] * 1e8 == pytest.approx(N, rel=1e-8)


def test_lang_kobayashi_relaxes_to_fixed_point():
    p = LangKobayashiParams()
    P, N = p.steady_state()
    fld, car = integrate_lang_kobayashi(p, 400, 25e-12, 0.5e-12, None, e0=np.sqrt(0.7 * P), n0=N)
    assert abs(fld[-1]) ** 2 == pytest.approx(P, rel=1e-3)
    assert car[-1] == pytest.approx(N, rel=1e-4)


def test_lang_kobayashi_laser_power_normalised():
    spec = LaserSpec(mode="lang_kobayashi", power=2e-3, warmup=0.5e-9)
    w = laser_field(spec, 2e-9, 100e9, seed=1)
    assert w.mean_power() == pytest.approx(2e-3)


def test_below_threshold_rejected():
    with pytest.raises(TransmitterError):
        LaserSpec(mode="lang_kobayashi", lk=LangKobayashiParams(current=1e-3))


def test_tx_validation():
    with pytest.raises(TransmitterError):
        TxSpec(pulse="sinc")
    with pytest.raises(TransmitterError):
        TxSpec(oversampling=1)


def test_qam16_symbol_frequencies():
    n = 100_000
    st = generate_symbols("QAM16", n, 5)
    counts = np.bincount(st.indices, minlength=16)
    sigma = np.sqrt(n / 16 * 15 / 16)
    assert np.unique(st.symbols).size == 16
    assert np.all(np.abs(counts - n / 16) <= 4 * sigma)


def test_pam4_stream_power():
    st = generate_symbols("PAM4", 1_000_000, 6)
    assert np.mean(np.abs(st.symbols) ** 2) == pytest.approx(1.0, abs=1e-3)


def test_quiet_laser_is_constant():
    w = laser_field(LaserSpec(linewidth=0.0), 1e-9, 100e9)
    np.testing.assert_array_equal(w.samples, np.full(100, np.sqrt(1e-3)))


def test_lorentzian_linewidth():
    from scipy.optimize import curve_fit
    lw, fs, n = 100e3, 20e6, 20_000  # 1 ms traces
    psd = np.zeros(n)
    for s in range(40):
        w = laser_field(LaserSpec(linewidth=lw), n / fs, fs, seed=s)
        psd += np.abs(np.fft.fft(w.samples * np.hanning(n))) ** 2
    f = np.fft.fftfreq(n, 1 / fs)
    sel = np.abs(f) < 1e6
    def lorentz(f, a, fwhm):
        return a / (1 + (2 * f / fwhm) ** 2)
    (a, fwhm), _ = curve_fit(lorentz, f[sel], psd[sel] / psd.max(), p0=[1.0, 50e3])
    assert abs(fwhm) == pytest.approx(lw, rel=0.2)


def test_lang_kobayashi_gain_balance():
    p = LangKobayashiParams()
    P, N = p.steady_state()
    fld, car = integrate_lang_kobayashi(p, 400, 25e-12, 0.5e-12, None, e0=np.sqrt(0.5 * P), n0=0.98 * N)
    Pf, Nf = abs(fld[-1]) ** 2, car[-1]
    gain = p.g * (Nf - p.n0) / (1 + p.s * Pf)
    assert gain * Pf == pytest.approx(p.pump - Nf / p.t_n, rel=1e-3)


def test_constant_symbols_give_constant_envelope():
    from rossnn.transmitter import SymbolStream
    st = SymbolStream(np.full(64, 1.0 + 0j), "PAM4", 50e9, 0, np.full(64, 2))
    w = modulate(st, quiet_tx(mzm_bandwidth=30e9))
    p = w.power[16:-16]
    np.testing.assert_allclose(p, p[0], rtol=1e-9)


def test_pam4_extinction_ratio_20db():
    st = generate_symbols("PAM4", 4000, 1, baud=50e9)
    p = modulate(st, quiet_tx(mzm_bandwidth=None, extinction_ratio_db=20.0)).power
    assert p.min() / p.max() == pytest.approx(0.01, rel=0.05)
