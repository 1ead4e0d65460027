import numpy as np
import pytest

from rossnn.filters import (
    ButterworthSpec, FilterError, MrrSpec, MzdiSpec, RecurrentNodeSpec, StabilityError,
    butterworth_response, mrr_bandwidth, mrr_coupling_for_bandwidth, mrr_response,
    mzdi_response, node_impulse_response, node_response,
)
from rossnn.signal import constant_response

C = 299792458.0


def ring(k=0.3, loss=0.0, f0=0.0):
    return MrrSpec.symmetric(k, 2 * np.pi * 55e-6, 2.6, loss, f0)


def test_lossless_ring_conserves_power(rng):
    spec = ring(0.35)
    f = rng.uniform(-2e12, 2e12, 10_000)
    t = mrr_response(spec, "through")(f)
    d = mrr_response(spec, "drop")(f)
    assert np.max(np.abs(np.abs(t) ** 2 + np.abs(d) ** 2 - 1)) <= 1e-9


def test_lossy_ring_is_passive(rng):
    spec = ring(0.35, loss=50.0)
    f = rng.uniform(-1e12, 1e12, 2000)
    tot = np.abs(mrr_response(spec, "through")(f)) ** 2 + np.abs(mrr_response(spec, "drop")(f)) ** 2
    assert np.all(tot < 1)


def test_ring_resonance_and_fsr():
    spec = ring(0.3, f0=5e9)
    d = mrr_response(spec, "drop")
    assert np.isclose(abs(d(5e9)), 1.0)
    assert np.isclose(abs(d(5e9 + spec.fsr)), 1.0)
    assert np.isclose(spec.fsr, C / (2 * np.pi * 55e-6 * 2.6))


def test_coupler_constraint():
    with pytest.raises(FilterError):
        MrrSpec(0.9, 0.9, 0.5, 0.5, 0.0, 1e-4, 2.6)


@pytest.mark.parametrize("bw", [1e9, 5e9, 20e9])
def test_ring_bandwidth_inversion(bw):
    L = 2 * np.pi * 55e-6
    k = mrr_coupling_for_bandwidth(bw, L, 2.6, 9.2)
    spec = MrrSpec.symmetric(k, L, 2.6, 9.2)
    assert np.isclose(mrr_bandwidth(spec), bw, rtol=1e-9)
    peak = abs(mrr_response(spec)(0.0)) ** 2
    edge = abs(mrr_response(spec)(bw / 2)) ** 2
    assert np.isclose(edge / peak, 0.5, rtol=1e-6)


def test_mzdi_nulls_and_peaks():
    spec = MzdiSpec.from_bandwidth(20e9, f0=3e9)
    H = mzdi_response(spec)
    k = np.arange(-5, 6)
    peaks = 3e9 + k * spec.fsr
    nulls = 3e9 + (k + 0.5) * spec.fsr
    assert np.max(np.abs(np.abs(H(peaks)) - 1)) <= 1e-9
    assert np.max(np.abs(H(nulls))) <= 1e-9
    assert np.isclose(abs(H(3e9 + 10e9)) ** 2, 0.5)


def test_butterworth_3db():
    for n in (1, 2, 4):
        H = butterworth_response(ButterworthSpec(n, 10e9, f0=2e9))
        assert np.isclose(abs(H(2e9)), 1.0)
        assert np.isclose(abs(H(12e9)) ** 2, 0.5)


def test_node_without_feedback_is_scaled_filter(rng):
    inner = mzdi_response(MzdiSpec.from_bandwidth(30e9))
    node = RecurrentNodeSpec(inner, 0.5, 0.5, 0.0, 9e-12)
    f = rng.uniform(-1e11, 1e11, 100)
    np.testing.assert_allclose(node_response(node)(f), 0.5 * inner(f))


def test_node_closed_form():
    inner = constant_response(1.0)
    node = RecurrentNodeSpec(inner, 0.5, 0.5, 0.5, 10e-12, np.pi)
    f = np.array([0.0, 25e9, 50e9])
    expect = 0.5 / (1 + 0.25 * np.exp(-1j * (2 * np.pi * f * 10e-12 + np.pi)))
    np.testing.assert_allclose(node_response(node)(f), expect)


def test_unstable_loop_rejected():
    with pytest.raises(StabilityError):
        RecurrentNodeSpec(constant_response(2.0), 0.5, 0.5, 1.0, 1e-12)


def test_impulse_response_echoes():
    node = RecurrentNodeSpec(constant_response(1.0), 0.5, 0.5, 0.5, 10e-12)
    h = node_impulse_response(node, 1e-9, 1e12).samples
    # echoes every 10 samples, ratio -0.25
    assert np.isclose(h[0], 0.5)
    assert np.isclose(h[10], -0.125)
    assert np.isclose(h[20], 0.03125)
    assert abs(h[5]) < 1e-12


def test_mzdi_quadrature_point():
    spec = MzdiSpec(2e9, 10e-12)
    H = mzdi_response(spec)
    assert H(2e9) == pytest.approx(1.0)
    assert abs(H(2e9 + 1 / (2 * spec.delta_t))) < 1e-15
    assert abs(H(2e9 + 1 / (4 * spec.delta_t))) ** 2 == pytest.approx(0.5)
    assert H(2e9 + 1 / (4 * spec.delta_t)) == pytest.approx(0.5 * (1 - 1j))


def test_lossless_ring_on_and_off_resonance():
    spec = ring(0.4, f0=1e9)
    assert abs(mrr_response(spec, "drop")(1e9)) == pytest.approx(1.0)
    assert abs(mrr_response(spec, "through")(1e9)) < 1e-12
    assert abs(mrr_response(spec, "through")(1e9 + spec.fsr / 2)) == pytest.approx(1.0, abs=0.05)


def test_butterworth_rolloff():
    H = butterworth_response(ButterworthSpec(2, 10e9))
    assert H(0.0) == pytest.approx(1.0)
    assert abs(H(10e9)) ** 2 == pytest.approx(0.5, abs=1e-9)
    assert abs(20 * np.log10(abs(H(100e9))) + 40) < 1.0


def test_node_limits(rng):
    inner = butterworth_response(ButterworthSpec(1, 10e9))
    f = rng.uniform(-50e9, 50e9, 50)
    np.testing.assert_allclose(node_response(RecurrentNodeSpec(inner, 0.0, 0.0, 1.0, 5e-12))(f), inner(f))
    np.testing.assert_allclose(node_response(RecurrentNodeSpec(inner, 0.3, 0.6, 0.0, 5e-12))(f),
                               np.sqrt(0.7 * 0.4) * inner(f))
    node = RecurrentNodeSpec(constant_response(1.0), 0.5, 0.5, 1.0, 10e-12, np.pi)
    assert node_response(node)(0.0) == pytest.approx(1.0)


def test_impulse_energy_matches_response():
    node = RecurrentNodeSpec(butterworth_response(ButterworthSpec(1, 20e9)), 0.5, 0.5, 0.7, 20e-12, 0.4)
    h = node_impulse_response(node, 2e-9, 1e12)
    H = node_response(node)(np.fft.fftfreq(len(h), h.dt))
    assert np.sum(np.abs(h.samples) ** 2) == pytest.approx(np.mean(np.abs(H) ** 2), rel=1e-12)


def test_ideal_lowpass_without_feedback_gives_sinc():
    from rossnn.signal import FrequencyResponse
    B = 50e9
    ideal = FrequencyResponse(lambda f: (np.abs(f) <= B).astype(float), peak=1.0)
    h = node_impulse_response(RecurrentNodeSpec(ideal, 0.0, 0.0, 0.0, 0.0), 1e-9, 1e12)
    n = len(h)
    t = np.fft.fftfreq(n, 1 / n) / 1e12  # signed time
    kept = np.sum(np.abs(np.fft.fftfreq(n, 1e-12)) <= B)
    expect = kept / n * np.sinc(2 * B * t)
    np.testing.assert_allclose(h.samples.real[np.abs(t) < 100e-12], expect[np.abs(t) < 100e-12], atol=2e-3)


def test_short_impulse_window_rejected():
    node = RecurrentNodeSpec(constant_response(1.0), 0.5, 0.5, 0.9, 50e-12)
    with pytest.raises(FilterError):
        node_impulse_response(node, 1e-10, 1e12)
