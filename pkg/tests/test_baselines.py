import numpy as np
import pytest

from rossnn import kernels
from rossnn.baselines import (
    BaselineError, VolterraSpec, estimate_channel, mlse_viterbi, multiplication_count,
    volterra_features,
)
from rossnn.readout import assemble_features, predict, train_ridge

from oracles import brute_force_mlse


@pytest.mark.parametrize("backend", ["numpy", "active"])
def test_viterbi_equals_brute_force(backend):
    from rossnn.kernels import _numpy
    fn = _numpy.viterbi if backend == "numpy" else kernels.viterbi
    rng = np.random.default_rng(2024)
    for _ in range(100):
        m = int(rng.choice([2, 4]))
        nu = int(rng.integers(0, 3))
        n = int(rng.integers(1, 9 if m == 2 else 7))
        levels = np.sort(rng.standard_normal(m))
        h = rng.standard_normal(nu + 1)
        off = float(rng.standard_normal())
        x = rng.integers(0, m, n + nu)
        clean = off + np.convolve(levels[x], h)[nu:n + nu]
        rx = clean + 0.5 * rng.standard_normal(n)
        idx, metric = fn(rx, levels, h, off)
        ref, ref_metric = brute_force_mlse(rx, levels, h, off)
        np.testing.assert_array_equal(idx, ref)
        assert metric == pytest.approx(ref_metric, rel=1e-12, abs=1e-12)


def test_channel_estimate_recovers_taps(rng):
    lv = np.array([-3.0, -1.0, 1.0, 3.0])
    tx = lv[rng.integers(0, 4, 5000)]
    h = np.array([0.2, 1.0, -0.3])
    rx = 0.5 + np.convolve(tx, h)[: tx.size] + 0.01 * rng.standard_normal(tx.size)
    rx = np.concatenate([np.zeros(2), rx])[: tx.size]   # two symbols of latency
    est = estimate_channel(rx, tx, 2, fit_offset=True)
    assert est.delay == 2
    np.testing.assert_allclose(est.taps, h, atol=2e-3)
    assert est.offset == pytest.approx(0.5, abs=2e-3)
    dec = mlse_viterbi(rx, est, lv)
    assert np.mean(lv[dec[:-10]] != tx[:dec.size - 10]) == 0.0


def test_state_budget():
    with pytest.raises(BaselineError):
        mlse_viterbi(np.zeros(10), np.ones(8), np.arange(4.0), state_budget=4096)


def test_volterra_order_one_is_ffe_bitwise(rng):
    x = rng.standard_normal(400)
    y = rng.standard_normal(400)
    V = volterra_features(x, VolterraSpec(11))
    F = assemble_features(x, 11)
    np.testing.assert_array_equal(V.X, F.X)
    np.testing.assert_array_equal(V.index, F.index)
    mv = train_ridge(V, y[V.index], 1.0)
    mf = train_ridge(F, y[F.index], 1.0)
    np.testing.assert_array_equal(predict(mv, V), predict(mf, F))


def test_volterra_feature_count(rng):
    spec = VolterraSpec(7, 5, 3)
    V = volterra_features(rng.standard_normal(100), spec)
    assert V.width == spec.n_features == 7 + 15 + 10 + 1
    # rows limited by the widest window
    assert V.index[0] == 3 and V.index[-1] == 96


def test_multiplication_counts():
    spec = VolterraSpec(91, 31, 11)
    assert multiplication_count(spec, "symmetric") == 91 + 2 * 496 + 3 * 286 == 1941
    assert multiplication_count(spec, "full") == 91 + 2 * 31**2 + 3 * 11**3 == 6006
    with pytest.raises(BaselineError):
        VolterraSpec(5, 7)


def test_volterra_low_order_shapes(rng):
    x = rng.standard_normal(300)
    V = volterra_features(x, VolterraSpec(3, 0, 0))
    F = assemble_features(x, 3)
    np.testing.assert_array_equal(V.X, F.X)
    # 3 linear terms, 3 quadratic products of the first 2 taps, bias
    assert volterra_features(x, VolterraSpec(3, 2, 0)).X.shape[1] == 3 + 3 + 1


def test_channel_estimate_exact_cases(rng):
    tx = rng.choice([-3.0, -1.0, 1.0, 3.0], 500)
    est = estimate_channel(tx, tx, 3, delay=0)
    np.testing.assert_allclose(est.taps, [1, 0, 0, 0], atol=1e-9)
    h = np.array([0.9, 0.3, -0.1])
    rx = np.convolve(tx, h)[: tx.size]
    np.testing.assert_allclose(estimate_channel(rx, tx, 2, delay=0).taps, h, atol=1e-9)


def test_channel_estimate_noise_scaling():
    rng = np.random.default_rng(5)
    h = np.array([1.0, 0.4, 0.2])
    n, sigma = 1000, None
    errs = []
    for _ in range(100):
        tx = rng.choice([-3.0, -1.0, 1.0, 3.0], n)
        clean = np.convolve(tx, h)[:n]
        sigma = np.sqrt(np.mean(clean**2) / 100)  # 20 dB SNR
        est = estimate_channel(clean + sigma * rng.standard_normal(n), tx, 2, delay=0)
        errs.append(est.taps - h)
    rms = np.sqrt(np.mean(np.square(errs)))
    assert rms <= 3 * sigma / np.sqrt(n * np.mean(tx**2))


def test_viterbi_identity_channel_is_error_free(rng):
    lv = np.array([-3.0, -1.0, 1.0, 3.0])
    x = rng.integers(0, 4, 2000)
    rx = lv[x] + 0.2 * rng.standard_normal(x.size)
    np.testing.assert_array_equal(mlse_viterbi(rx, [1.0], lv), x)


def test_viterbi_pam4_memory_two_exhaustive(rng):
    lv = np.array([-3.0, -1.0, 1.0, 3.0])
    h = np.array([1.0, 0.6, 0.3])
    x = rng.integers(0, 4, 10)
    rx = np.convolve(lv[x], h)[2:10] + 0.8 * rng.standard_normal(8)
    idx, _ = kernels.viterbi(rx, lv, h, 0.0)
    ref, _ = brute_force_mlse(rx, lv, h, 0.0)
    np.testing.assert_array_equal(idx, ref)


def test_mlse_beats_threshold_detector(rng):
    lv = np.array([-3.0, -1.0, 1.0, 3.0])
    h = np.array([1.0, 0.5])
    x = rng.integers(0, 4, 20_000)
    rx = np.convolve(lv[x], h)[: x.size] + 0.45 * rng.standard_normal(x.size)
    thr = np.argmin(np.abs(rx[:, None] - lv[None, :]), axis=1)
    mlse = mlse_viterbi(rx, h, lv)
    assert np.mean(mlse != x) <= np.mean(thr != x)
