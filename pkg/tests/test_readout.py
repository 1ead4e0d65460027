import numpy as np
import pytest

from rossnn.readout import (
    ReadoutError, assemble_features, compute_ber, compute_nmse, compute_ser, decide,
    fit_readout, level_means, predict, ridge_solve, select_lambda, symbol_bits, tap_count,
    train_ridge, window_offsets,
)
from rossnn.transmitter import constellation

from oracles import ridge_normal_equations


def test_ridge_matches_normal_equations(rng):
    for _ in range(10):
        X = rng.standard_normal((200, 15))
        y = rng.standard_normal(200)
        lam = 10 ** rng.uniform(-4, 2)
        w = ridge_solve(X, y, lam)
        ref = ridge_normal_equations(X, y, lam)
        assert np.max(np.abs(w - ref)) / np.max(np.abs(ref)) <= 1e-9


def test_zero_lambda_rank_check(rng):
    X = rng.standard_normal((50, 3))
    X = np.column_stack([X, X[:, 0]])
    with pytest.raises(ReadoutError):
        ridge_solve(X, rng.standard_normal(50), 0.0)


def test_features_are_aligned():
    v = np.column_stack([np.arange(10.0), 100 + np.arange(10.0)])
    F = assemble_features(v, 3)
    assert F.width == 2 * 3 + 1
    np.testing.assert_array_equal(F.index, np.arange(1, 9))
    np.testing.assert_array_equal(F.X[0], [0, 1, 2, 100, 101, 102, 1])
    P = assemble_features(v[:, 0], 3, "past")
    np.testing.assert_array_equal(P.X[0], [0, 1, 2, 1])
    assert P.index[0] == 2
    with pytest.raises(ReadoutError):
        assemble_features(v, 4)
    np.testing.assert_array_equal(window_offsets(5), [-2, -1, 0, 1, 2])


def test_standardised_fit_recovers_linear_map(rng):
    X = np.column_stack([rng.standard_normal((500, 4)) * [1, 10, 100, 1e-3], np.ones(500)])
    w = np.array([1.0, -0.2, 0.01, 300.0, 0.5])
    m = train_ridge(X, X @ w, 1e-10)
    np.testing.assert_allclose(predict(m, X), X @ w, atol=1e-6)
    with pytest.raises(ReadoutError):
        predict(m, X[:, :3])


def test_lambda_selection_prefers_regularisation_for_noise(rng):
    X = np.column_stack([rng.standard_normal((120, 80)), np.ones(120)])
    y = X[:, 0] + rng.standard_normal(120)
    lam, mses = select_lambda(X, y)
    assert lam > 1e-4 * 90
    assert len(mses) == 6
    assert fit_readout(X, y).lam == lam


def test_pam4_decisions_with_trained_levels():
    lv = np.array([0.1, 0.4, 0.55, 0.9])
    est = np.array([0.0, 0.3, 0.5, 0.6, 2.0])
    np.testing.assert_array_equal(decide(est, "PAM4", lv), [0, 1, 2, 2, 3])
    np.testing.assert_allclose(level_means([1.0, 3.0, 5.0, 7.0], [0, 0, 1, 1], 2), [2.0, 6.0])
    with pytest.raises(ReadoutError):
        level_means([1.0], [0], 2)


def test_qam_decisions_use_i_then_q():
    pts = constellation("QAM16")
    est = np.column_stack([pts.real, pts.imag])
    np.testing.assert_array_equal(decide(est, "QAM16"), np.arange(16))
    swapped = decide(est[:, ::-1], "QAM16")
    assert not np.array_equal(swapped, np.arange(16))
    np.testing.assert_array_equal(decide(pts, "QAM16"), np.arange(16))
    q32 = constellation("QAM32")
    np.testing.assert_array_equal(decide(q32 * 1.01, "QAM32"), np.arange(32))


def test_error_counting():
    ref = np.array([0, 1, 2, 3])
    dec = np.array([1, 1, 2, 0])
    assert compute_ser(dec, ref) == 0.5
    # 0->1 costs one Gray bit, 3->0 costs one bit (10 vs 00)
    assert compute_ber(dec, ref, "PAM4") == 2 / 8
    assert symbol_bits(np.array([5]), "QAM16").tolist() == [[0, 1, 0, 1]]
    with pytest.raises(ReadoutError):
        compute_ser(dec, ref[:3])


def test_nmse():
    r = np.array([1.0, 2.0, 3.0])
    assert compute_nmse(r, r) == 0.0
    assert compute_nmse(np.full(3, 2.0), r) == pytest.approx(1.0)
    with pytest.raises(ReadoutError):
        compute_nmse(r, np.ones(3))


def test_tap_count_is_odd_and_bounded():
    assert tap_count(17, 0.9, 20, 112e9) % 2 == 1
    assert tap_count(0, 1, 1, 1e9) == 11
    assert tap_count(1e3, 1, 100, 1e11) == 71


def test_window_edge_cases():
    v = np.array([1.0, 2.0, 3.0, 4.0])
    F1 = assemble_features(np.column_stack([v, -v]), 1)
    np.testing.assert_array_equal(F1.X, np.column_stack([v, -v, np.ones(4)]))
    F3 = assemble_features(v, 3)
    np.testing.assert_array_equal(F3.X, [[1, 2, 3, 1], [2, 3, 4, 1]])
    assert assemble_features(np.zeros((100, 2)), 21).width == 43


def test_ridge_limits(rng):
    y = rng.standard_normal(12)
    np.testing.assert_allclose(ridge_solve(np.eye(12), y, 0.0), y, atol=1e-14)
    X = rng.standard_normal((30, 5))
    X /= np.linalg.norm(X, axis=0)
    assert np.linalg.norm(ridge_solve(X, rng.standard_normal(30), 1e9)) < 1e-8


def test_bias_only_fit_is_constant(rng):
    X = np.column_stack([np.zeros((50, 3)), np.ones(50)])
    y = 2.5 + rng.standard_normal(50)
    m = train_ridge(X, y, 1e-9)
    p = predict(m, X)
    assert np.ptp(p) == 0 and p[0] == pytest.approx(y.mean(), rel=1e-6)


def test_iq_swap_gives_the_same_ber(rng):
    pts = constellation("QAM16")
    idx = rng.integers(0, 16, 20_000)
    rx = pts[idx] + 0.12 * (rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size))
    est = np.column_stack([rx.real, rx.imag])
    ber = compute_ber(decide(est, "QAM16"), idx, "QAM16")
    swapped_idx = 4 * (idx % 4) + idx // 4
    ber_sw = compute_ber(decide(est[:, ::-1], "QAM16"), swapped_idx, "QAM16")
    assert ber > 0 and ber_sw == ber


def test_metric_counting():
    ref = np.zeros(1000, dtype=int)
    dec = ref.copy()
    dec[:5] = 1
    bits = symbol_bits(ref, "PAM4")
    assert compute_ber(bits, bits) == 0.0 and compute_ser(ref, ref) == 0.0
    assert compute_ber(dec, ref) == 0.005
    y = np.arange(7.0)
    assert compute_nmse(y, y) == 0.0
    assert compute_nmse(np.full(7, y.mean()), y) == pytest.approx(1.0)
