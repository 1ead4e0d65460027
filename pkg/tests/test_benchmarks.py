import numpy as np
import pytest

from rossnn.benchmarks import (
    BenchmarkError, NarmaConfig, NarmaDivergence, fading_nulls, fading_profile, generate_narma,
    memory_capacity, narma10, squared_correlation,
)
from rossnn.fiber import FiberSpec
from rossnn.kernels import _numpy


def test_narma_first_step_and_fixed_point():
    y = narma10(np.zeros(400))
    assert y[0] == 0.0 and y[1] == pytest.approx(0.1)
    # 0.5 y^2 - 0.7 y + 0.1 = 0
    assert y[-1] == pytest.approx(0.7 - np.sqrt(0.29), abs=1e-9)
    assert y[-1] == pytest.approx(0.16148, abs=1e-5)


def test_narma_recursion_by_hand(rng):
    u = rng.uniform(0, 0.5, 50)
    y = narma10(u)
    for n in range(10, 49):
        expect = 0.3 * y[n] + 0.05 * y[n] * y[n - 10:n].sum() + 1.5 * u[n - 10] * u[n] + 0.1
        assert y[n + 1] == pytest.approx(expect, rel=1e-14)


def test_narma_divergence_detected():
    with pytest.raises(NarmaDivergence):
        narma10(np.full(200, 0.5))
    with pytest.raises(BenchmarkError):
        narma10(np.full(20, 0.6))


def test_narma_regeneration(monkeypatch):
    calls = []
    real = _numpy.narma_recursion

    def flaky(u, order, guard):
        calls.append(1)
        y, at = real(u, order, guard)
        return (y, 5) if len(calls) == 1 else (y, at)

    import rossnn.benchmarks as bm
    monkeypatch.setattr(bm.kernels, "narma_recursion", flaky)
    u, y, regen = generate_narma(NarmaConfig(500, seed=3))
    assert regen == 1 and u.size == 500


def test_narma_generation_is_seeded():
    a = generate_narma(NarmaConfig(300, seed=9))
    b = generate_narma(NarmaConfig(300, seed=9))
    np.testing.assert_array_equal(a[1], b[1])


def test_squared_correlation():
    x = np.arange(10.0)
    assert squared_correlation(x, -2 * x + 1) == pytest.approx(1.0)
    with pytest.raises(BenchmarkError):
        squared_correlation(x, np.ones(10))


def test_delay_line_memory_equals_its_length(rng):
    u = rng.uniform(0, 1, 4000)
    k = 6
    states = np.column_stack([np.roll(u, j) for j in range(1, k + 1)])
    mc, m = memory_capacity(states, u, 10, lam=1e-9)
    assert mc == pytest.approx(k, abs=0.05)
    assert np.all(m[:k] > 0.99) and np.all(m[k:] < 0.01)


def test_independent_states_have_no_memory(rng):
    u = rng.uniform(0, 1, 4000)
    mc, _ = memory_capacity(rng.standard_normal((4000, 3)), u, 10)
    assert mc < 0.1


def test_memory_capacity_length_requirement(rng):
    with pytest.raises(BenchmarkError):
        memory_capacity(np.zeros((100, 1)), np.zeros(100), 30)


def test_first_fading_null_at_20km():
    fib = FiberSpec(20e3, 17e-6)
    f = fading_nulls(fib.beta2 * fib.length, 60e9)
    assert f[0] == pytest.approx(13.5e9, rel=0.02)
    np.testing.assert_allclose(f[1] / f[0], np.sqrt(3))


def test_zero_length_has_flat_response():
    prof = fading_profile(FiberSpec(0.0), n=2**12, n_tones=64)
    assert np.max(np.abs(prof.magnitude_db)) < 1e-9
    assert prof.nulls.size == 0 and prof.analytic_nulls.size == 0


def test_null_positions_do_not_depend_on_power():
    fib = FiberSpec(20e3, 17e-6)
    a = fading_profile(fib, n=2**12, n_tones=128, power=1e-4)
    b = fading_profile(fib, n=2**12, n_tones=128, power=1e-2)
    np.testing.assert_allclose(a.nulls, b.nulls, rtol=1e-6)
    assert a.nulls.size == a.analytic_nulls.size


def test_fading_profile_csv(tmp_path):
    prof = fading_profile(FiberSpec(10e3), n=2**12, n_tones=32)
    p = tmp_path / "s.csv"
    prof.to_csv(p)
    rows = p.read_text().splitlines()
    assert rows[0] == "frequency_Hz,magnitude_dB,analytic_dB"
    assert len(rows) == prof.frequency.size + 1


def test_feedthrough_readout_recovers_input():
    from rossnn.benchmarks import optical_features
    from rossnn.config import Seeds
    from rossnn.readout import assemble_features, fit_readout, predict, compute_nmse
    u = np.random.default_rng(3).uniform(0, 0.5, 3000)
    S = optical_features(u, None, {"signal": {"value_range": [0.0, 0.5]}}, Seeds(0))
    F = assemble_features(S, 1, "past")
    m = fit_readout(F.X[:2000], u[F.index][:2000])
    assert compute_nmse(predict(m, F.X[2000:]), u[F.index][2000:]) < 1e-3


def test_fading_nulls_scale_with_root_length():
    b2 = -21.7e-27
    n1 = fading_nulls(b2 * 20e3, 200e9)
    n2 = fading_nulls(b2 * 40e3, 200e9)
    k = min(n1.size, n2.size)
    np.testing.assert_allclose(n2[:k] / n1[:k], 1 / np.sqrt(2), rtol=0.02)
