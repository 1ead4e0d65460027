import os
import subprocess
import sys

import numpy as np
import pytest

from rossnn import kernels
from rossnn.kernels import _numpy
from rossnn.transmitter import LangKobayashiParams

jit = pytest.importorskip("rossnn.kernels._jit")


def test_env_flag_selects_numpy_backend():
    env = {**os.environ, "ROSSNN_NO_NUMBA": "1"}
    out = subprocess.run([sys.executable, "-c", "import rossnn.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_default_backend():
    expect = "numpy" if os.environ.get("ROSSNN_NO_NUMBA") else "numba"
    assert kernels.BACKEND == expect


def test_narma_backends_agree(rng):
    u = rng.uniform(0, 0.5, 3000)
    ya, ia = _numpy.narma_recursion(u, 10, 10.0)
    yb, ib = jit.narma_recursion(u, 10, 10.0)
    assert ia == ib == -1
    np.testing.assert_allclose(ya, yb, rtol=1e-13, atol=0)
    assert _numpy.narma_recursion(np.full(100, 0.5), 10, 10.0)[1] == jit.narma_recursion(
        np.full(100, 0.5), 10, 10.0)[1]


def test_viterbi_backends_agree(rng):
    lv = np.array([-3.0, -1.0, 1.0, 3.0])
    h = np.array([1.0, 0.4, -0.2, 0.1])
    x = lv[rng.integers(0, 4, 2000)]
    rx = np.convolve(x, h)[:2000] + 0.4 * rng.standard_normal(2000)
    a, ma = _numpy.viterbi(rx, lv, h, 0.0)
    b, mb = jit.viterbi(rx, lv, h, 0.0)
    np.testing.assert_array_equal(a, b)
    assert ma == pytest.approx(mb, rel=1e-12)


def test_lk_backends_agree(rng):
    p = LangKobayashiParams()
    P, N = p.steady_state()
    noise = (rng.standard_normal(2000) + 1j * rng.standard_normal(2000)) / np.sqrt(2)
    args = (200, 10, 1e-12, complex(np.sqrt(P)), N, p.pump, p.g, p.s, p.beta, p.t_n, p.n0,
            p.alpha, p.t_ph, noise)
    fa, na, oka = _numpy.lk_integrate(*args)
    fb, nb, okb = jit.lk_integrate(*args)
    assert oka and okb
    np.testing.assert_allclose(fa, fb, rtol=1e-10)
    np.testing.assert_allclose(na, nb, rtol=1e-10)


def test_benchmark_script_runs(capsys):
    import runpy
    mod = runpy.run_path(str(__import__("pathlib").Path(__file__).parents[1] / "benchmarks" / "bench_kernels.py"))
    mod["main"](["--repeat", "1"])
    assert "speed-up" in capsys.readouterr().out
