"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so ``ROSSNN_NO_NUMBA`` does not
matter here.  The first numba call (compilation) is excluded.
"""

import argparse
import time

import numpy as np

from rossnn.kernels import _numpy
from rossnn.transmitter import LangKobayashiParams

try:
    from rossnn.kernels import _jit
except ImportError:  # numba not installed
    _jit = None


def cases():
    rng = np.random.default_rng(0)
    u = rng.uniform(0, 0.5, 20_000)
    lv = np.array([-3.0, -1.0, 1.0, 3.0])
    h = np.array([1.0, 0.5, -0.2, 0.1, 0.05])
    rx = np.convolve(lv[rng.integers(0, 4, 20_000)], h)[:20_000] + 0.3 * rng.standard_normal(20_000)
    p = LangKobayashiParams()
    P, N = p.steady_state()
    noise = (rng.standard_normal(200_000) + 1j * rng.standard_normal(200_000)) / np.sqrt(2)
    lk = (20_000, 10, 1e-13, complex(np.sqrt(P)), N, p.pump, p.g, p.s, p.beta, p.t_n, p.n0,
          p.alpha, p.t_ph, noise)
    return {
        "narma_recursion (20k steps)": ("narma_recursion", (u, 10, 10.0)),
        "viterbi (20k symbols, 256 states)": ("viterbi", (rx, lv, h, 0.0)),
        "lk_integrate (200k steps)": ("lk_integrate", lk),
    }


def best_time(fn, args, repeat):
    out = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        out.append(time.perf_counter() - t)
    return min(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description="numba vs numpy kernel timings")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"{'kernel':36s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speed-up':>9s}")
    for name, (attr, a) in cases().items():
        t_np = best_time(getattr(_numpy, attr), a, args.repeat)
        if _jit is None:
            print(f"{name:36s} {t_np:10.4f} {'n/a':>10s} {'n/a':>9s}")
            continue
        getattr(_jit, attr)(*a)  # compile
        t_jit = best_time(getattr(_jit, attr), a, args.repeat)
        print(f"{name:36s} {t_np:10.4f} {t_jit:10.4f} {t_np / t_jit:8.1f}x")


if __name__ == "__main__":
    main()
