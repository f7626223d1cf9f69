"""Compare the numba and numpy versions of every hot kernel.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. The first
call of each compiled kernel is excluded from timing (JIT warm-up). The
numpy column is what ``FARMAKIT_DISABLE_NUMBA=1`` selects at runtime. The
ARMA recursion switches to numpy on its own above ``BATCH_CROSSOVER`` paths
and the MA filter always uses numpy.
"""

import argparse
import time

import numpy as np

from farmakit import _accel
from farmakit._kernels import KERNEL_PAIRS
from farmakit.varma import arma_autocovariance


def _cases(rng):
    K, d = 15, 6
    phis = (0.5 * np.eye(K) + 0.02 * rng.standard_normal((K, K)))[None]
    thetas = (0.3 * np.eye(K))[None]
    eps = rng.standard_normal((200, 250, K))
    psis = np.stack([0.6 ** j * np.eye(K) for j in range(40)])
    Phi = (0.5 * np.eye(d))[None]
    Theta = (0.3 * np.eye(d))[None]
    g = arma_autocovariance(Phi, Theta, np.eye(d), 120)
    one = rng.standard_normal((1, 5000, K))
    return [
        ("arma_recursion", (phis, thetas, one), "R=1 T=5000 K=15"),
        ("arma_recursion", (phis, thetas, eps), "R=200 T=250 K=15"),
        ("ma_filter", (psis, one), "J=39 R=1 T=5000 K=15"),
        ("ma_filter", (psis, eps), "J=39 R=200 T=250 K=15"),
        ("innovations", (g, 110), "M=110 d=6"),
        ("whittle", (g, 110), "M=110 d=6"),
    ]


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _accel.NUMBA_AVAILABLE:
        print("numba is not installed; only the numpy kernels can run")
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':<16}{'size':<24}{'numba [s]':>11}{'numpy [s]':>11}{'speedup':>9}")
    for name, call_args, size in cases:
        nb, npy = KERNEL_PAIRS[name]
        t_np = _best(npy, call_args, args.repeat)
        if _accel.NUMBA_AVAILABLE:
            nb(*call_args)  # compile
            t_nb = _best(nb, call_args, args.repeat)
            print(f"{name:<16}{size:<24}{t_nb:>11.4f}{t_np:>11.4f}{t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<16}{size:<24}{'-':>11}{t_np:>11.4f}{'-':>9}")


if __name__ == "__main__":
    main()
