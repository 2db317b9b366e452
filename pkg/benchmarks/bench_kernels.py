"""Time the compiled and pure-Python path kernels on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from fbmdelay import _pykernels

try:
    from fbmdelay import _ckernels
except ImportError:
    _ckernels = None

PARAMS = (2.0, 0.5, 0.3, 1.0)


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=6000, help="grid steps (dt = 3 / steps)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    n = args.steps
    dt = 3.0 / n
    lag = n // 6
    noise = 0.05 * np.sqrt(dt) * np.random.default_rng(0).standard_normal(n)
    kind = _pykernels.TANH_SINE

    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels

    print(f"steps={n} lag={lag} repeat={args.repeat} (best of, seconds)")
    print(f"{'kernel':<12}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    cases = {
        "euler_delay": lambda m: m.euler_delay(kind, PARAMS, 0.0, dt, lag, noise),
        "rk4_delay": lambda m: m.rk4_delay(kind, PARAMS, 0.0, 0.0, dt, lag, n),
    }
    for name, call in cases.items():
        times = {b: bench(lambda m=m: call(m), args.repeat) for b, m in backends.items()}
        row = f"{name:<12}" + "".join(f"{t:>12.5f}" for t in times.values())
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
            same = np.array_equal(call(_pykernels), np.asarray(call(_ckernels)))
            row += "  identical" if same else "  DIFFERENT"
        print(row)


if __name__ == "__main__":
    main()
