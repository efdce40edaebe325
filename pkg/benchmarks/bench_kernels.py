"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from hybrid_radar._kernels import _fallback

try:
    from hybrid_radar._kernels import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    def crandn(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    X = crandn(200, 16)
    A = crandn(7, 16, 16)
    A = (A + A.conj().transpose(0, 2, 1)) / 2
    Y = crandn(50_000, 16)
    F = crandn(2, 16)
    return [
        ("quad_forms Q=1 N=16 m=7", "quad_forms", (X[:1], A)),
        ("quad_forms Q=200 N=16 m=7", "quad_forms", (X, A)),
        ("energy_statistic T=2000 N=16 J=2", "energy_statistic", (Y[:2000], F)),
        ("energy_statistic T=50000 N=16 J=2", "energy_statistic", (Y, F)),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"python": _fallback}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    print(f"{'case':40s} " + " ".join(f"{b:>12s}" for b in backends) + "   speedup")
    for label, name, argv in cases(np.random.default_rng(0)):
        times = {}
        for b, mod in backends.items():
            fn = getattr(mod, name)
            n, _ = timeit.Timer(lambda: fn(*argv)).autorange()
            times[b] = min(timeit.repeat(lambda: fn(*argv), number=n, repeat=args.repeat)) / n
        speed = f"{times['python'] / times['cython']:8.2f}x" if "cython" in times else "   n/a"
        print(f"{label:40s} " + " ".join(f"{times[b] * 1e6:10.1f}us" for b in backends) + f"  {speed}")


if __name__ == "__main__":
    main()
