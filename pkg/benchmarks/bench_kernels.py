"""Time the compiled and numpy kernel backends on GRPO-sized token batches.

    python3 benchmarks/bench_kernels.py [--tokens 8 4096] [--vocab 16] [--repeat 20]
"""

import argparse
import time

import numpy as np

from uirft import kernels


def _inputs(n, v, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, v))
    zref = z + 0.1 * rng.normal(size=(n, v))
    tokens = rng.integers(0, v, size=n)
    old = np.log(rng.uniform(0.05, 0.9, size=n))
    adv = rng.normal(size=n)
    w = np.full(n, 1.0 / n)
    return z, zref, tokens, old, adv, w


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tokens", type=int, nargs="+", default=[8, 4096])
    ap.add_argument("--vocab", type=int, nargs="+", default=[2, 5, 16, 64])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    backends = {"python": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled backend unavailable; timing the numpy backend only")

    print(f"{'tokens':>6} {'vocab':>5} {'kernel':<16} " + " ".join(f"{b:>12}" for b in backends) + "   speedup")
    for n, v in ((n, v) for n in args.tokens for v in args.vocab):
        z, zref, tok, old, adv, w = _inputs(n, v)
        rows = {
            "surrogate_head": lambda m: m.surrogate_head(z, zref, tok, old, adv, w, 0.2, 0.04, 1.0),
            "log_softmax_rows": lambda m: m.log_softmax_rows(z, 1.0),
        }
        for name, call in rows.items():
            times = {b: _best(lambda m=m: call(m), args.repeat) for b, m in backends.items()}
            cols = " ".join(f"{times[b] * 1e3:>10.3f}ms" for b in backends)
            speed = f"{times['python'] / times['cython']:>8.1f}x" if "cython" in times else ""
            print(f"{n:>6} {v:>5} {name:<16} {cols} {speed}")
        if "cython" in backends:
            a = backends["python"].surrogate_head(z, zref, tok, old, adv, w, 0.2, 0.04, 1.0)
            b = backends["cython"].surrogate_head(z, zref, tok, old, adv, w, 0.2, 0.04, 1.0)
            assert abs(a[0] - b[0]) < 1e-10 and np.allclose(a[1], b[1], atol=1e-12)


if __name__ == "__main__":
    main()
