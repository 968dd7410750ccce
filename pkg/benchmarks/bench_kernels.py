"""Compare the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run on identical inputs through both backends; outputs are
checked for exact equality before timings are reported.
"""
import argparse
import time

import numpy as np

from roiedge import _fallback

try:
    from roiedge import _kernels
except ImportError:  # extension not built
    _kernels = None


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases(rng):
    masks = [rng.random((64, 64)) < 0.45 for _ in range(50)]
    big = rng.random((360, 640)) < 0.3

    def hc_instance(n=5, r=4):
        acc = np.sort(rng.uniform(0.3, 1.0, (n, r)), axis=1)
        cost = np.sort(rng.uniform(0.0, 0.5, (n, r)), axis=1)
        nbytes = np.sort(rng.uniform(100, 5000, (n, r)), axis=1)
        gpu = cost * 0.05
        return acc, cost, nbytes, gpu, 0.1, float(nbytes[:, 2].sum()), 10.0, np.zeros(n, dtype=np.int64)

    climbs = [hc_instance() for _ in range(200)]
    padded = rng.random((16, 182, 322)).astype(np.float32)
    weight = rng.standard_normal((32, 16, 3, 3)).astype(np.float32)
    bias = rng.standard_normal(32).astype(np.float32)
    return {
        "label_components 50x 64x64": lambda k: [k.label_components(m) for m in masks],
        "label_components 360x640": lambda k: k.label_components(big),
        "hill_climb_local 200x N=5": lambda k: [k.hill_climb_local(*c) for c in climbs],
        "conv3x3 16->32 stride 4": lambda k: k.conv3x3_padded(padded, weight, bias, 4, 45, 80),
    }


def _same(a, b):
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.dtype == np.asarray(b).dtype and np.array_equal(a, b)
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':<30} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}  identical")
    for name, run in _cases(np.random.default_rng(args.seed)).items():
        tp, op = _time(lambda: run(_fallback), args.repeat)
        if _kernels is None:
            print(f"{name:<30} {tp * 1e3:>10.2f} {'-':>12} {'-':>8}  -")
            continue
        tc, oc = _time(lambda: run(_kernels), args.repeat)
        print(f"{name:<30} {tp * 1e3:>10.2f} {tc * 1e3:>12.2f} {tp / tc:>7.1f}x  {_same(op, oc)}")


if __name__ == "__main__":
    main()
