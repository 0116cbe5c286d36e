"""Compiled vs numpy kernels: timings and output equality.

    python3 benchmarks/bench_kernels.py [--scale 1e6] [--repeat 3]
"""

import argparse
import sys
import time

import numpy as np

from diophdim import _pykernels
from diophdim.numeric import TargetVector

try:
    from diophdim import _ckernels
except ImportError:
    _ckernels = None


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a), np.asarray(b))
    return a == b


def cases(scale):
    A = TargetVector.parse("sqrt(2),sqrt(3)")
    F = A.fixed()
    G = [0, 0]
    beta = TargetVector.parse("1/3,1/7").fixed()
    n_centers = 200_000
    rng = np.random.default_rng(0)
    C = rng.integers(0, 2**64, size=(n_centers, 2), dtype=np.uint64)
    r = 1 << 50
    return [
        ("record_scan", lambda k: k.record_scan(F, G, 1, scale, 2**64 - 1, 2**64 - 1)),
        ("ball_scan", lambda k: k.ball_scan(F, beta, 0, scale, r, r, True)),
        ("shell_minima", lambda k: k.shell_minima(F, 150)),
        ("ball_hits", lambda k: k.ball_hits(C, beta, r << 8, r << 8, 4)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1e6, help="orbit length for the scans")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return 1
    scale = int(args.scale)
    print(f"{'kernel':<14}{'numpy s':>10}{'cython s':>10}{'speedup':>9}  equal")
    ok = True
    for name, call in cases(scale):
        tp, op = _best(lambda: call(_pykernels), args.repeat)
        tc, oc = _best(lambda: call(_ckernels), args.repeat)
        same = _same(op, oc)
        ok &= same
        print(f"{name:<14}{tp:>10.4f}{tc:>10.4f}{tp / tc:>8.1f}x  {same}")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
