"""Compare the numba-compiled kernels with their numpy forms.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 1000000]

Both forms receive the same inputs and must return the same arrays; the
script checks that before timing.  Compilation happens once up front and
is reported separately.
"""
import argparse
import math
import time

import numpy as np
from numba import njit

from pcv import kernels
from pcv.distributions import Bucketing


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(size, g):
    bk = Bucketing(10**6, 0.01)
    p = g.random(size) ** 4
    probs = g.exponential(size=10**5)
    probs /= probs.sum()
    prob, alias = kernels._alias_build_loop(probs)
    u = g.random(size)
    width = 9
    tuples = g.integers(0, 10**5, size=(size // width, width))
    masses = np.where(g.random(10**5) < 0.3, probs, 0.0)
    ug = g.random(tuples.shape[0])
    inside = g.random(size) < 0.05
    return {
        "bucket_indices": ((p, bk.boundaries, math.log1p(bk.tau)), None),
        "alias_sample": ((prob, alias, u), None),
        "choose_indices": ((tuples, masses, True, ug), None),
        "alias_build": ((probs,), kernels._alias_build_loop),
        "sampler_segments": ((inside, 60, size), kernels._segments_loop),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=1_000_000)
    args = ap.parse_args()
    g = np.random.default_rng(0)
    print(f"{'kernel':22} {'compile s':>10} {'numba s':>10} {'numpy s':>10} {'speedup':>8}")
    for name, (inputs, loop) in cases(args.size, g).items():
        # kernels without a vectorised form are timed as interpreted python loops
        slow = kernels.NUMPY_FORMS.get(name, loop)
        fast_src = kernels.LOOP_FORMS.get(name, loop)
        fast = njit(fast_src)
        t = time.perf_counter()
        got = fast(*inputs)
        compile_s = time.perf_counter() - t
        if loop is None:
            want = slow(*inputs)
            same = all(np.array_equal(a, b) for a, b in zip(np.atleast_1d(got), np.atleast_1d(want))) \
                if isinstance(got, tuple) else np.array_equal(got, want)
            assert same, f"{name}: backends disagree"
        t_fast = best_of(lambda: fast(*inputs), args.repeat)
        t_slow = best_of(lambda: slow(*inputs), 1 if loop is not None else args.repeat)
        label = name if loop is None else name + " (py)"
        print(f"{label:22} {compile_s:10.3f} {t_fast:10.4f} {t_slow:10.4f} {t_slow / t_fast:8.1f}x")


if __name__ == "__main__":
    main()
