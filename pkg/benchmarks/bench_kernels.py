"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 5]
"""
import argparse
import time

import numpy as np

from guessvi import gen_random, gen_slow_mc, initial_vectors
from guessvi.kernels import available_backends


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n):
    yield "slow-mc", gen_slow_mc(n, 0.5)
    yield "random-mdp", gen_random(n, 4, (1, 2, 3), 0, model_type="mdp", locality=50)


def run(n, repeat, sweeps):
    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'model':<12} {'kernel':<16} " + " ".join(f"{b:>10}" for b in backends) + "   speedup")
    for name, m in cases(n):
        op, add = m.ops
        args = (op, add, m.indptr, m.succ, m.prob)
        b0 = initial_vectors(m)
        rev_indptr, rev_idx = m.reverse
        kernels = {
            "sweep": lambda impl: impl.sweep(*args, b0.upper.copy(), np.empty(m.num_states)),
            f"interval x{sweeps}": lambda impl: impl.interval_sweeps(
                *args, b0.lower.copy(), b0.upper.copy(), 0.0, sweeps),
            f"value x{sweeps}": lambda impl: impl.value_sweeps(
                *args, b0.lower.copy(), 0.0, sweeps),
            "bfs": lambda impl: impl.bfs_distances(rev_indptr, rev_idx, m.target_mask),
        }
        for kname, fn in kernels.items():
            t = {b: best_of(lambda: fn(impl), repeat) for b, impl in backends.items()}
            cells = " ".join(f"{t[b] * 1e3:>8.2f}ms" for b in backends)
            speed = (f"{t['python'] / t['cython']:8.1f}x" if "cython" in t else "")
            print(f"{name:<12} {kname:<16} {cells} {speed}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sweeps", type=int, default=50)
    args = ap.parse_args()
    run(args.n, args.repeat, args.sweeps)


if __name__ == "__main__":
    main()
