"""Time the compiled kernels against their plain-numpy sources.

    python benchmarks/bench_kernels.py [--hidden 150] [--window 8] [--batch 32] [--repeat 20]

Both paths run the same source: ``fn`` is the numba dispatcher (or the plain
function when RNNCAST_DISABLE_NUMBA=1) and ``fn.py_func`` is always the
uncompiled original.
"""
import argparse
import time

import numpy as np

from rnncast import _jit, kernels

GATES = {"rnn": 1, "lstm": 4, "gru": 3}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(name, H, T, B, repeat):
    rng = np.random.default_rng(0)
    G = GATES[name]
    xs = rng.random((T, B, 1))
    W = rng.normal(0, 0.1, (1, G * H))
    U = rng.normal(0, 0.1, (H, G * H))
    b = np.zeros(G * H)
    dhs = rng.normal(size=(T, B, H))
    fwd = getattr(kernels, f"{name}_forward")
    bwd = getattr(kernels, f"{name}_backward")

    def step(f, g):
        out = f(xs, W, U, b)
        out = out if isinstance(out, tuple) else (out,)
        g(xs, W, U, *out, dhs)

    step(fwd, bwd)  # compile outside the timing
    fast = best_of(lambda: step(fwd, bwd), repeat)
    slow = best_of(lambda: step(fwd.py_func, bwd.py_func), repeat)
    return fast, slow


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", type=int, default=150)
    ap.add_argument("--window", type=int, default=8)
    ap.add_argument("--batch", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    print(f"backend={_jit.BACKEND} H={args.hidden} T={args.window} B={args.batch}")
    print(f"{'kernel':<6} {'dispatch ms':>12} {'numpy ms':>10} {'ratio':>7}")
    for name in GATES:
        fast, slow = bench(name, args.hidden, args.window, args.batch, args.repeat)
        print(f"{name:<6} {fast * 1e3:12.3f} {slow * 1e3:10.3f} {slow / fast:7.2f}")


if __name__ == "__main__":
    main()
