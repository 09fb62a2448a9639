"""Time the closed-loop kernel on each available backend.

    python benchmarks/bench_kernel.py [--n 20000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from arxschur import kernels
from arxschur.estim import WeightPolicy
from arxschur.loop import NoiseGen, run_closed_loop
from arxschur.model import random_causal_model, demo_model


def bench(model, policy, n, repeat, backend):
    noise = NoiseGen(model.Gamma, seed=0)
    eps = noise.draw(n)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        run_closed_loop(model, policy, N=n, eps=eps, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    cases = [
        ("demo d=2 p=1 q=1, ls", demo_model(), WeightPolicy()),
        ("demo d=2 p=1 q=1, wls", demo_model(), WeightPolicy("wls", 0.5)),
        ("random d=3 p=2 q=2, ls", random_causal_model(np.random.default_rng(0), 3, 2, 2, rho=0.6, scale=0.3),
         WeightPolicy()),
    ]
    backends = kernels.available()
    print(f"{'case':<26}" + "".join(f"{b + ' us/step':>18}" for b in backends) + f"{'speedup':>10}")
    for name, model, policy in cases:
        times = {b: bench(model, policy, args.n, args.repeat, b) for b in backends}
        row = f"{name:<26}" + "".join(f"{1e6 * times[b] / args.n:>18.3f}" for b in backends)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>10.1f}x"
        print(row)


if __name__ == "__main__":
    main()
