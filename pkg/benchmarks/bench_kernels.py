"""Compare the compiled and numpy element kernels on a full Jacobian assembly.

Usage: python3 benchmarks/bench_kernels.py [--n 8 16 32] [--repeat 3]
"""
import argparse
import time

import numpy as np

from ddflow import kernels
from ddflow.discretization import Discretization
from ddflow.fixtures import desk_fixture
from ddflow.state import newton_jacobian


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, nargs="+", default=[8, 16, 32])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    try:
        kernels.use_backend("cython")
    except ImportError:
        print("compiled extension not built; only the python backend is available")
        return 1
    print(f"{'n':>4} {'cython [s]':>12} {'python [s]':>12} {'speedup':>8} {'max |diff|':>11}")
    for n in args.n:
        disc0, _ = desk_fixture(n)
        disc = Discretization(disc0.mesh, disc0.model)
        x = np.random.default_rng(0).standard_normal(disc.size)
        res = {}
        for name in ("cython", "python"):
            kernels.use_backend(name)
            res[name] = (best_of(lambda: newton_jacobian(disc, x), args.repeat),
                         newton_jacobian(disc, x))
        diff = abs(res["cython"][1] - res["python"][1]).max()
        tc, tp = res["cython"][0], res["python"][0]
        print(f"{n:>4} {tc:>12.4f} {tp:>12.4f} {tp / tc:>8.2f} {diff:>11.2e}")
    kernels.use_backend("cython")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
