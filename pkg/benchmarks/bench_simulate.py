"""Timing of the simulation kernels: numba backend vs pure numpy.

Usage:  python benchmarks/bench_simulate.py [--d 10] [--n 4000] [--repeat 5]

Both backends consume the same pre-drawn random numbers, so the outputs are
also compared for agreement.
"""

import argparse
import time

import numpy as np

from levytree._accel import USE_NUMBA
from levytree.measures import MarginalSpec
from levytree.simulate import SimConfig, sample_truncated_points, simulate_increments
from levytree.tree import HeterogeneousStableModel, TreeModel, random_tree


def _model(d, seed=0):
    rng = np.random.default_rng(seed)
    tree = random_tree(d, rng)
    dep = TreeModel.hr(tree, {e: g for e, g in zip(tree.edges, rng.uniform(1, 6, d - 1))})
    return HeterogeneousStableModel(dep, MarginalSpec([1.5] * d, [1.0] * d, [0.5] * d))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not USE_NUMBA:
        raise SystemExit("numba is disabled or missing; unset LEVYTREE_DISABLE_NUMBA to compare backends")

    model = _model(args.d)
    cfg = SimConfig(epsilon=0.01, n_steps=args.n, seed=1, drift_mc_samples=2000)
    cases = {
        "truncated points": lambda b: sample_truncated_points(model.dependence, 0.5, args.points, rng=2, backend=b)[0],
        "increments": lambda b: simulate_increments(model, cfg, backend=b).data,
    }
    print(f"d={args.d}  n={args.n}  points={args.points}  best of {args.repeat}")
    print(f"{'kernel':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, run in cases.items():
        run("numba")  # compile outside the timed region
        t_nb, out_nb = best_of(lambda: run("numba"), args.repeat)
        t_np, out_np = best_of(lambda: run("numpy"), args.repeat)
        diff = float(np.max(np.abs(out_nb - out_np)))
        print(f"{name:<18}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}x{diff:>14.2e}")


if __name__ == "__main__":
    main()
