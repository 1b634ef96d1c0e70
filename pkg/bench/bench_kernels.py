"""Timing of the numba kernels against their numpy fallbacks.

Builds a realistic decomposition by running the learner on the 2D
singularity case, then times each kernel on both backends with identical
inputs and reports the largest relative difference between the two.

    python bench/bench_kernels.py [--points 200000] [--repeat 5] [--budget 1000]
"""

import argparse
import time

import numpy as np

from dalpce import _kernels
from dalpce.benchmarks import get_case
from dalpce.learner import LearnerConfig, run


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--points", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--budget", type=int, default=1000)
    args = parser.parse_args(argv)

    if _kernels.numba_kernels is None:
        print("numba is not available; nothing to compare")
        return 1

    case = get_case("singularity2d")
    state = run(case, LearnerConfig(dim=2, budget=args.budget, seed=0))
    decomp = state.decomposition
    rng = np.random.default_rng(1)
    x = rng.random((args.points, 2))
    tree = decomp.tree_arrays()
    packed = decomp.packed()
    owner = _kernels.numpy_kernels.locate_tree(x, *tree)
    cands = state.screening.points
    ed = state.ed_points
    print(f"decomposition: {len(decomp)} sub-domains, ED {len(ed)}, probe points {len(x)}")

    def nearest(k):
        d2 = np.full(len(cands), np.inf)
        idx = np.full(len(cands), -1, dtype=np.int64)
        k.nearest_update(cands, ed, 0, d2, idx)
        return d2, idx

    jobs = {
        "locate_tree": lambda k: k.locate_tree(x, *tree),
        "eval_packed": lambda k: k.eval_packed(x, owner, *packed, False),
        "nearest_update": nearest,
    }
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}  max rel diff")
    for name, job in jobs.items():
        job(_kernels.numba_kernels)  # compile outside the timing
        t_np, r_np = best_of(lambda: job(_kernels.numpy_kernels), args.repeat)
        t_nb, r_nb = best_of(lambda: job(_kernels.numba_kernels), args.repeat)
        pairs = zip(r_np, r_nb) if isinstance(r_np, tuple) else [(r_np, r_nb)]
        diff = max(float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300), initial=0.0))
                   for a, b in pairs)
        print(f"{name:<16}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>10.1f}  {diff:.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
