"""Time the compiled kernels against the pure-Python reference.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from d2dclust import kernels
from d2dclust.energy import head_budget_arrays
from d2dclust.config import PowerModel
from d2dclust.instances import random_instance
from d2dclust.optimal import cost_arrays


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    rng = np.random.default_rng(7)
    _, users8, t8, _ = random_instance(rng, 8)
    _, users20, t20, _ = random_instance(rng, 20)
    d8, m8 = cost_arrays(t8, users8)
    d20, m20 = cost_arrays(t20, users20)
    ok8, ok20 = np.ones(8, bool), np.ones(20, bool)
    energy = head_budget_arrays(t20, users20, PowerModel(), 0.5)
    demand = rng.uniform(0, 8, 40)
    u = rng.random((1000, 40))
    order = np.argsort(rng.random((1000, 40)), axis=1).astype(np.int64)
    return {
        "exhaustive 8 users": lambda k: k.exhaustive(d8, m8, ok8),
        "branch-and-bound 20 users": lambda k: k.branch_and_bound(d20, m20, ok20, None, 2_000_000),
        "energy branch-and-bound 20 users": lambda k: k.branch_and_bound(d20, m20, ok20, energy, 2_000_000),
        "scheduler 40 flows x 1000 subframes": lambda k: k.schedule(demand, 50, u, order),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    impls = kernels.backends()
    if "compiled" not in impls:
        print("compiled extension not built; only the Python reference is available")
    print(f"{'case':40s}" + "".join(f"{name:>12s}" for name in impls) + "     speedup")
    for label, fn in cases().items():
        times, outs = {}, {}
        for name, mod in impls.items():
            times[name], outs[name] = _time(lambda: fn(mod), args.repeat)
        same = "" if len(outs) < 2 else ("" if _same(*outs.values()) else "  MISMATCH")
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{label:40s}" + "".join(f"{times[n]:11.4f}s" for n in impls) + f"  {speed:9.1f}x{same}")


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


if __name__ == "__main__":
    main()
