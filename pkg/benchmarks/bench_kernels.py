"""Time the numpy and compiled kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [SYSTEM ...]

Prints one row per (system, kernel) with the best-of-``repeat`` wall time
for each backend and for the dispatched entry points the package uses, the
compiled-over-numpy speedup and the largest output difference.
"""

import argparse
import time

import numpy as np

from echoprop import kernels
from echoprop.kernels import backends
from echoprop.systems import catalog_get


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(spec, rng, batch, steps, pool):
    args = spec.kernel_args()
    m = spec.input_dim
    X = np.ascontiguousarray(spec.sample_states(rng, batch))
    U = rng.uniform(-1, 1, (batch, steps, m))
    shared = rng.uniform(-1, 1, (steps, m))
    depths = np.arange(1, steps + 1, dtype=np.int64)
    P = np.ascontiguousarray(spec.sample_states(rng, pool))
    return {
        "iterate": lambda k: k.iterate(*args, X, U),
        "staggered": lambda k: k.staggered(*args, X[:64], shared, depths),
        "diameter": lambda k: np.array(k.diameter(spec.metric_code, P)[0]),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("systems", nargs="*", default=["affine(0.5,1)", "tanh_esn(0.9)", "circle_square"])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batch", type=int, default=256)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--pool", type=int, default=400)
    args = ap.parse_args(argv)

    kmods = backends()
    if "cython" not in kmods:
        print("compiled backend not built; run `python setup.py build_ext --inplace` first")
    kmods["dispatch"] = kernels
    names = list(kmods)
    print(f"{'system':<16}{'kernel':<11}" + "".join(f"{n + ' [ms]':>14}" for n in names)
          + f"{'speedup':>10}{'max |diff|':>12}")
    for sysname in args.systems:
        spec = catalog_get(sysname)
        rng = np.random.default_rng(0)
        for kernel, fn in cases(spec, rng, args.batch, args.steps, args.pool).items():
            times, outs = [], []
            for n in names:
                t, out = best_time(lambda: fn(kmods[n]), args.repeat)
                times.append(t)
                outs.append(np.asarray(out))
            speedup = times[0] / times[1] if "cython" in kmods else 1.0
            diff = max(float(np.max(np.abs(outs[0] - o))) for o in outs)
            print(f"{sysname:<16}{kernel:<11}" + "".join(f"{1e3 * t:>14.3f}" for t in times)
                  + f"{speedup:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
