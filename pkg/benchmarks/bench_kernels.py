"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on the same inputs under both backends; outputs must agree
exactly before timings are reported.
"""
import argparse
import timeit

import numpy as np

from rbmokit.covering import _conflicts
from rbmokit.generate import cantor_dust, random_euclidean, uniform_grid
from rbmokit.kernels import backends


def cases():
    rng = np.random.default_rng(0)
    for sp in (uniform_grid(100, 1), uniform_grid(14, 2), cantor_dust(8)):
        f = np.abs(rng.normal(size=sp.n))
        yield "maximal_profile", sp.name, (sp.dist, sp.weights, f, np.inf)
    for n in (24, 40):
        sp = random_euclidean(n, 1)
        conflict = _conflicts(sp, np.arange(sp.n), 0.25, closed=False)
        yield "max_independent_set", f"random_euclidean({n})", (conflict,)
    sp = random_euclidean(400, 2)
    yield "greedy_independent", "random_euclidean(400)", (_conflicts(sp, np.arange(sp.n), 0.1, closed=False),)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    found = backends()
    if "cython" not in found:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'kernel':<22}{'input':<26}" + "".join(f"{k:>12}" for k in found) + f"{'speedup':>10}")
    for name, label, inputs in cases():
        times, outs = {}, {}
        for key, mod in found.items():
            fn = getattr(mod, name)
            outs[key] = fn(*inputs)
            times[key] = min(timeit.repeat(lambda: fn(*inputs), number=1, repeat=args.repeat))
        ref = outs["python"]
        for key, out in outs.items():
            if not np.array_equal(np.asarray(out), np.asarray(ref)):
                raise SystemExit(f"{name} on {label}: backend {key} disagrees with python")
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<22}{label:<26}" + "".join(f"{times[k]:>11.4f}s" for k in found) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
