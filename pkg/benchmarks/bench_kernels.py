"""Compare the compiled and numpy edge kernels on vortex meshes.

    python benchmarks/bench_kernels.py --levels 5 6 7 8 --repeat 5
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from magep.hyperbolic import HyperbolicSolver
from magep.kernels import get_backend
from magep.scenarios import build_diocotron, build_vortex


def time_residual(solver, u, repeat):
    solver.residual(u, 0.0)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        solver.residual(u, 0.0)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(scenario, repeat, rng):
    u = scenario.u0.copy()
    # small velocity noise so both wavespeed branches are exercised
    u[:, 1:3] *= 1.0 + 0.01 * rng.standard_normal((len(u), 1))
    out = {}
    results = {}
    for name in ("cython", "numpy"):
        try:
            backend = get_backend(name)
        except ImportError:
            continue
        solver = HyperbolicSolver(scenario.disc, scenario.eos, scenario.boundary, backend)
        out[name] = time_residual(solver, u, repeat)
        results[name] = solver.residual(u, 0.0)[0]
    if len(results) == 2:
        r_c, r_n = results["cython"], results["numpy"]
        out["max_rel_diff"] = float(np.abs(r_c - r_n).max() / np.abs(r_n).max())
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, nargs="+", default=[5, 6, 7])
    ap.add_argument("--diocotron", type=int, nargs="*", default=[3, 4])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(1)

    print(f"{'case':<16}{'edges':>10}{'cython [ms]':>14}{'numpy [ms]':>14}{'speedup':>10}{'rel diff':>12}")
    cases = [(f"vortex r={r}", build_vortex(r)) for r in args.levels]
    cases += [(f"diocotron r={r}", build_diocotron(r)) for r in args.diocotron]
    for label, sc in cases:
        res = bench(sc, args.repeat, rng)
        c, n = res.get("cython", np.nan), res.get("numpy", np.nan)
        print(f"{label:<16}{sc.disc.graph.n_edges:>10d}{1e3 * c:>14.2f}{1e3 * n:>14.2f}"
              f"{n / c:>10.2f}{res.get('max_rel_diff', np.nan):>12.2e}")


if __name__ == "__main__":
    main()
