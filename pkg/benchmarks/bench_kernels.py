"""Compare the compiled and numpy kernels on load-vector moments and squared-error sums.

Usage: python benchmarks/bench_kernels.py [--cases tet:1:2:8,hex:1:2:8] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from gradiv import kernels
from gradiv.analysis import error_norms
from gradiv.assembly import cell_moments, manufactured_problem
from gradiv.fespace import build_space
from gradiv.mesh import build_mesh


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", default="tet:1:2:8,tet:3:2:8,hex:1:2:8,hex:2:3:6",
                    help="comma list of cell:r:k:N")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if kernels.BACKEND != "cython":
        raise SystemExit("the compiled extension is not importable; build it with pip install -e .")
    mp = manufactured_problem()
    print("| case | cells | kernel | numpy (s) | cython (s) | speed-up | max rel. diff |")
    print("|---|---|---|---|---|---|---|")
    for case in args.cases.split(","):
        cell, r, k, N = case.split(":")
        space = build_space("W", build_mesh(cell, int(N)), int(r), int(k))
        rng = np.random.default_rng(0)
        coeffs = rng.standard_normal(space.dim) * 1e-6
        jobs = {
            "moments": lambda b: cell_moments(space, mp.f, "value", backend=b),
            "sqerr": lambda b: np.array(list(error_norms(space, coeffs, mp.u, backend=b).values.values())),
        }
        for name, job in jobs.items():
            tn, vn = best_of(lambda: job("numpy"), args.repeat)
            tc, vc = best_of(lambda: job("cython"), args.repeat)
            diff = float(np.max(np.abs(vn - vc)) / max(np.max(np.abs(vn)), 1e-300))
            print(f"| {case} | {space.mesh.num_cells} | {name} | {tn:.3f} | {tc:.3f} | {tn / tc:.1f}x | {diff:.1e} |")


if __name__ == "__main__":
    main()
