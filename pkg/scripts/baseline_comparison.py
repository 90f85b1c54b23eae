"""Gradient and prox evaluations needed by each method to reach a suboptimality level.

Logistic regression with group lasso plus L1 on synthetic sparse data. Stochastic
TOS is tuned over a grid of initial steps and keeps the best run.

    python scripts/baseline_comparison.py --n 2000 --p 500 --out results/compare
"""
import argparse
import os

import numpy as np

from vrtos.data import generate_synthetic
from vrtos.diagnostics import first_crossing
from vrtos.model import SmoothModel
from vrtos.penalties import L1, GroupLasso
from vrtos.solvers import DivergenceError, Problem, SolverConfig, reference_solution, run


def crossing(res, p_star, column, level):
    return first_crossing(res.trace.column("objective") - p_star, res.trace.column(column), level)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--p", type=int, default=500)
    ap.add_argument("--density", type=float, default=0.02)
    ap.add_argument("--lam", type=float, default=1e-3)
    ap.add_argument("--level", type=float, default=1e-6)
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="directory for per-solver trace CSVs")
    args = ap.parse_args()

    n, p = args.n, args.p
    model = SmoothModel(generate_synthetic(n, p, args.density, "logistic", args.seed), "logistic", 1.0 / n)
    groups = [range(j, min(j + 10, p)) for j in range(0, p, 10)]
    pb = Problem(model, [GroupLasso(groups, p, args.lam), L1(p, args.lam)])
    p_star = reference_solution(pb).objective
    L_f = model.smoothness_constants().L_f

    runs = {}
    for kind in ("vrtos", "vrtos-sparse", "saga", "proxsvrg"):
        runs[kind] = run(pb, kind, SolverConfig(seed=args.seed, max_epochs=args.epochs, tol=1e-300))
    best = None
    for c in (1.0, 3.0, 10.0, 30.0, 100.0):
        try:
            res = run(pb, "stos", SolverConfig(seed=args.seed, step_size=c / L_f, max_epochs=2 * args.epochs,
                                               tol=1e-300, trace_every=5))
        except DivergenceError:
            continue
        if best is None or res.trace.column("objective").min() < best.trace.column("objective").min():
            best = res
    if best is not None:
        runs["stos"] = best

    print(f"P* = {p_star:.12f}; evaluations to reach suboptimality {args.level:g}")
    print(f"{'solver':14s} {'epochs':>8s} {'grad evals':>12s} {'prox evals':>12s} {'final subopt':>14s}")
    for kind, res in runs.items():
        ep, ge, pe = (crossing(res, p_star, col, args.level) for col in ("epoch", "grad_evals", "prox_evals"))
        final = res.trace.column("objective")[-1] - p_star
        print(f"{kind:14s} {ep:8.0f} {ge:12.0f} {pe:12.0f} {final:14.3e}")
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, f"{kind}.csv"), "w", newline="") as fh:
                fh.write(res.trace.to_csv())


if __name__ == "__main__":
    main()
