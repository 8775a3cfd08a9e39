"""Command-line front end.

Subcommands: solve-ct (one trajectory), explore (continuous-time critical
regions), dt (explicit discrete-time partition at one horizon), compare
(region counts over several horizons).  All artifacts are written
atomically into --out.  Exit codes: 2 parse/usage error, 3 infeasible,
4 no convergence, 5 enumeration budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import probfile, svg
from .errors import Budget, Infeasible, NoConvergence, NoStructure
from .mpqp import (compare_ct_dt, discretize_zoh, enumerate_partition,
                   feasible_bounds, solve_qp)
from .regions import explore_regions, regions_to_dict
from .structure import detect_structure

EXIT_PARSE, EXIT_INFEASIBLE, EXIT_NOCONV, EXIT_BUDGET = 2, 3, 4, 5


def _write(path, text):
    probfile.write_atomic(path, text)
    print(f"wrote {path}")


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    _write(path, buf.getvalue())


def _load_problem(path):
    try:
        return probfile.load(path)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: cannot load problem file {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


def cmd_solve_ct(args):
    problem = _load_problem(args.problem)
    x0 = np.asarray(args.x0, dtype=float)
    try:
        structure, traj = detect_structure(problem, x0, g_tol=args.tol,
                                           mu_tol=args.tol)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NoStructure, NoConvergence) as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NOCONV

    os.makedirs(args.out, exist_ok=True)
    step = args.dt if args.dt else problem.T / 500
    ts = np.arange(0.0, problem.T + step / 2, step)
    ts[-1] = min(ts[-1], problem.T)
    rows = []
    for t in ts:
        p = traj.point(min(t, problem.T))
        rows.append([f"{t:.10g}",
                     *(f"{v:.12g}" for v in p.x),
                     *(f"{v:.12g}" for v in p.u),
                     *(f"{v:.12g}" for v in p.lam),
                     *(f"{v:.12g}" for v in p.mu),
                     *(f"{v:.12g}" for v in p.g),
                     f"{p.H:.12g}"])
    n, m, c = problem.n, problem.m, problem.n_con
    header = (["t"] + [f"x{i+1}" for i in range(n)] + [f"u{i+1}" for i in range(m)]
              + [f"lam{i+1}" for i in range(n)] + [f"mu{i+1}" for i in range(c)]
              + [f"g{i+1}" for i in range(c)] + ["H"])
    _write_csv(os.path.join(args.out, "trajectory.csv"), header, rows)

    summary = {
        "x0": [float(v) for v in x0],
        "structure": structure.label(),
        "arcs": [list(a.indices) for a in structure.arcs],
        "t_switch": [float(t) for t in traj.t_switch],
        "cost": float(traj.cost),
    }
    _write(os.path.join(args.out, "summary.json"),
           json.dumps(summary, indent=2) + "\n")
    chart = svg.trajectory_chart(
        {f"x{i+1}": (ts, [traj.point(t).x[i] for t in ts]) for i in range(n)}
        | {"u1": (ts, [traj.point(t).u[0] for t in ts])},
        title=f"structure {structure.label()}")
    _write(os.path.join(args.out, "trajectory.svg"), chart)
    print(f"structure: {structure.label()}  t_switch: {summary['t_switch']}  "
          f"cost: {traj.cost:.9g}")
    return 0


def cmd_explore(args):
    problem = _load_problem(args.problem)
    try:
        regions = explore_regions(problem, grid=args.grid,
                                  fit_degree=args.fit_degree)
    except (NoStructure, NoConvergence) as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    if not regions:
        print("error: parameter box entirely infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE

    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "regions.json"),
           json.dumps(regions_to_dict(regions), indent=2) + "\n")

    rows = []
    for r in regions:
        conds = []
        for cnd in r.inequalities:
            if hasattr(cnd, "lo"):
                conds.append(f"{cnd.lo:.6g} <= x0 <= {cnd.hi:.6g}")
            else:
                terms = " + ".join(f"{a:.6g}*x0{i+1}"
                                   for i, a in enumerate(cnd.a))
                conds.append(f"{terms} <= {cnd.b:.6g}")
        rows.append([r.label, r.structure.label(), "; ".join(conds),
                     len(r.t_s_fit)])
    _write_csv(os.path.join(args.out, "regions.csv"),
               ["label", "structure", "conditions", "n_switches"], rows)

    fit_rows = []
    for r in regions:
        for s, f in enumerate(r.t_s_fit):
            fit_rows.append([r.label, s, f.degree, f"{f.r2:.6f}",
                             " ".join(f"{c:.12g}" for c in f.coeffs)])
    _write_csv(os.path.join(args.out, "fits.csv"),
               ["label", "event", "degree", "r2", "coeffs_graded_lex"], fit_rows)

    box = problem.theta_box
    if problem.n == 1:
        art = svg.region_map_1d(regions, box, title="critical regions")
    else:
        art = svg.region_map_2d(regions, box, title="critical regions")
    _write(os.path.join(args.out, "regions.svg"), art)
    for row in rows:
        print(" ".join(str(v) for v in row[:3]))
    return 0


def cmd_dt(args):
    problem = _load_problem(args.problem)
    dt = discretize_zoh(problem, args.N)
    try:
        part = enumerate_partition(dt, strategy=args.strategy, grid=args.grid)
    except Budget as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    try:
        bounds = feasible_bounds(dt)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    os.makedirs(args.out, exist_ok=True)
    rows = []
    for i, r in enumerate(part.regions):
        rows.append([f"DR{i+1:02d}", len(r.active),
                     " ".join(map(str, r.active)),
                     " ".join(f"{v:.12g}" for v in r.K.ravel()),
                     " ".join(f"{v:.12g}" for v in r.k),
                     f"{r.chebyshev:.6g}"])
    _write_csv(os.path.join(args.out, f"dt_partition_N{args.N}.csv"),
               ["label", "n_active", "active_rows", "input_gain_rows",
                "input_offsets", "chebyshev_radius"], rows)
    print(f"N={args.N} regions={part.n_regions}")
    print("feasible bounds per parameter:")
    for i, (lo, hi) in enumerate(bounds):
        print(f"  theta{i+1}: [{lo:.6g}, {hi:.6g}]")
    return 0


def cmd_compare(args):
    problem = _load_problem(args.problem)
    try:
        regions = explore_regions(problem, grid=args.grid,
                                  fit_degree=args.fit_degree)
    except (NoStructure, NoConvergence) as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NOCONV

    def ct_cost(theta):
        _, traj = detect_structure(problem, theta)
        return traj.cost, traj.point(0.0).u

    probes = [r.samples[len(r.samples) // 2] for r in regions]
    try:
        report = compare_ct_dt(problem, regions, args.N_list, probes, ct_cost,
                               strategy=args.strategy, grid=args.grid)
    except Budget as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET

    os.makedirs(args.out, exist_ok=True)
    rows = [[N, report.dt_counts[N], f"{report.cost_gap[N]:.6g}",
             f"{report.u0_gap[N]:.6g}"] for N in args.N_list]
    _write_csv(os.path.join(args.out, "comparison.csv"),
               ["N", "dt_regions", "max_rel_cost_gap", "max_u0_gap"], rows)
    print(f"continuous-time regions: {report.ct_regions}")
    for N in args.N_list:
        print(f"N={N:4d}  regions={report.dt_counts[N]:4d}  "
              f"cost_gap={report.cost_gap[N]:.3g}  u0_gap={report.u0_gap[N]:.3g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mpoc",
        description="explicit solutions of constrained linear-quadratic "
                    "optimal control, continuous and discrete time")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("problem", help="problem file (key = value format)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--tol", type=float, default=1e-7,
                       help="constraint/multiplier tolerance")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (1 = sequential)")

    p = sub.add_parser("solve-ct", help="solve one trajectory")
    common(p)
    p.add_argument("x0", nargs="+", type=float, help="initial state")
    p.add_argument("--dt", type=float, default=None,
                   help="output sampling step (default T/500)")
    p.set_defaults(func=cmd_solve_ct)

    p = sub.add_parser("explore", help="continuous-time critical regions")
    common(p)
    p.add_argument("--grid", type=int, default=None, help="scan grid per axis")
    p.add_argument("--fit-degree", type=int, default=3,
                   help="switching-time fit degree")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("dt", help="explicit discrete-time partition")
    common(p)
    p.add_argument("--N", type=int, required=True, help="horizon length")
    p.add_argument("--strategy", default="auto",
                   choices=["auto", "sweep1d", "grid_seeded", "combinatorial"])
    p.add_argument("--grid", type=int, default=None, help="seed grid per axis")
    p.set_defaults(func=cmd_dt)

    p = sub.add_parser("compare", help="region counts over several horizons")
    common(p)
    p.add_argument("--N-list", type=int, nargs="+", required=True,
                   dest="N_list", help="horizon lengths")
    p.add_argument("--strategy", default="auto",
                   choices=["auto", "sweep1d", "grid_seeded", "combinatorial"])
    p.add_argument("--grid", type=int, default=None, help="scan grid per axis")
    p.add_argument("--fit-degree", type=int, default=3)
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors already; normalise others
        raise SystemExit(EXIT_PARSE if exc.code not in (0,) else 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
