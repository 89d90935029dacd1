#!/usr/bin/env python3
"""Adaptive experiment on the slit square.

Drives the solve / estimate / mark / refine loop for the corner-singular
problem and reports the error decay and estimator efficiency per level.
"""

import argparse
from pathlib import Path

from rtrecovery.analysis import adaptive_study, fitted_orders, write_table_csv
from rtrecovery.mesh import write_mesh_text
from rtrecovery.problems import initial_mesh, slit_square_problem


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=int, default=1, choices=(0, 1, 2, 3))
    ap.add_argument("--theta", type=float, default=0.3)
    ap.add_argument("--max-ndof", type=float, default=2e5)
    ap.add_argument("--initial-nt", type=int, default=80)
    ap.add_argument("--out", type=Path, default=Path("adaptive"))
    ap.add_argument("--save-final-mesh", action="store_true")
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    problem = slit_square_problem()
    mesh = initial_mesh(3, args.initial_nt)
    reports, meshes = adaptive_study(problem, mesh, args.r, args.theta,
                                     int(args.max_ndof), return_meshes=True)
    write_table_csv(args.out / "table.csv", reports)
    if args.save_final_mesh:
        write_mesh_text(args.out / "final_mesh.txt", meshes[-1])

    print(f"{'level':>5s} {'nt':>7s} {'ndof':>8s} {'e_p':>10s} {'eta':>10s} {'eff':>6s}")
    for rep in reports:
        print(f"{rep.level:5d} {rep.nt:7d} {rep.ndof:8d} {rep.e_p:10.3e} "
              f"{rep.eta:10.3e} {rep.efficiency:6.3f}")
    fits = fitted_orders(reports)
    print(f"fitted order of e_p vs ndof: {fits['e_p']:.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
