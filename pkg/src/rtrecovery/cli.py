"""Experiment driver.

Two subcommands:

* ``run``: solve one of the reference problems over a refinement hierarchy
  (uniform regular, uniform bisection, or adaptive), recover the flux, and
  write ``table.csv``, ``orders.txt`` and ``convergence.svg`` to the output
  directory.
* ``verify``: run the randomised identity suite on random triangles and
  print a pass/fail table of worst residuals.

Options may come from a flat ``key=value`` config file (one pair per line,
``#`` comments allowed); command-line flags take precedence over the file.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .analysis import (adaptive_study, fitted_orders, plot_convergence,
                       uniform_study, write_orders, write_table_csv)
from .mesh import read_mesh_text
from .problems import get_problem, initial_mesh
from .verify import run_suite

RUN_DEFAULTS = dict(problem=1, r=1, refine=None, levels=5, max_ndof=2e5,
                    theta=0.3, seed=0, out=".", mesh=None, quad_degree=None,
                    initial_nt=86)
VERIFY_DEFAULTS = dict(samples=1000, aspect_max=20.0, seed=0)

# residual tolerances of the verify suite at aspect ratios up to 20; they are
# scaled by (aspect_max / 20)^2 beyond that, since the edge-weight
# conditioning grows with the aspect ratio
VERIFY_TOLERANCES = dict(
    max_edge_expansion=1e-9,
    max_curl_residual=1e-9,
    max_beta_spread=1e-10,
    max_hierarchy=1e-10,
    max_laplacian=1e-10,
    max_div_residual=1e-10,
    max_fit_mismatch=1e-9,
)


@dataclass(frozen=True)
class RunConfig:
    """Settings of one convergence experiment."""

    problem: int = 1
    r: int = 1
    refine: str | None = None
    levels: int = 5
    max_ndof: float = 2e5
    theta: float = 0.3
    seed: int = 0
    out: str = "."
    mesh: str | None = None
    quad_degree: int | None = None
    initial_nt: int = 86

    def resolved_refine(self) -> str:
        if self.refine is not None:
            return self.refine
        return "adaptive" if self.problem == 3 else "regular"

    def validate(self) -> None:
        if self.problem not in (1, 2, 3):
            raise ValueError(f"problem must be 1, 2 or 3, got {self.problem}")
        if not 0 <= self.r <= 3:
            raise ValueError(f"element order must be in 0..3, got {self.r}")
        if self.resolved_refine() not in ("regular", "bisection", "adaptive"):
            raise ValueError(f"unknown refinement mode {self.refine!r}")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if self.levels < 1:
            raise ValueError("level count must be positive")


def _read_config_file(path: str) -> dict:
    """Flat key=value pairs; keys use the flag spelling with - or _."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


_INT_KEYS = {"problem", "r", "levels", "seed", "quad_degree", "initial_nt", "samples"}
_FLOAT_KEYS = {"max_ndof", "theta", "aspect_max"}


def _coerce(key: str, value: str):
    if value == "":
        return None
    if key in _INT_KEYS:
        return int(float(value))
    if key in _FLOAT_KEYS:
        return float(value)
    return value


def _merge_options(args: argparse.Namespace, defaults: dict) -> dict:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        for key, value in _read_config_file(args.config).items():
            if key not in defaults:
                raise ValueError(f"unknown config key {key!r}")
            merged[key] = _coerce(key, value)
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtrecovery",
        description="Mixed finite element convergence experiments with "
                    "patch-recovery postprocessing.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="convergence experiment")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--problem", type=int, choices=(1, 2, 3))
    run.add_argument("--r", type=int, choices=(0, 1, 2, 3),
                     help="element order")
    run.add_argument("--refine", choices=("regular", "bisection", "adaptive"),
                     help="refinement mode (problem 3 defaults to adaptive)")
    run.add_argument("--levels", type=int, help="levels for uniform refinement")
    run.add_argument("--max-ndof", dest="max_ndof", type=float,
                     help="dof budget for the adaptive loop")
    run.add_argument("--theta", type=float, help="marking fraction")
    run.add_argument("--seed", type=int, help="initial mesh seed")
    run.add_argument("--out", help="output directory")
    run.add_argument("--mesh", help="initial mesh file overriding the generator")
    run.add_argument("--quad-degree", dest="quad_degree", type=int,
                     help="assembly quadrature degree override")
    run.add_argument("--initial-nt", dest="initial_nt", type=int,
                     help="target triangle count of the generated initial mesh")

    ver = sub.add_parser("verify", help="randomised identity suite")
    ver.add_argument("--config", help="flat key=value config file")
    ver.add_argument("--samples", type=int)
    ver.add_argument("--aspect-max", dest="aspect_max", type=float)
    ver.add_argument("--seed", type=int)
    return parser


def command_run(args: argparse.Namespace) -> int:
    cfg = RunConfig(**_merge_options(args, RUN_DEFAULTS))
    cfg.validate()
    problem = get_problem(cfg.problem)
    if cfg.mesh is not None:
        mesh = read_mesh_text(cfg.mesh)
    else:
        mesh = initial_mesh(cfg.problem, cfg.initial_nt, cfg.seed)

    mode = cfg.resolved_refine()
    if mode == "adaptive":
        reports = adaptive_study(problem, mesh, cfg.r, cfg.theta,
                                 int(cfg.max_ndof),
                                 solver_quad_degree=cfg.quad_degree)
    else:
        reports = uniform_study(problem, mesh, cfg.r, mode, cfg.levels,
                                solver_quad_degree=cfg.quad_degree)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table_csv(out / "table.csv", reports)
    write_orders(out / "orders.txt", reports)
    title = (f"problem {cfg.problem}, order {cfg.r}, {mode} refinement")
    plot_convergence(out / "convergence.svg", reports, title)

    orders = fitted_orders(reports)
    print(f"{len(reports)} levels, final ndof {reports[-1].ndof}")
    print("fitted orders: "
          + "  ".join(f"{k}={v:.3f}" for k, v in orders.items()))
    print(f"wrote {out / 'table.csv'}, {out / 'orders.txt'}, "
          f"{out / 'convergence.svg'}")
    return 0


def command_verify(args: argparse.Namespace) -> int:
    opts = _merge_options(args, VERIFY_DEFAULTS)
    report = run_suite(samples=opts["samples"], aspect_max=opts["aspect_max"],
                       seed=opts["seed"])
    relax = max(1.0, (opts["aspect_max"] / 20.0) ** 2)
    ok = True
    print(f"{'check':24s} {'max residual':>14s} {'tolerance':>12s}  status")
    for key, tol in VERIFY_TOLERANCES.items():
        value = getattr(report, key)
        bound = tol * relax
        status = "pass" if value <= bound else "FAIL"
        ok = ok and value <= bound
        print(f"{key[4:]:24s} {value:14.3e} {bound:12.1e}  {status}")
    if not ok and report.worst_triangle is not None:
        print("worst triangle vertices:")
        for xy in report.worst_triangle:
            print(f"  {xy[0]!r} {xy[1]!r}")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return command_run(args)
        return command_verify(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
