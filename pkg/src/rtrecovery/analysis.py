"""Error norms, the recovery-based estimator, marking, the adaptive loop,
and convergence-order fitting.

All norms are L2 over the mesh, computed with quadrature of degree
2(r+2)+6 by default; per-triangle contributions are reduced in index order
so repeated runs are bitwise reproducible.  Convergence orders p come from a
least-squares fit of log(error) against log(ndof) under the model
error ~ ndof^(-p/2); reported orders drop the coarsest level, which is
visibly pre-asymptotic at the 86-triangle scale.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np

from .mesh import Mesh, refine_adaptive, refine_regular, uniform_bisect
from .quadrature import triangle_rule
from .recovery import recover
from .solver import MixedSolution, ProblemSpec, solve_mixed
from .spaces import FluxField, FluxSpace, LagrangeVecField, flux_divergence

CSV_COLUMNS = ("level", "nt", "ndof", "e_p", "e_div", "e_close", "e_rec",
               "e_u", "eta", "efficiency")


@dataclass
class ErrorReport:
    """Error and estimator observables on one refinement level.

    e_p, e_div, e_u: errors of the flux, its divergence and the scalar.
    e_close: distance of the flux solution to the interpolant of the exact
    flux; e_div_close is the same distance measured in the divergence (kept
    outside the CSV).  e_rec: error of the recovered flux.  eta: global
    estimator; efficiency = eta / e_p.
    """

    level: int
    nt: int
    ndof: int
    e_p: float
    e_div: float
    e_close: float
    e_rec: float
    e_u: float
    eta: float
    efficiency: float
    e_div_close: float = float("nan")


def _default_degree(r: int) -> int:
    return 2 * (r + 2) + 6


def _cell_l2(mesh: Mesh, values_sq: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-triangle integrals of a squared integrand sampled at rule points."""
    area = mesh.geometry_tables()["area"]
    return area * (values_sq @ weights)


def flux_error(field: FluxField, exact: Callable, quad_degree: int | None = None) -> float:
    """L2 distance between a flux field and an exact vector field."""
    mesh = field.space.mesh
    rule = triangle_rule(quad_degree or _default_degree(field.space.r))
    phys = np.einsum("qk,mkd->mqd", rule.points, mesh.geometry_tables()["points"])
    d = exact(phys) - field.eval_cells(rule.points)
    return float(np.sqrt(_cell_l2(mesh, np.einsum("mqc,mqc->mq", d, d), rule.weights).sum()))


def flux_norm(field: FluxField, quad_degree: int | None = None) -> float:
    mesh = field.space.mesh
    rule = triangle_rule(quad_degree or _default_degree(field.space.r))
    v = field.eval_cells(rule.points)
    return float(np.sqrt(_cell_l2(mesh, np.einsum("mqc,mqc->mq", v, v), rule.weights).sum()))


def div_error(field: FluxField, exact_div: Callable, quad_degree: int | None = None) -> float:
    mesh = field.space.mesh
    rule = triangle_rule(quad_degree or _default_degree(field.space.r))
    phys = np.einsum("qk,mkd->mqd", rule.points, mesh.geometry_tables()["points"])
    d = exact_div(phys) - field.div_cells(rule.points)
    return float(np.sqrt(_cell_l2(mesh, d * d, rule.weights).sum()))


def scalar_error(scal, exact: Callable, quad_degree: int | None = None) -> float:
    mesh = scal.mesh
    rule = triangle_rule(quad_degree or _default_degree(scal.r))
    phys = np.einsum("qk,mkd->mqd", rule.points, mesh.geometry_tables()["points"])
    d = exact(phys) - scal.eval_cells(rule.points)
    return float(np.sqrt(_cell_l2(mesh, d * d, rule.weights).sum()))


def recovered_error(rec: LagrangeVecField, exact: Callable,
                    quad_degree: int | None = None) -> float:
    mesh = rec.space.mesh
    rule = triangle_rule(quad_degree or _default_degree(rec.space.s))
    phys = np.einsum("qk,mkd->mqd", rule.points, mesh.geometry_tables()["points"])
    d = exact(phys) - rec.eval_cells(rule.points)
    return float(np.sqrt(_cell_l2(mesh, np.einsum("mqc,mqc->mq", d, d), rule.weights).sum()))


def estimator(field: FluxField, rec: LagrangeVecField,
              quad_degree: int | None = None) -> np.ndarray:
    """Per-triangle L2 distance between the recovered and the raw flux."""
    mesh = field.space.mesh
    rule = triangle_rule(quad_degree or _default_degree(field.space.r))
    d = rec.eval_cells(rule.points) - field.eval_cells(rule.points)
    return np.sqrt(_cell_l2(mesh, np.einsum("mqc,mqc->mq", d, d), rule.weights))


def dorfler_mark(etas: np.ndarray, theta: float) -> np.ndarray:
    """Smallest prefix of triangles, by descending eta^2 with index ties,
    whose squared sum reaches theta times the total; empty when all zero."""
    if not 0 < theta < 1:
        raise ValueError("marking fraction must lie in (0, 1)")
    sq = np.asarray(etas, dtype=float) ** 2
    total = sq.sum()
    if total <= 0:
        return np.array([], dtype=np.int64)
    order = np.lexsort((np.arange(sq.size), -sq))
    csum = np.cumsum(sq[order])
    k = int(np.searchsorted(csum, theta * total - 1e-15 * total)) + 1
    return np.sort(order[:k])


def fit_order(errors: Sequence[float], ndofs: Sequence[int]) -> float:
    """p in the model error ~ ndof^(-p/2), by least squares on log-log data."""
    e = np.asarray(errors, dtype=float)
    n = np.asarray(ndofs, dtype=float)
    if e.size < 2 or np.any(e <= 0) or np.any(n <= 0):
        raise ValueError("order fit needs at least two positive samples")
    A = np.vstack([np.log(n), np.ones(n.size)]).T
    slope = np.linalg.lstsq(A, np.log(e), rcond=None)[0][0]
    return float(-2.0 * slope)


def error_report(level: int, sol: MixedSolution, problem: ProblemSpec,
                 rec: LagrangeVecField, etas: np.ndarray,
                 quad_degree: int | None = None) -> ErrorReport:
    field = sol.flux
    mesh = field.space.mesh
    eta = float(np.sqrt(np.sum(etas**2)))
    e_p = flux_error(field, problem.exact_p, quad_degree)
    interp = field.space.interpolate(problem.exact_p)
    close = FluxField(field.space, interp.coef - field.coef)
    e_close = flux_norm(close, quad_degree)
    e_div = div_error(field, problem.exact_div_p, quad_degree)
    e_div_close = flux_norm_div(close, quad_degree)
    e_u = scalar_error(sol.scalar, problem.exact_u, quad_degree)
    e_rec = recovered_error(rec, problem.exact_p, quad_degree)
    return ErrorReport(
        level=level, nt=mesh.num_triangles, ndof=sol.ndof,
        e_p=e_p, e_div=e_div, e_close=e_close, e_rec=e_rec, e_u=e_u,
        eta=eta, efficiency=eta / e_p if e_p > 0 else float("inf"),
        e_div_close=e_div_close,
    )


def flux_norm_div(field: FluxField, quad_degree: int | None = None) -> float:
    mesh = field.space.mesh
    rule = triangle_rule(quad_degree or _default_degree(field.space.r))
    v = field.div_cells(rule.points)
    return float(np.sqrt(_cell_l2(mesh, v * v, rule.weights).sum()))


REFINERS = {"regular": refine_regular, "bisection": uniform_bisect}


def uniform_study(problem: ProblemSpec, mesh: Mesh, r: int, refine: str,
                  levels: int, quad_degree: int | None = None,
                  solver_quad_degree: int | None = None) -> list[ErrorReport]:
    """Solve/recover/report on a uniformly refined mesh hierarchy."""
    step = REFINERS[refine]
    reports = []
    for level in range(levels):
        sol = solve_mixed(mesh, r, problem, solver_quad_degree)
        rec = recover(sol.flux)
        etas = estimator(sol.flux, rec, quad_degree)
        reports.append(error_report(level, sol, problem, rec, etas, quad_degree))
        if level + 1 < levels:
            mesh = step(mesh)
    return reports


def adaptive_study(problem: ProblemSpec, mesh: Mesh, r: int, theta: float,
                   max_ndof: int, quad_degree: int | None = None,
                   solver_quad_degree: int | None = None,
                   return_meshes: bool = False):
    """Adaptive loop: solve, estimate, mark, refine, until ndof exceeds the
    budget (the level crossing the budget is still reported)."""
    reports = []
    meshes = []
    level = 0
    while True:
        try:
            sol = solve_mixed(mesh, r, problem, solver_quad_degree)
            rec = recover(sol.flux)
        except Exception as exc:
            raise RuntimeError(f"adaptive level {level} failed: {exc}") from exc
        etas = estimator(sol.flux, rec, quad_degree)
        reports.append(error_report(level, sol, problem, rec, etas, quad_degree))
        meshes.append(mesh)
        if sol.ndof > max_ndof:
            break
        marked = dorfler_mark(etas, theta)
        if marked.size == 0:
            break
        mesh = refine_adaptive(mesh, marked)
        level += 1
    return (reports, meshes) if return_meshes else reports


# -- table and order output ---------------------------------------------------


def write_table_csv(path, reports: Sequence[ErrorReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rep in reports:
            row = []
            for col in CSV_COLUMNS:
                v = getattr(rep, col)
                row.append(str(v) if col in ("level", "nt", "ndof") else f"{v:.3e}")
            writer.writerow(row)


ORDER_COLUMNS = ("e_p", "e_div", "e_close", "e_rec", "e_u", "eta")


def fitted_orders(reports: Sequence[ErrorReport],
                  skip_coarsest: bool = True) -> dict[str, float]:
    sel = reports[1:] if skip_coarsest and len(reports) > 2 else reports
    ndofs = [rep.ndof for rep in sel]
    out = {}
    for col in ORDER_COLUMNS:
        vals = [getattr(rep, col) for rep in sel]
        try:
            out[col] = fit_order(vals, ndofs)
        except ValueError:
            out[col] = float("nan")
    return out


def write_orders(path, reports: Sequence[ErrorReport]) -> None:
    orders = fitted_orders(reports)
    with open(path, "w") as fh:
        fh.write("column p\n")
        for col, p in orders.items():
            fh.write(f"{col} {p:.3f}\n")


def plot_convergence(path, reports: Sequence[ErrorReport], title: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ndofs = [rep.ndof for rep in reports]
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    series = (("e_p", "o-"), ("e_close", "s-"), ("e_rec", "d-"), ("eta", "^--"))
    for col, style in series:
        vals = [getattr(rep, col) for rep in reports]
        if np.all(np.isfinite(vals)):
            ax.loglog(ndofs, vals, style, label=col)
    ax.set_xlabel("degrees of freedom")
    ax.set_ylabel("L2 error")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
