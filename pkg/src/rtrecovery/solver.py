"""Mixed finite element solver for second-order elliptic problems.

Continuous problem: find u with

    -div(a2 grad u + a1 u) + a0 u = f  in Omega,   u = g  on the boundary.

The mixed form works with the flux p = a2 grad u + a1 u and the coefficients
a = 1/a2, b = a1/a2, c = a0 (ProblemSpec stores a, b, c directly):

    (a p, q) - (q, b u) + (div q, u) = <q . n, g>    for all fluxes q,
    -(div p, v) + (c u, v) = (f, v)                  for all scalars v.

Flux trial/test space: order-r triangular flux elements (FluxSpace);
scalar space: discontinuous polynomials of the same order r.  The Dirichlet
data enters through the boundary term only.  Assembled block system:

    [ A   B - G ] [x_p]   [ rhs_g ]
    [ B'   -C   ] [x_u] = [ -rhs_f ]

with A the weighted flux mass matrix, B the divergence coupling, G the
convection coupling and C the reaction mass matrix.  Symmetric indefinite
when b = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .mesh import Mesh
from .quadrature import edge_gauss, triangle_rule
from .spaces import (FluxField, FluxSpace, PiecewiseScalar,
                     bary_monomial_values, scalar_dim)

_ASSEMBLY_CHUNK = 4096


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and data of the mixed problem, all vectorized over
    point arrays of shape (..., 2).

    a: inverse diffusion coefficient, must be positive.
    b: convection-type coupling (returns (..., 2)), None means zero.
    c: reaction coefficient, None means zero.
    f: source term.  g: boundary values of the scalar variable.
    Exact fields, when known, are carried for error reporting: exact_u,
    exact_p (returns (..., 2)) and exact_div_p.
    """

    name: str
    a: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    b: Callable[[np.ndarray], np.ndarray] | None = None
    c: Callable[[np.ndarray], np.ndarray] | None = None
    exact_u: Callable[[np.ndarray], np.ndarray] | None = None
    exact_p: Callable[[np.ndarray], np.ndarray] | None = None
    exact_div_p: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass
class MixedSystem:
    space: FluxSpace
    matrix: sparse.csc_matrix
    rhs: np.ndarray
    num_flux_dofs: int
    num_scalar_dofs: int

    @property
    def ndof(self) -> int:
        return self.num_flux_dofs + self.num_scalar_dofs


@dataclass
class MixedSolution:
    flux: FluxField
    scalar: PiecewiseScalar
    ndof: int
    residual: float


def _edge_lagrange_matrix(r: int, t_eval: np.ndarray) -> np.ndarray:
    """Values L[q, j] at t_eval of the Lagrange polynomials on the edge
    Gauss nodes; the normal trace of the edge-(e, j) basis function is L_j."""
    nodes, _ = edge_gauss(r + 1)
    L = np.ones((t_eval.size, r + 1))
    for j in range(r + 1):
        for i in range(r + 1):
            if i != j:
                L[:, j] *= (t_eval - nodes[i]) / (nodes[j] - nodes[i])
    return L


def assemble_mixed(space: FluxSpace, problem: ProblemSpec,
                   quad_degree: int | None = None) -> MixedSystem:
    mesh = space.mesh
    r = space.r
    if quad_degree is None:
        quad_degree = 2 * (r + 1) + 4
    rule = triangle_rule(quad_degree)
    nsc = scalar_dim(r)
    nfl = space.dofmap.num_flux_dofs
    nloc = space.N
    nt = mesh.num_triangles
    tables = mesh.geometry_tables()
    scal_vals = bary_monomial_values(r, rule.points)  # (q, nsc)

    rows, cols, vals = [], [], []
    rhs = np.zeros(nfl + nt * nsc)

    for start in range(0, nt, _ASSEMBLY_CHUNK):
        tsl = slice(start, min(start + _ASSEMBLY_CHUNK, nt))
        pts = tables["points"][tsl]
        area = tables["area"][tsl]
        phys = np.einsum("qk,mkd->mqd", rule.points, pts)
        basis, divs = space.basis_at(rule.points, tsl, with_div=True)

        a_vals = np.asarray(problem.a(phys), dtype=float)
        if np.any(a_vals <= 0):
            raise SolverError("inverse diffusion coefficient must be positive")
        wq = rule.weights

        A_loc = np.einsum("q,mq,mqnc,mqkc->mnk", wq, a_vals, basis, basis)
        A_loc *= area[:, None, None]
        B_loc = np.einsum("q,mqn,qj->mnj", wq, divs, scal_vals) * area[:, None, None]
        if problem.b is not None:
            b_vals = np.asarray(problem.b(phys), dtype=float)
            G_loc = np.einsum("q,mqnc,mqc,qj->mnj", wq, basis, b_vals, scal_vals)
            G_loc *= area[:, None, None]
            B_loc = B_loc - G_loc
        f_vals = np.asarray(problem.f(phys), dtype=float)
        F_loc = np.einsum("q,mq,qj->mj", wq, f_vals, scal_vals) * area[:, None]
        if problem.c is not None:
            c_vals = np.asarray(problem.c(phys), dtype=float)
            C_loc = np.einsum("q,mq,qi,qj->mij", wq, c_vals, scal_vals, scal_vals)
            C_loc *= area[:, None, None]
        else:
            C_loc = None

        gdofs = space.dofmap.cell_dofs[tsl]
        signs = space.dofmap.cell_signs[tsl]
        m = gdofs.shape[0]
        sdofs = nfl + nsc * np.arange(start, start + m)[:, None] + np.arange(nsc)

        A_glob = A_loc * signs[:, :, None] * signs[:, None, :]
        rows.append(np.repeat(gdofs, nloc, axis=1).ravel())
        cols.append(np.tile(gdofs, (1, nloc)).ravel())
        vals.append(A_glob.ravel())

        BmG = B_loc * signs[:, :, None]
        ri = np.repeat(gdofs, nsc, axis=1).ravel()
        ci = np.tile(sdofs, (1, nloc)).ravel()
        rows.append(ri)
        cols.append(ci)
        vals.append(BmG.ravel())
        # transpose block carries B only, never the convection part
        if problem.b is not None:
            Bt = (B_loc + G_loc) * signs[:, :, None]
        else:
            Bt = BmG
        rows.append(ci)
        cols.append(ri)
        vals.append(Bt.ravel())
        if C_loc is not None:
            rows.append(np.repeat(sdofs, nsc, axis=1).ravel())
            cols.append(np.tile(sdofs, (1, nsc)).ravel())
            vals.append(-C_loc.ravel())

        np.subtract.at(rhs, sdofs.ravel(), F_loc.ravel())

    # boundary term <q . n, g> on the flux test functions
    bdry = np.nonzero(mesh.edge_is_boundary)[0]
    if bdry.size:
        gnodes, gweights = edge_gauss(6)
        L = _edge_lagrange_matrix(r, gnodes)  # (q, r+1)
        a_pts = mesh.vertices[mesh.edges[bdry, 0]]
        b_pts = mesh.vertices[mesh.edges[bdry, 1]]
        elen = np.linalg.norm(b_pts - a_pts, axis=1)
        epts = a_pts[:, None, :] + gnodes[None, :, None] * (b_pts - a_pts)[:, None, :]
        g_vals = np.asarray(problem.g(epts), dtype=float)
        owner = mesh.edge_tris[bdry, 0]
        loc = np.argmax(mesh.tri_edges[owner] == bdry[:, None], axis=1)
        sgn = mesh.tri_edge_sign[owner, loc]  # +1 iff stored normal points outward
        contrib = np.einsum("q,eq,qj->ej", gweights, g_vals, L)
        contrib *= (sgn * elen)[:, None]
        edofs = bdry[:, None] * (r + 1) + np.arange(r + 1)
        np.add.at(rhs, edofs.ravel(), contrib.ravel())

    K = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(rhs.size, rhs.size),
    ).tocsc()
    return MixedSystem(space=space, matrix=K, rhs=rhs,
                       num_flux_dofs=nfl, num_scalar_dofs=nt * nsc)


def solve_system(system: MixedSystem, residual_tol: float = 1e-9) -> MixedSolution:
    x = spsolve(system.matrix, system.rhs)
    rhs_norm = np.linalg.norm(system.rhs)
    res = np.linalg.norm(system.matrix @ x - system.rhs)
    rel = res / rhs_norm if rhs_norm > 0 else res
    if not np.isfinite(rel) or rel > residual_tol:
        raise SolverError(f"linear solve residual {rel:.3e} exceeds {residual_tol:.1e}")
    space = system.space
    r = space.r
    nsc = scalar_dim(r)
    flux = FluxField(space, x[: system.num_flux_dofs].copy())
    scal = PiecewiseScalar(space.mesh, r,
                           x[system.num_flux_dofs:].reshape(-1, nsc).copy())
    return MixedSolution(flux=flux, scalar=scal, ndof=system.ndof, residual=float(rel))


def solve_mixed(mesh: Mesh, r: int, problem: ProblemSpec,
                quad_degree: int | None = None,
                residual_tol: float = 1e-9) -> MixedSolution:
    space = FluxSpace(mesh, r)
    system = assemble_mixed(space, problem, quad_degree)
    return solve_system(system, residual_tol)
