"""Patch-based least-squares recovery of the mixed flux.

The recovered field lives in the continuous vector Lagrange space of degree
r + 1.  Around every mesh vertex z a vector polynomial of degree r + 1 is
fitted, in the least-squares sense, to all flux degrees of freedom carried by
the triangles of a patch omega_z (the vertex star, grown by whole layers when
needed).  Nodal values of the output are blended from the vertex fits with
piecewise-linear hat weights, which makes the operator reproduce vector
polynomials of degree r + 1 exactly and act on flux coefficient vectors only.

The fit is posed in monomials of (x - z) / h_z with h_z = |omega_z|^(1/2), so
column scaling is mesh-size independent.  A patch is enlarged while the
singular value ratio of the design matrix is below RANK_RATIO_MIN, and
boundary patches are additionally grown to at least MIN_BOUNDARY_TRIS
triangles before they are trusted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lstsq

from .mesh import Mesh, MeshError, Patch, patch_corner_angles, vertex_patch
from .quadrature import edge_gauss, triangle_rule
from .spaces import (FluxField, FluxSpace, LagrangeVecField, LagrangeVecSpace,
                     bary_lagrange_values, bary_lattice, monomial_exponents)

RANK_RATIO_MIN = 1e-8
MIN_BOUNDARY_TRIS = 8
MAX_EXTRA_LAYERS = 8


class RecoveryError(RuntimeError):
    pass


@dataclass
class PatchFit:
    """Least-squares vertex fit: q(x) = coef @ monomials((x - center) / h)."""

    vertex: int
    coef: np.ndarray        # (2, M)
    center: np.ndarray
    h: float
    layers: int
    rank_ratio: float


def fit_dimension(r: int) -> int:
    """Columns of the patch fit: two components of a degree r+1 polynomial."""
    return (r + 2) * (r + 3)


def _monomial_values(exps, X: np.ndarray) -> np.ndarray:
    """Values of the monomial basis at scaled points X, shape (..., M)."""
    out = np.empty(X.shape[:-1] + (len(exps),))
    for d, (i, j) in enumerate(exps):
        out[..., d] = X[..., 0] ** i * X[..., 1] ** j
    return out


def patch_ls_rows(space: FluxSpace, patch: Patch) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix of the patch fit and the matching flux dof indices.

    One row per flux degree of freedom of the patch; columns are the first
    component's monomials followed by the second's.  The dof index array maps
    each row to the entry of the global flux coefficient vector that serves
    as its data value.
    """
    mesh = space.mesh
    r = space.r
    exps = monomial_exponents(r + 1)
    M = len(exps)
    center = patch.center_xy
    h = patch.h

    nodes, _ = edge_gauss(r + 1)
    e = patch.edges
    a = mesh.vertices[mesh.edges[e, 0]]
    b = mesh.vertices[mesh.edges[e, 1]]
    epts = a[:, None, :] + nodes[None, :, None] * (b - a)[:, None, :]
    d = b - a
    normals = np.stack([d[:, 1], -d[:, 0]], axis=-1)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    mono = _monomial_values(exps, (epts - center) / h)   # (ne, r+1, M)
    edge_rows = np.concatenate(
        [normals[:, None, None, 0] * mono, normals[:, None, None, 1] * mono], axis=-1
    ).reshape(-1, 2 * M)
    edge_dofs = (e[:, None] * (r + 1) + np.arange(r + 1)).ravel()

    if r >= 1:
        rule = triangle_rule(2 * r + 2)
        tpts = mesh.vertices[mesh.triangles[patch.triangles]]
        phys = np.einsum("qk,mkd->mqd", rule.points, tpts)
        monot = _monomial_values(exps, (phys - center) / h)          # (m, q, M)
        lag = bary_lagrange_values(r - 1, rule.points)               # (q, nl)
        # row for interior dof (l, comp): mean of q_comp * lambda_l over T
        base = np.einsum("q,ql,mqd->mld", rule.weights, lag, monot)  # (m, nl, M)
        m = len(patch.triangles)
        nl = lag.shape[1]
        int_rows = np.zeros((m, nl, 2, 2 * M))
        int_rows[:, :, 0, :M] = base
        int_rows[:, :, 1, M:] = base
        int_rows = int_rows.reshape(-1, 2 * M)
        int_dofs = np.stack(
            [space.dofmap.interior_dofs(t) for t in patch.triangles]
        ).ravel()
        return (np.vstack([edge_rows, int_rows]),
                np.concatenate([edge_dofs, int_dofs]))
    return edge_rows, edge_dofs


def _rank_ratio(A: np.ndarray) -> float:
    s = np.linalg.svd(A, compute_uv=False)
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0


def check_uniqueness(mesh: Mesh, v: int, r: int) -> bool:
    """Whether the star of v alone determines the vertex fit uniquely.

    Order 0: at least 5 star triangles and no pair of triangles sharing an
    interior edge at v whose two angles at v exceed pi in sum.  Order 1: at
    least 4 star triangles.  Higher orders: numerical full column rank of the
    star design matrix.
    """
    star = vertex_patch(mesh, v, 0)
    nt = len(star.triangles)
    if r == 0:
        if nt < 5:
            return False
        for _, a1, a2 in patch_corner_angles(mesh, v):
            if a1 + a2 > np.pi + 1e-12:
                return False
        return True
    if r == 1:
        return nt >= 4
    A, _ = patch_ls_rows(FluxSpace(mesh, r), star)
    return A.shape[0] >= A.shape[1] and _rank_ratio(A) > RANK_RATIO_MIN


def fit_vertex(space: FluxSpace, coef: np.ndarray, v: int,
               method: str = "lstsq") -> PatchFit:
    """Fit the recovery polynomial at vertex v, enlarging the patch until the
    design matrix is numerically full rank (and boundary patches carry at
    least MIN_BOUNDARY_TRIS triangles)."""
    mesh = space.mesh
    boundary = bool(mesh.vertex_is_boundary[v])
    for layers in range(MAX_EXTRA_LAYERS + 1):
        patch = vertex_patch(mesh, v, layers)
        A, dofs = patch_ls_rows(space, patch)
        if A.shape[0] < A.shape[1]:
            continue
        ratio = _rank_ratio(A)
        if ratio < RANK_RATIO_MIN:
            continue
        if boundary and len(patch.triangles) < MIN_BOUNDARY_TRIS:
            continue
        data = coef[dofs]
        if method == "lstsq":
            sol = lstsq(A, data, lapack_driver="gelsy")[0]
        elif method == "pinv":
            sol = np.linalg.pinv(A) @ data
        else:
            raise ValueError(f"unknown fit method {method!r}")
        M = A.shape[1] // 2
        return PatchFit(vertex=v, coef=sol.reshape(2, M), center=patch.center_xy,
                        h=patch.h, layers=layers, rank_ratio=ratio)
    raise RecoveryError(
        f"patch at vertex {v} still rank deficient after {MAX_EXTRA_LAYERS} layers")


def recover(field: FluxField, method: str = "lstsq") -> LagrangeVecField:
    """Recover a continuous degree r+1 vector field from a flux field."""
    space = field.space
    mesh = space.mesh
    r = space.r
    s = r + 1
    exps = monomial_exponents(s)
    fits = [fit_vertex(space, field.coef, v, method) for v in range(mesh.num_vertices)]
    centers = np.array([f.center for f in fits])
    hs = np.array([f.h for f in fits])
    coefs = np.array([f.coef for f in fits])       # (nv, 2, M)

    out_space = LagrangeVecSpace(mesh, s)
    lattice = np.array(bary_lattice(s), dtype=float) / s   # (ncell, 3)
    values = np.zeros((out_space.num_nodes, 2))
    cell_nodes = out_space.cell_nodes                       # (nt, ncell)
    tpts = mesh.vertices[mesh.triangles]                    # (nt, 3, 2)
    node_xy = np.einsum("nk,mkd->mnd", lattice, tpts)       # (nt, ncell, 2)
    blend = np.zeros((mesh.num_triangles, lattice.shape[0], 2))
    for i in range(3):
        vz = mesh.triangles[:, i]
        X = (node_xy - centers[vz][:, None, :]) / hs[vz][:, None, None]
        mono = _monomial_values(exps, X)                    # (nt, ncell, M)
        qz = np.einsum("mcd,mnd->mnc", coefs[vz], mono)
        blend += lattice[None, :, i, None] * qz
    values[cell_nodes.ravel()] = blend.reshape(-1, 2)
    return LagrangeVecField(out_space, values)
