"""Discrete spaces on a triangular mesh.

Three families appear:

* the flux space of order r: vector fields that restrict on each triangle to
  (P_r)^2 + x P_r, with continuous normal components across edges;
* the scalar space of order r: discontinuous piecewise P_r;
* continuous vector Lagrange fields of degree r+1 (output of the recovery
  operator).

Flux degrees of freedom.  Each edge e carries r+1 functionals
    N_e^j(q) = (1/|e|) int_e (q . n_e) v_j ds,
where v_j is the polynomial of degree r equal to 1/w_j at the j-th node of
the (r+1)-point Gauss rule on e and 0 at the others.  For fields whose normal
trace has degree <= r+1 this collapses to the point value q(g_j) . n_e.  Each
triangle carries r(r+1) interior functionals
    N_T^{lm}(q) = (1/|T|) int_T q_m lam_l,   m = 1, 2,
with lam_l the degree-(r-1) Lagrange nodal basis on T.  Edge functionals are
defined with the *global* edge normal and the *global* ordering of the Gauss
nodes (from the lower-indexed endpoint); the per-triangle sign of the normal
lives in mesh.tri_edge_sign.

The local basis dual to these functionals is constructed numerically, per
triangle, in centered coordinates X = (x - centroid)/|T|^(1/2); the resulting
dual matrices are cached on the space object.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .mesh import Mesh, MeshError
from .quadrature import edge_gauss, triangle_rule

DEGENERATE_CONDITION = 1e12


# -- polynomial bookkeeping ---------------------------------------------------


@lru_cache(maxsize=None)
def monomial_exponents(r: int) -> tuple[tuple[int, int], ...]:
    """Graded exponents (a, b) of the 2-variable monomials of degree <= r."""
    out = []
    for total in range(r + 1):
        for a in range(total, -1, -1):
            out.append((a, total - a))
    return tuple(out)


@lru_cache(maxsize=None)
def bary_lattice(s: int) -> tuple[tuple[int, int, int], ...]:
    """Multi-indices (i, j, k), i+j+k = s, of the principal lattice of degree s."""
    if s == 0:
        return ((0, 0, 0),)
    out = []
    for i in range(s, -1, -1):
        for j in range(s - i, -1, -1):
            out.append((i, j, s - i - j))
    return tuple(out)


def lattice_points(s: int) -> np.ndarray:
    """Barycentric coordinates of the principal lattice nodes, shape (n, 3)."""
    idx = np.array(bary_lattice(s), dtype=float)
    if s == 0:
        return np.full((1, 3), 1.0 / 3.0)
    return idx / s


def bary_monomial_values(s: int, lams: np.ndarray) -> np.ndarray:
    """Values of the homogeneous barycentric monomials of degree s.

    lams: (..., 3) barycentric coordinates; result (..., n_s).
    """
    idx = bary_lattice(s)
    lams = np.asarray(lams, dtype=float)
    cols = [lams[..., 0] ** i * lams[..., 1] ** j * lams[..., 2] ** k for (i, j, k) in idx]
    return np.stack(cols, axis=-1)


@lru_cache(maxsize=None)
def _lagrange_coeffs(s: int) -> np.ndarray:
    """Coefficients C with nodal_basis = monomials @ C for degree s."""
    V = bary_monomial_values(s, lattice_points(s))
    return np.linalg.inv(V)


def bary_lagrange_values(s: int, lams: np.ndarray) -> np.ndarray:
    """Values of the degree-s Lagrange nodal basis at barycentric points."""
    return bary_monomial_values(s, lams) @ _lagrange_coeffs(s)


def scalar_dim(r: int) -> int:
    return (r + 1) * (r + 2) // 2


def flux_local_dim(r: int) -> int:
    return (r + 1) * (r + 3)


# -- generator fields ---------------------------------------------------------


def _power_table(x: np.ndarray, pmax: int) -> np.ndarray:
    """x ** p for p = 0..pmax along a trailing axis."""
    out = np.empty(x.shape + (pmax + 1,))
    out[..., 0] = 1.0
    for p in range(1, pmax + 1):
        out[..., p] = out[..., p - 1] * x
    return out


def _generators(r: int, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spanning fields of the order-r flux shape space at scaled points X.

    X: (..., 2).  Returns (values, scaled_divergences) with shapes
    (..., N, 2) and (..., N); divergences are with respect to X, so a field
    on a triangle of scale h has physical divergence scaled_div / h.
    """
    exps = monomial_exponents(r)
    nm = len(exps)
    A = np.array([e[0] for e in exps])
    B = np.array([e[1] for e in exps])
    N = 2 * nm + (r + 1)
    p1 = _power_table(X[..., 0], r)
    p2 = _power_table(X[..., 1], r)
    mono = p1[..., A] * p2[..., B]
    dm1 = A * p1[..., np.maximum(A - 1, 0)] * p2[..., B]
    dm2 = B * p1[..., A] * p2[..., np.maximum(B - 1, 0)]

    vals = np.zeros(X.shape[:-1] + (N, 2))
    divs = np.zeros(X.shape[:-1] + (N,))
    vals[..., :nm, 0] = mono
    vals[..., nm:2 * nm, 1] = mono
    divs[..., :nm] = dm1
    divs[..., nm:2 * nm] = dm2
    top = [i for i, (a, b) in enumerate(exps) if a + b == r]
    for j, i in enumerate(top):
        vals[..., 2 * nm + j, 0] = X[..., 0] * mono[..., i]
        vals[..., 2 * nm + j, 1] = X[..., 1] * mono[..., i]
        divs[..., 2 * nm + j] = (2 + r) * mono[..., i]
    return vals, divs


# -- degree-of-freedom map ----------------------------------------------------


@dataclass(frozen=True)
class DofMap:
    """Global numbering of the flux degrees of freedom.

    Edge dof (e, j) -> e (r+1) + j for j = 0..r along the global edge
    direction; interior dof (t, l, m) -> ne (r+1) + t r(r+1) + 2 l + m.
    cell_dofs/cell_signs give the per-triangle gather in local order: edge
    dofs of local edges 0, 1, 2 then the interior block.
    """

    r: int
    num_edges: int
    num_triangles: int
    cell_dofs: np.ndarray   # (nt, N) int
    cell_signs: np.ndarray  # (nt, N) float

    @property
    def num_flux_dofs(self) -> int:
        return self.num_edges * (self.r + 1) + self.num_triangles * self.r * (self.r + 1)

    def edge_dof(self, e: int, j: int) -> int:
        return e * (self.r + 1) + j

    def interior_dofs(self, t: int) -> np.ndarray:
        r = self.r
        base = self.num_edges * (r + 1) + t * r * (r + 1)
        return np.arange(base, base + r * (r + 1))


def _build_dofmap(mesh: Mesh, r: int) -> DofMap:
    nt, ne = mesh.num_triangles, mesh.num_edges
    n_edge = 3 * (r + 1)
    n_int = r * (r + 1)
    cell = np.empty((nt, n_edge + n_int), dtype=np.int64)
    for k in range(3):
        for j in range(r + 1):
            cell[:, k * (r + 1) + j] = mesh.tri_edges[:, k] * (r + 1) + j
    base = ne * (r + 1)
    for i in range(n_int):
        cell[:, n_edge + i] = base + np.arange(nt) * n_int + i
    signs = np.ones((nt, n_edge + n_int))
    for k in range(3):
        signs[:, k * (r + 1): (k + 1) * (r + 1)] = mesh.tri_edge_sign[:, [k]]
    return DofMap(r=r, num_edges=ne, num_triangles=nt, cell_dofs=cell, cell_signs=signs)


# -- the flux space -----------------------------------------------------------


class FluxSpace:
    """Order-r flux space on a mesh: local bases, interpolation, evaluation."""

    def __init__(self, mesh: Mesh, r: int):
        if not 0 <= r <= 3:
            raise ValueError("flux space implemented for orders 0..3")
        self.mesh = mesh
        self.r = r
        self.N = flux_local_dim(r)
        self.dofmap = _build_dofmap(mesh, r)
        g = mesh.geometry_tables()
        self.centroid = g["centroid"]
        self.area = g["area"]
        self.hscale = np.sqrt(g["area"])
        self.out_normals = g["normals"]

        tg, _ = edge_gauss(r + 1)
        self.edge_nodes = tg
        a = mesh.vertices[mesh.edges[:, 0]]
        b = mesh.vertices[mesh.edges[:, 1]]
        self.edge_vec = b - a
        self.edge_len = np.linalg.norm(self.edge_vec, axis=1)
        d = self.edge_vec / self.edge_len[:, None]
        self.edge_normal = np.column_stack([d[:, 1], -d[:, 0]])
        # (ne, r+1, 2): Gauss nodes of each edge in global order
        self.edge_points = a[:, None, :] + tg[None, :, None] * self.edge_vec[:, None, :]
        self._dual = None
        self._cond = None

    # local dual bases ........................................................

    def _dof_matrix(self, tsl: slice) -> np.ndarray:
        """Rows: local functionals applied to the generator fields."""
        mesh, r = self.mesh, self.r
        c = self.centroid[tsl][:, None, None, :]
        h = self.hscale[tsl][:, None, None, None]
        ep = self.edge_points[mesh.tri_edges[tsl]]          # (m, 3, r+1, 2)
        gv, _ = _generators(r, (ep - c) / h)                # (m, 3, r+1, N, 2)
        nrm = self.out_normals[tsl]                         # (m, 3, 2)
        edge_rows = np.einsum("mkpnc,mkc->mkpn", gv, nrm)
        m = edge_rows.shape[0]
        rows = [edge_rows.reshape(m, 3 * (r + 1), self.N)]
        if r >= 1:
            rule = triangle_rule(max(2 * r, 1))
            pts = np.einsum("qk,mkd->mqd", rule.points, self.mesh.vertices[mesh.triangles[tsl]])
            X = (pts - self.centroid[tsl][:, None, :]) / self.hscale[tsl][:, None, None]
            gq, _ = _generators(r, X)                       # (m, Q, N, 2)
            lag = bary_lagrange_values(r - 1, rule.points)  # (Q, nlag)
            inter = np.einsum("q,mqnc,ql->mlcn", rule.weights, gq, lag)
            rows.append(inter.reshape(m, r * (r + 1), self.N))
        return np.concatenate(rows, axis=1)

    def dual_matrices(self) -> np.ndarray:
        """(nt, N, N): column d holds the generator coefficients of basis d."""
        if self._dual is None:
            nt = self.mesh.num_triangles
            dual = np.empty((nt, self.N, self.N))
            conds = np.empty(nt)
            step = 4096
            for lo in range(0, nt, step):
                sl = slice(lo, min(lo + step, nt))
                V = self._dof_matrix(sl)
                conds[sl] = np.linalg.cond(V)
                dual[sl] = np.linalg.inv(V)
            if (conds > DEGENERATE_CONDITION).any():
                t = int(np.argmax(conds))
                raise MeshError(
                    f"degenerate element {t}: local dof matrix condition {conds[t]:.2e}"
                )
            self._dual = dual
            self._cond = conds
        return self._dual

    # evaluation ..............................................................

    def basis_at(self, lams: np.ndarray, tsl: Optional[slice] = None,
                 with_div: bool = False):
        """Local basis values at shared barycentric points.

        Returns (m, Q, N, 2) values (and (m, Q, N) physical divergences when
        requested) for the triangles selected by tsl.
        """
        tsl = tsl if tsl is not None else slice(None)
        dual = self.dual_matrices()[tsl]
        pts = np.einsum("qk,mkd->mqd", np.asarray(lams),
                        self.mesh.vertices[self.mesh.triangles[tsl]])
        h = self.hscale[tsl]
        X = (pts - self.centroid[tsl][:, None, :]) / h[:, None, None]
        gv, gd = _generators(self.r, X)
        vals = np.einsum("mqnc,mnd->mqdc", gv, dual)
        if not with_div:
            return vals
        divs = np.einsum("mqn,mnd->mqd", gd, dual) / h[:, None, None]
        return vals, divs

    def local_coefficients(self, coef: np.ndarray, tsl: Optional[slice] = None) -> np.ndarray:
        tsl = tsl if tsl is not None else slice(None)
        return coef[self.dofmap.cell_dofs[tsl]] * self.dofmap.cell_signs[tsl]

    # interpolation ...........................................................

    def interpolate(self, q: Callable[[np.ndarray], np.ndarray]) -> "FluxField":
        """Degrees of freedom of a smooth field q((n,2) pts) -> (n,2) values."""
        r = self.r
        K = 6  # >= r+3 for all supported orders; exact on in-space normal traces
        tq, wq = edge_gauss(K)
        gauss, gw = edge_gauss(r + 1)
        # v_j(t): degree-r polynomial, 1/w_j at Gauss node j, 0 at the others
        V = np.empty((K, r + 1))
        for j in range(r + 1):
            num = np.ones(K)
            for i in range(r + 1):
                if i != j:
                    num *= (tq - gauss[i]) / (gauss[j] - gauss[i])
            V[:, j] = num / gw[j]
        pts = (self.mesh.vertices[self.mesh.edges[:, 0]][:, None, :]
               + tq[None, :, None] * self.edge_vec[:, None, :])   # (ne, K, 2)
        qv = np.asarray(q(pts.reshape(-1, 2))).reshape(self.mesh.num_edges, K, 2)
        qn = np.einsum("eqc,ec->eq", qv, self.edge_normal)
        edge_dofs = np.einsum("q,eq,qj->ej", wq, qn, V)

        coef = np.empty(self.dofmap.num_flux_dofs)
        coef[: self.mesh.num_edges * (r + 1)] = edge_dofs.reshape(-1)
        if r >= 1:
            rule = triangle_rule(max(2 * r + 8, 12))
            pts = np.einsum("qk,mkd->mqd", rule.points, self.mesh.vertices[self.mesh.triangles])
            qv = np.asarray(q(pts.reshape(-1, 2))).reshape(self.mesh.num_triangles, -1, 2)
            lag = bary_lagrange_values(r - 1, rule.points)
            inter = np.einsum("q,mqc,ql->mlc", rule.weights, qv, lag)  # (nt, nlag, 2)
            coef[self.mesh.num_edges * (r + 1):] = inter.reshape(-1)
        return FluxField(self, coef)


@dataclass
class FluxField:
    """A member of the flux space: global coefficient vector over the dof map."""

    space: FluxSpace
    coef: np.ndarray

    def eval_cells(self, lams: np.ndarray, tsl: Optional[slice] = None) -> np.ndarray:
        """(m, Q, 2) values at shared barycentric points."""
        vals = self.space.basis_at(lams, tsl)
        lc = self.space.local_coefficients(self.coef, tsl)
        return np.einsum("mqdc,md->mqc", vals, lc)

    def div_cells(self, lams: np.ndarray, tsl: Optional[slice] = None) -> np.ndarray:
        _, divs = self.space.basis_at(lams, tsl, with_div=True)
        lc = self.space.local_coefficients(self.coef, tsl)
        return np.einsum("mqd,md->mq", divs, lc)

    def eval_at(self, t: int, pts: np.ndarray) -> np.ndarray:
        """Values at physical points lying in triangle t; pts (n, 2)."""
        sp = self.space
        X = (np.atleast_2d(pts) - sp.centroid[t]) / sp.hscale[t]
        gv, _ = _generators(sp.r, X)
        dual = sp.dual_matrices()[t]
        lc = sp.local_coefficients(self.coef, slice(t, t + 1))[0]
        return np.einsum("qnc,nd,d->qc", gv, dual, lc)

    def div_at(self, t: int, pts: np.ndarray) -> np.ndarray:
        sp = self.space
        X = (np.atleast_2d(pts) - sp.centroid[t]) / sp.hscale[t]
        _, gd = _generators(sp.r, X)
        dual = sp.dual_matrices()[t]
        lc = sp.local_coefficients(self.coef, slice(t, t + 1))[0]
        return np.einsum("qn,nd,d->q", gd, dual, lc) / sp.hscale[t]


# -- piecewise scalar fields --------------------------------------------------


@lru_cache(maxsize=None)
def _scalar_mass(r: int) -> np.ndarray:
    """M[i,j] = int_T B_i B_j / |T| for the homogeneous barycentric monomials."""
    import math
    idx = bary_lattice(r)
    n = len(idx)
    M = np.empty((n, n))
    for i, mi in enumerate(idx):
        for j, mj in enumerate(idx):
            m = [mi[0] + mj[0], mi[1] + mj[1], mi[2] + mj[2]]
            M[i, j] = 2.0 * math.prod(math.factorial(v) for v in m) / math.factorial(sum(m) + 2)
    return M


@dataclass
class PiecewiseScalar:
    """Discontinuous piecewise polynomial of degree r.

    coef: (nt, n_r) coefficients in the homogeneous barycentric monomial
    basis of degree r (ordering of bary_lattice).
    """

    mesh: Mesh
    r: int
    coef: np.ndarray

    def eval_cells(self, lams: np.ndarray, tsl: Optional[slice] = None) -> np.ndarray:
        tsl = tsl if tsl is not None else slice(None)
        B = bary_monomial_values(self.r, np.asarray(lams))
        return self.coef[tsl] @ B.T

    def eval_at(self, t: int, lams: np.ndarray) -> np.ndarray:
        B = bary_monomial_values(self.r, np.asarray(lams))
        return B @ self.coef[t]


def project_scalar(mesh: Mesh, r: int, f: Callable[[np.ndarray], np.ndarray],
                   quad_degree: Optional[int] = None) -> PiecewiseScalar:
    """Elementwise L2 projection onto piecewise P_r."""
    deg = quad_degree if quad_degree is not None else max(2 * r + 8, 12)
    rule = triangle_rule(deg)
    pts = np.einsum("qk,mkd->mqd", rule.points, mesh.vertices[mesh.triangles])
    fv = np.asarray(f(pts.reshape(-1, 2))).reshape(mesh.num_triangles, -1)
    B = bary_monomial_values(r, rule.points)
    rhs = np.einsum("q,mq,qi->mi", rule.weights, fv, B)
    coef = np.linalg.solve(_scalar_mass(r), rhs.T).T
    return PiecewiseScalar(mesh=mesh, r=r, coef=coef)


def flux_divergence(field: FluxField) -> PiecewiseScalar:
    """Elementwise divergence of a flux field as a PiecewiseScalar of degree r.

    Exact: the divergence of an order-r flux lies in P_r on each triangle and
    is sampled on the principal lattice.
    """
    sp = field.space
    r = sp.r
    lams = lattice_points(r)
    _, divs = sp.basis_at(lams, with_div=True)
    lc = sp.local_coefficients(field.coef)
    vals = np.einsum("mqd,md->mq", divs, lc)          # (nt, n_r) at lattice points
    V = bary_monomial_values(r, lams)                 # (n_r, n_r)
    coef = np.linalg.solve(V, vals.T).T
    return PiecewiseScalar(mesh=sp.mesh, r=r, coef=coef)


# -- continuous vector Lagrange fields ----------------------------------------


class LagrangeVecSpace:
    """Continuous vector-valued Lagrange space of degree s on a mesh.

    Node numbering: mesh vertices, then (s-1) nodes per edge ordered along
    the global edge direction, then interior nodes per triangle in lattice
    order.
    """

    def __init__(self, mesh: Mesh, s: int):
        if s < 1:
            raise ValueError("Lagrange degree must be >= 1")
        self.mesh = mesh
        self.s = s
        self.n_edge_nodes = s - 1
        self.n_int_nodes = (s - 1) * (s - 2) // 2
        self.num_nodes = (mesh.num_vertices + mesh.num_edges * self.n_edge_nodes
                          + mesh.num_triangles * self.n_int_nodes)
        self._cell_nodes = self._build_cell_nodes()

    @property
    def cell_nodes(self) -> np.ndarray:
        """Global node indices per triangle, lattice order, shape (nt, nloc)."""
        return self._cell_nodes

    def _build_cell_nodes(self) -> np.ndarray:
        mesh, s = self.mesh, self.s
        lattice = bary_lattice(s)
        nloc = len(lattice)
        cn = np.empty((mesh.num_triangles, nloc), dtype=np.int64)
        ev, ei = mesh.num_vertices, self.n_edge_nodes
        for idx, (i, j, k) in enumerate(lattice):
            trip = (i, j, k)
            zeros = [z for z in range(3) if trip[z] == 0]
            if len(zeros) == 2:  # vertex node
                v = trip.index(s)
                cn[:, idx] = mesh.triangles[:, v]
            elif len(zeros) == 1:  # edge node, on the edge opposite the zero
                z = zeros[0]
                u, w = (z + 1) % 3, (z + 2) % 3
                vu, vw = mesh.triangles[:, u], mesh.triangles[:, w]
                e = mesh.tri_edges[:, z]
                slot = np.where(vu < vw, trip[w] - 1, trip[u] - 1)
                cn[:, idx] = ev + e * ei + slot
            else:  # interior node
                inner = [t for t in bary_lattice(s) if all(c > 0 for c in t)]
                slot = inner.index(trip)
                cn[:, idx] = (ev + mesh.num_edges * ei
                              + np.arange(mesh.num_triangles) * self.n_int_nodes + slot)
        return cn

    def node_coordinates(self) -> np.ndarray:
        """(num_nodes, 2) physical positions of all nodes."""
        mesh, s = self.mesh, self.s
        out = np.empty((self.num_nodes, 2))
        out[: mesh.num_vertices] = mesh.vertices
        if self.n_edge_nodes:
            a = mesh.vertices[mesh.edges[:, 0]]
            vec = mesh.vertices[mesh.edges[:, 1]] - a
            ts = np.arange(1, s) / s
            pts = a[:, None, :] + ts[None, :, None] * vec[:, None, :]
            out[mesh.num_vertices: mesh.num_vertices + mesh.num_edges * self.n_edge_nodes] = \
                pts.reshape(-1, 2)
        if self.n_int_nodes:
            inner = np.array([t for t in bary_lattice(s) if all(c > 0 for c in t)],
                             dtype=float) / s
            pts = np.einsum("qk,mkd->mqd", inner, mesh.vertices[mesh.triangles])
            out[mesh.num_vertices + mesh.num_edges * self.n_edge_nodes:] = pts.reshape(-1, 2)
        return out


@dataclass
class LagrangeVecField:
    space: LagrangeVecSpace
    values: np.ndarray  # (num_nodes, 2)

    def eval_cells(self, lams: np.ndarray, tsl: Optional[slice] = None) -> np.ndarray:
        tsl = tsl if tsl is not None else slice(None)
        shape = bary_lagrange_values(self.space.s, np.asarray(lams))  # (Q, nloc)
        nodal = self.values[self.space._cell_nodes[tsl]]              # (m, nloc, 2)
        return np.einsum("qn,mnc->mqc", shape, nodal)

    def eval_at(self, t: int, lams: np.ndarray) -> np.ndarray:
        shape = bary_lagrange_values(self.space.s, np.asarray(lams))
        nodal = self.values[self.space._cell_nodes[t]]
        return shape @ nodal


def bary_coords(points: np.ndarray, tri_pts: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of physical points w.r.t. one triangle."""
    points = np.atleast_2d(points)
    T = np.column_stack([tri_pts[1] - tri_pts[0], tri_pts[2] - tri_pts[0]])
    loc = np.linalg.solve(T, (points - tri_pts[0]).T).T
    return np.column_stack([1.0 - loc[:, 0] - loc[:, 1], loc[:, 0], loc[:, 1]])
