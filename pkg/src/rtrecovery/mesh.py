"""Conforming triangular meshes: construction, geometry, patches, refinement.

Conventions used throughout the package:

* triangles are stored counterclockwise;
* local edge k of a triangle is the edge opposite local vertex k, traversed
  counterclockwise as (v[k+1], v[k+2]) (indices mod 3);
* global edges are vertex pairs (a, b) with a < b, numbered lexicographically;
  the global unit normal of an edge is its unit direction (from a to b)
  rotated by -pi/2, i.e. n = (d_y, -d_x);
* tri_edge_sign is +1 where the global normal coincides with the triangle's
  outward normal and -1 where it is opposite;
* every triangle carries a refinement edge (local index) used by the bisection
  routines; freshly built meshes default it to the longest edge, ties broken
  by the lowest opposite-vertex local index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

_CLOSURE_MAX_PASSES = 10_000


def _cross2(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """z-component of the cross product of planar vectors (numpy 2 dropped 2-d cross)."""
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class TriangleGeometry:
    """Per-triangle geometric quantities.

    Arrays indexed by local vertex k (0..2): edge k is opposite vertex k.
    """

    points: np.ndarray        # (3, 2) vertex coordinates, ccw
    area: float
    lengths: np.ndarray       # (3,) edge lengths l_k
    angles: np.ndarray        # (3,) interior angle at vertex k
    altitudes: np.ndarray     # (3,) distance from vertex k to edge k
    circumdiameter: float
    tangents: np.ndarray      # (3, 2) ccw unit tangent of edge k
    normals: np.ndarray       # (3, 2) outward unit normal of edge k
    grad_bary: np.ndarray     # (3, 2) gradient of barycentric function k


@dataclass(frozen=True)
class Patch:
    """Collection of triangles around a center vertex (star plus layers)."""

    center: int
    center_xy: np.ndarray
    triangles: np.ndarray     # sorted triangle indices
    vertices: np.ndarray      # sorted vertex indices
    edges: np.ndarray         # sorted edge indices (all edges of member triangles)
    layers: int
    area: float

    @property
    def h(self) -> float:
        """Patch length scale |omega|^(1/2)."""
        return float(np.sqrt(self.area))


@dataclass
class Mesh:
    vertices: np.ndarray          # (nv, 2)
    triangles: np.ndarray         # (nt, 3) int, ccw
    edges: np.ndarray             # (ne, 2) int, a < b, lexicographic order
    tri_edges: np.ndarray         # (nt, 3): global edge index opposite local vertex k
    tri_edge_sign: np.ndarray     # (nt, 3): +-1, see module docstring
    edge_tris: np.ndarray         # (ne, 2): incident triangles, -1 if absent
    edge_is_boundary: np.ndarray  # (ne,) bool
    vertex_is_boundary: np.ndarray  # (nv,) bool
    refinement_edge: np.ndarray   # (nt,) local edge index 0..2
    parent: Optional[np.ndarray] = None  # (nt,) index into the parent mesh, refinements only
    _vertex_tris: Optional[list] = field(default=None, repr=False)
    _geom: Optional[dict] = field(default=None, repr=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    # -- cached derived tables ------------------------------------------------

    def vertex_triangles(self, v: int) -> np.ndarray:
        """Indices of triangles incident to vertex v (ascending)."""
        if self._vertex_tris is None:
            lists: list[list[int]] = [[] for _ in range(self.num_vertices)]
            for t, tri in enumerate(self.triangles):
                for v_ in tri:
                    lists[v_].append(t)
            self._vertex_tris = [np.array(l, dtype=np.int64) for l in lists]
        return self._vertex_tris[v]

    def geometry_tables(self) -> dict:
        """Vectorised geometry for all triangles (cached)."""
        if self._geom is None:
            pts = self.vertices[self.triangles]            # (nt, 3, 2)
            e_vec = pts[:, [2, 0, 1], :] - pts[:, [1, 2, 0], :]  # edge k: z_{k+1} -> z_{k+2}
            lengths = np.linalg.norm(e_vec, axis=2)
            cross = _cross2(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
            area = 0.5 * cross
            tangents = e_vec / lengths[:, :, None]
            normals = np.stack([tangents[:, :, 1], -tangents[:, :, 0]], axis=2)
            altitudes = 2.0 * area[:, None] / lengths
            self._geom = {
                "points": pts,
                "area": area,
                "lengths": lengths,
                "tangents": tangents,
                "normals": normals,
                "altitudes": altitudes,
                "circumdiameter": lengths.prod(axis=1) / (2.0 * area),
                "grad_bary": -normals / altitudes[:, :, None],
                "centroid": pts.mean(axis=1),
            }
        return self._geom

    def mesh_size(self) -> float:
        """max_T |T|^(1/2)."""
        return float(np.sqrt(self.geometry_tables()["area"].max()))


def triangle_geometry(mesh: Mesh, t: int) -> TriangleGeometry:
    g = mesh.geometry_tables()
    pts = g["points"][t]
    lengths = g["lengths"][t]
    # law of cosines per vertex; arccos argument clamped for near-degenerate input
    cosines = np.empty(3)
    for k in range(3):
        lk, la, lb = lengths[k], lengths[(k + 1) % 3], lengths[(k + 2) % 3]
        cosines[k] = (la**2 + lb**2 - lk**2) / (2.0 * la * lb)
    angles = np.arccos(np.clip(cosines, -1.0, 1.0))
    return TriangleGeometry(
        points=pts,
        area=float(g["area"][t]),
        lengths=lengths,
        angles=angles,
        altitudes=g["altitudes"][t],
        circumdiameter=float(g["circumdiameter"][t]),
        tangents=g["tangents"][t],
        normals=g["normals"][t],
        grad_bary=g["grad_bary"][t],
    )


def standalone_geometry(points: np.ndarray) -> TriangleGeometry:
    """Geometry of a single ccw triangle given directly by its vertices."""
    m = build_mesh(np.asarray(points, dtype=float), np.array([[0, 1, 2]]), validate=False)
    return triangle_geometry(m, 0)


# -- construction -------------------------------------------------------------


def build_mesh(
    vertices: np.ndarray,
    triangles: np.ndarray,
    refinement_edge: Optional[np.ndarray] = None,
    parent: Optional[np.ndarray] = None,
    validate: bool = True,
) -> Mesh:
    """Assemble the full connectivity from vertex coordinates and triangles.

    Triangles with negative signed area are flipped to ccw (the refinement
    edge index, if supplied, is remapped accordingly).  Raises MeshError for
    degenerate triangles, repeated vertices within a triangle, non-manifold
    edges, or (when validate=True) hanging vertices / broken boundary loops.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertices must have shape (nv, 2)")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshError("triangles must have shape (nt, 3)")
    nv, nt = vertices.shape[0], triangles.shape[0]
    if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
        raise MeshError("triangle vertex index out of range")
    if ((triangles[:, 0] == triangles[:, 1]) | (triangles[:, 1] == triangles[:, 2])
            | (triangles[:, 0] == triangles[:, 2])).any():
        raise MeshError("triangle with a repeated vertex")

    p = vertices[triangles]
    signed = _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    # degeneracy is judged against each triangle's own edge scale: strongly
    # graded meshes carry well-shaped triangles many orders smaller than the
    # domain, which a global threshold would reject
    edge_sq = ((p[:, [1, 2, 0], :] - p[:, [0, 1, 2], :]) ** 2).sum(axis=2).max(axis=1)
    tiny = (np.abs(signed) <= 1e-12 * edge_sq)
    if tiny.any():
        raise MeshError(f"zero-area triangle: index {int(np.nonzero(tiny)[0][0])}")
    flip = signed < 0
    if flip.any():
        triangles = triangles.copy()
        triangles[flip] = triangles[flip][:, [0, 2, 1]]
        if refinement_edge is not None:
            refinement_edge = np.asarray(refinement_edge, dtype=np.int64).copy()
            swapped = refinement_edge[flip]
            refinement_edge[flip] = np.where(swapped == 0, 0, 3 - swapped)

    # global edges: lexicographically sorted unique (min, max) pairs
    raw = np.stack(
        [triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1
    )  # (nt, 3, 2): local edge k as traversed ccw
    lo = raw.min(axis=2)
    hi = raw.max(axis=2)
    pairs = np.stack([lo, hi], axis=2).reshape(-1, 2)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    tri_edges = inverse.reshape(nt, 3).astype(np.int64)
    tri_edge_sign = np.where(raw[:, :, 0] < raw[:, :, 1], 1, -1).astype(np.int64)

    ne = edges.shape[0]
    counts = np.bincount(tri_edges.ravel(), minlength=ne)
    if (counts > 2).any():
        raise MeshError("non-manifold edge (more than two incident triangles)")
    edge_tris = np.full((ne, 2), -1, dtype=np.int64)
    order = np.argsort(tri_edges.ravel(), kind="stable")
    tri_of_slot = np.repeat(np.arange(nt), 3)[order]
    edge_sorted = tri_edges.ravel()[order]
    starts = np.searchsorted(edge_sorted, np.arange(ne))
    for e in range(ne):
        c = counts[e]
        if c >= 1:
            edge_tris[e, 0] = tri_of_slot[starts[e]]
        if c == 2:
            edge_tris[e, 1] = tri_of_slot[starts[e] + 1]
    edge_is_boundary = counts == 1
    vertex_is_boundary = np.zeros(nv, dtype=bool)
    vertex_is_boundary[edges[edge_is_boundary].ravel()] = True

    if refinement_edge is None:
        refinement_edge = _longest_edge_labels(vertices, triangles)
    else:
        refinement_edge = np.asarray(refinement_edge, dtype=np.int64)
        if refinement_edge.shape != (nt,) or (refinement_edge < 0).any() or (refinement_edge > 2).any():
            raise MeshError("refinement_edge must hold local indices 0..2 per triangle")

    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        tri_edges=tri_edges,
        tri_edge_sign=tri_edge_sign,
        edge_tris=edge_tris,
        edge_is_boundary=edge_is_boundary,
        vertex_is_boundary=vertex_is_boundary,
        refinement_edge=refinement_edge,
        parent=None if parent is None else np.asarray(parent, dtype=np.int64),
    )
    if validate:
        validate_mesh(mesh)
    return mesh


def _longest_edge_labels(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    pts = vertices[triangles]
    e_vec = pts[:, [2, 0, 1], :] - pts[:, [1, 2, 0], :]
    lengths = np.linalg.norm(e_vec, axis=2)
    # ties broken by the lowest opposite-vertex local index: argmax picks the
    # first maximal entry, so round tiny differences away first
    rounded = np.round(lengths, 12)
    return rounded.argmax(axis=1).astype(np.int64)


def validate_mesh(mesh: Mesh) -> None:
    """Conformity checks: used vertices, Euler relation, closed boundary, no
    hanging vertices on boundary edges."""
    used = np.zeros(mesh.num_vertices, dtype=bool)
    used[mesh.triangles.ravel()] = True
    if not used.all():
        raise MeshError("mesh has vertices not referenced by any triangle")
    euler = mesh.num_vertices - mesh.num_edges + mesh.num_triangles
    if euler != 1:
        raise MeshError(f"Euler characteristic {euler} != 1 (holes or hanging structure)")
    # every boundary vertex must have exactly two incident boundary edges
    bnd = mesh.edges[mesh.edge_is_boundary]
    deg = np.bincount(bnd.ravel(), minlength=mesh.num_vertices)
    bad = np.nonzero((deg != 0) & (deg != 2))[0]
    if bad.size:
        raise MeshError(f"boundary is not a closed loop at vertex {int(bad[0])}")
    # hanging vertex: some vertex strictly inside a boundary edge
    if bnd.size:
        a = mesh.vertices[bnd[:, 0]]
        b = mesh.vertices[bnd[:, 1]]
        ab = b - a
        ll = (ab * ab).sum(axis=1)
        for v in range(mesh.num_vertices):
            x = mesh.vertices[v]
            t = ((x - a) * ab).sum(axis=1) / ll
            proj = a + t[:, None] * ab
            d2 = ((x - proj) ** 2).sum(axis=1)
            on = (d2 <= 1e-20 * ll) & (t > 1e-10) & (t < 1 - 1e-10)
            hits = np.nonzero(on)[0]
            for h in hits:
                if v != bnd[h, 0] and v != bnd[h, 1]:
                    raise MeshError(f"hanging vertex {v} on boundary edge {bnd[h].tolist()}")


# -- patches ------------------------------------------------------------------


def vertex_patch(mesh: Mesh, v: int, extra_layers: int = 0) -> Patch:
    """Star of vertex v, optionally grown by whole layers of vertex-neighbours."""
    if not 0 <= v < mesh.num_vertices:
        raise MeshError(f"vertex index {v} out of range")
    tris = set(mesh.vertex_triangles(v).tolist())
    if not tris:
        raise MeshError(f"vertex {v} has no incident triangles")
    for _ in range(extra_layers):
        vs = set(mesh.triangles[sorted(tris)].ravel().tolist())
        grown = set(tris)
        for w in vs:
            grown.update(mesh.vertex_triangles(w).tolist())
        tris = grown
    tri_idx = np.array(sorted(tris), dtype=np.int64)
    verts = np.unique(mesh.triangles[tri_idx])
    edges = np.unique(mesh.tri_edges[tri_idx])
    area = float(mesh.geometry_tables()["area"][tri_idx].sum())
    return Patch(
        center=v,
        center_xy=mesh.vertices[v].copy(),
        triangles=tri_idx,
        vertices=verts,
        edges=edges,
        layers=extra_layers,
        area=area,
    )


def patch_corner_angles(mesh: Mesh, v: int) -> list[tuple[int, float, float]]:
    """For each interior edge at v: (edge index, angle at v in tri 1, in tri 2).

    Used by the uniqueness test for lowest-order recovery: the relevant pairs
    of angles are those of edge-adjacent triangles meeting at v.
    """
    out = []
    incident = [e for e in np.nonzero((mesh.edges == v).any(axis=1))[0]
                if not mesh.edge_is_boundary[e]]
    for e in incident:
        t1, t2 = mesh.edge_tris[e]
        pair = []
        for t in (t1, t2):
            k = int(np.nonzero(mesh.triangles[t] == v)[0][0])
            pair.append(float(triangle_geometry(mesh, t).angles[k]))
        out.append((int(e), pair[0], pair[1]))
    return out


# -- parallelogram structure --------------------------------------------------


def parallelogram_deviation(mesh: Mesh, e: int) -> float:
    """Deviation of the two triangles at interior edge e from forming a
    parallelogram: walk both boundaries counterclockwise starting at e and
    compare the lengths of corresponding edges."""
    if mesh.edge_is_boundary[e]:
        raise MeshError("parallelogram deviation is defined for interior edges")
    t1, t2 = mesh.edge_tris[e]
    g = mesh.geometry_tables()
    dev = 0.0
    seqs = []
    for t in (t1, t2):
        k = int(np.nonzero(mesh.tri_edges[t] == e)[0][0])
        # local edge k runs z_{k+1} -> z_{k+2}, so its ccw successor is edge k+1
        lens = g["lengths"][t]
        seqs.append((lens[(k + 1) % 3], lens[(k + 2) % 3]))
    dev = max(abs(seqs[0][0] - seqs[1][0]), abs(seqs[0][1] - seqs[1][1]))
    return float(dev)


@dataclass(frozen=True)
class StructureReport:
    alpha: float
    threshold: float
    mesh_size: float
    num_interior_edges: int
    num_regular: int
    num_irregular: int
    irregular_area: float
    beta_estimate: Optional[float]


def alpha_beta_report(mesh: Mesh, alpha: float, c: float = 1.0) -> StructureReport:
    """Classify interior edges by parallelogram deviation <= c * h^(1+alpha)
    and measure the area of the union of patches of the failing edges."""
    h = mesh.mesh_size()
    thr = c * h ** (1.0 + alpha)
    interior = np.nonzero(~mesh.edge_is_boundary)[0]
    bad_tris: set[int] = set()
    n_reg = 0
    for e in interior:
        if parallelogram_deviation(mesh, int(e)) <= thr:
            n_reg += 1
        else:
            bad_tris.update(int(t) for t in mesh.edge_tris[e] if t >= 0)
    areas = mesh.geometry_tables()["area"]
    bad_area = float(sum(areas[t] for t in bad_tris))
    beta = None
    if bad_area > 0 and h < 1:
        beta = float(np.log(bad_area) / np.log(h))
    return StructureReport(
        alpha=alpha,
        threshold=thr,
        mesh_size=h,
        num_interior_edges=interior.size,
        num_regular=n_reg,
        num_irregular=interior.size - n_reg,
        irregular_area=bad_area,
        beta_estimate=beta,
    )


# -- refinement ---------------------------------------------------------------


def _midpoint_table(mesh: Mesh, marked_edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """New vertex array with midpoints of the marked edges appended, and a map
    edge index -> midpoint vertex index (-1 where absent)."""
    idx = np.nonzero(marked_edges)[0]
    mids = 0.5 * (mesh.vertices[mesh.edges[idx, 0]] + mesh.vertices[mesh.edges[idx, 1]])
    vertices = np.vstack([mesh.vertices, mids])
    mid_of = np.full(mesh.num_edges, -1, dtype=np.int64)
    mid_of[idx] = mesh.num_vertices + np.arange(idx.size)
    return vertices, mid_of


def refine_regular(mesh: Mesh) -> Mesh:
    """Split every triangle into four congruent children (edge midpoints)."""
    vertices, mid_of = _midpoint_table(mesh, np.ones(mesh.num_edges, dtype=bool))
    t = mesh.triangles
    m0 = mid_of[mesh.tri_edges[:, 0]]
    m1 = mid_of[mesh.tri_edges[:, 1]]
    m2 = mid_of[mesh.tri_edges[:, 2]]
    children = np.stack(
        [
            np.column_stack([t[:, 0], m2, m1]),
            np.column_stack([m2, t[:, 1], m0]),
            np.column_stack([m1, m0, t[:, 2]]),
            np.column_stack([m0, m1, m2]),
        ],
        axis=1,
    ).reshape(-1, 3)
    parent = np.repeat(np.arange(mesh.num_triangles), 4)
    return build_mesh(vertices, children, parent=parent, validate=False)


def _closure_mark(mesh: Mesh, marked_edges: np.ndarray) -> np.ndarray:
    """Grow an edge marking until every triangle with a marked edge also has
    its refinement edge marked (fixed point; monotone, hence terminating)."""
    marked = marked_edges.copy()
    ref_edge_of_tri = mesh.tri_edges[np.arange(mesh.num_triangles), mesh.refinement_edge]
    for _ in range(_CLOSURE_MAX_PASSES):
        tri_has = marked[mesh.tri_edges].any(axis=1)
        need = tri_has & ~marked[ref_edge_of_tri]
        if not need.any():
            return marked
        marked[ref_edge_of_tri[need]] = True
    raise MeshError("refinement closure did not stabilise (inconsistent refinement edges)")


def _bisection_children(tri: np.ndarray, ref: int, mid_of_local, red: bool):
    """Children (vertex triples, refinement-edge local indices) of one triangle.

    tri: the triangle's vertices; ref: refinement edge local index;
    mid_of_local(k): midpoint vertex of local edge k or -1; red: split into
    four congruent children instead of bisecting.
    """
    m = [mid_of_local(k) for k in range(3)]
    if red:
        v0, v1, v2 = tri
        return [
            (v0, m[2], m[1]),
            (m[2], v1, m[0]),
            (m[1], m[0], v2),
            (m[0], m[1], m[2]),
        ], None  # refinement edges recomputed by longest edge
    p, a, b = tri[ref], tri[(ref + 1) % 3], tri[(ref + 2) % 3]
    m_ab = mid_of_local(ref)
    m_bp = mid_of_local((ref + 1) % 3)  # edge opposite a, i.e. (b, p)
    m_pa = mid_of_local((ref + 2) % 3)  # edge opposite b, i.e. (p, a)
    assert m_ab >= 0
    children = []
    # left child (m_ab, b, p), right child (m_ab, p, a); each is stored
    # peak-first so its refinement edge is the pair in slots (1, 2)
    if m_bp >= 0:
        children += [(m_bp, p, m_ab), (m_bp, m_ab, b)]
    else:
        children += [(m_ab, b, p)]
    if m_pa >= 0:
        children += [(m_pa, a, m_ab), (m_pa, m_ab, p)]
    else:
        children += [(m_ab, p, a)]
    return children, 0


def _refine_by_edge_marks(mesh: Mesh, marked_edges: np.ndarray, red_tris: np.ndarray) -> Mesh:
    marked = _closure_mark(mesh, marked_edges)
    vertices, mid_of = _midpoint_table(mesh, marked)
    new_tris: list[tuple] = []
    new_ref: list[int] = []
    new_parent: list[int] = []
    for t in range(mesh.num_triangles):
        local_edges = mesh.tri_edges[t]
        if not marked[local_edges].any():
            new_tris.append(tuple(mesh.triangles[t]))
            new_ref.append(int(mesh.refinement_edge[t]))
            new_parent.append(t)
            continue
        mid_local = lambda k: int(mid_of[local_edges[k]])
        red = bool(red_tris[t]) and all(mid_of[local_edges[k]] >= 0 for k in range(3))
        children, ref_idx = _bisection_children(
            mesh.triangles[t], int(mesh.refinement_edge[t]), mid_local, red
        )
        for ch in children:
            new_tris.append(ch)
            new_parent.append(t)
        if ref_idx is None:
            ref_pts = vertices[np.array(children, dtype=np.int64)]
            e_vec = ref_pts[:, [2, 0, 1], :] - ref_pts[:, [1, 2, 0], :]
            lengths = np.round(np.linalg.norm(e_vec, axis=2), 12)
            new_ref.extend(int(i) for i in lengths.argmax(axis=1))
        else:
            new_ref.extend([ref_idx] * len(children))
    return build_mesh(
        vertices,
        np.array(new_tris, dtype=np.int64),
        refinement_edge=np.array(new_ref, dtype=np.int64),
        parent=np.array(new_parent, dtype=np.int64),
        validate=False,
    )


def refine_bisection(mesh: Mesh, marked: Iterable[int]) -> Mesh:
    """Bisect the marked triangles (newest-vertex rule) with conforming closure."""
    marked = np.asarray(sorted(set(int(t) for t in marked)), dtype=np.int64)
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.num_triangles):
        raise MeshError("marked triangle index out of range")
    if marked.size == 0:
        return mesh
    marked_edges = np.zeros(mesh.num_edges, dtype=bool)
    marked_edges[mesh.tri_edges[marked, mesh.refinement_edge[marked]]] = True
    return _refine_by_edge_marks(mesh, marked_edges, np.zeros(mesh.num_triangles, dtype=bool))


def uniform_bisect(mesh: Mesh) -> Mesh:
    """Bisect every triangle twice (all edges cut): exactly four children each."""
    marked_edges = np.ones(mesh.num_edges, dtype=bool)
    return _refine_by_edge_marks(mesh, marked_edges, np.zeros(mesh.num_triangles, dtype=bool))


def refine_adaptive(mesh: Mesh, marked: Iterable[int]) -> Mesh:
    """Split the marked triangles into four congruent children; restore
    conformity by newest-vertex bisection of the affected neighbours."""
    marked = np.asarray(sorted(set(int(t) for t in marked)), dtype=np.int64)
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.num_triangles):
        raise MeshError("marked triangle index out of range")
    if marked.size == 0:
        return mesh
    marked_edges = np.zeros(mesh.num_edges, dtype=bool)
    marked_edges[mesh.tri_edges[marked].ravel()] = True
    red = np.zeros(mesh.num_triangles, dtype=bool)
    red[marked] = True
    return _refine_by_edge_marks(mesh, marked_edges, red)


# -- text format --------------------------------------------------------------


def write_mesh_text(mesh: Mesh, path: str) -> None:
    """Write 'nv nt' header, nv coordinate lines, nt 0-based index lines."""
    with open(path, "w") as f:
        f.write(f"{mesh.num_vertices} {mesh.num_triangles}\n")
        for x, y in mesh.vertices:
            f.write(f"{x:.17g} {y:.17g}\n")
        for i, j, k in mesh.triangles:
            f.write(f"{i} {j} {k}\n")


def read_mesh_text(path: str) -> Mesh:
    with open(path) as f:
        tokens = f.read().split()
    if len(tokens) < 2:
        raise MeshError("mesh file too short")
    nv, nt = int(tokens[0]), int(tokens[1])
    need = 2 + 2 * nv + 3 * nt
    if len(tokens) != need:
        raise MeshError(f"mesh file has {len(tokens)} tokens, expected {need}")
    vals = tokens[2:]
    vertices = np.array(vals[: 2 * nv], dtype=float).reshape(nv, 2)
    triangles = np.array(vals[2 * nv:], dtype=np.int64).reshape(nt, 3)
    return build_mesh(vertices, triangles)


# -- generators ---------------------------------------------------------------


def unit_square_mesh(target_nt: int = 86, seed: int = 0, min_angle_deg: float = 18.0) -> Mesh:
    """Unstructured Delaunay mesh of [0,1]^2 with about target_nt triangles.

    Boundary points are evenly spaced; interior points are a jittered grid.
    The construction retries jitter substreams until the minimum angle bound
    holds, so the result is deterministic in (target_nt, seed).
    """
    from scipy.spatial import Delaunay

    if target_nt < 2:
        raise MeshError("target_nt must be at least 2")
    # nt = B + 2 I - 2 with B = 4 + 4 s boundary points and I = m^2 interior
    best = None
    for s in range(0, 40):
        B = 4 + 4 * s
        for m in range(0, 60):
            nt = B + 2 * m * m - 2
            score = abs(nt - target_nt)
            # prefer balanced point spacing: roughly s + 2 boundary intervals vs m + 1
            bal = abs((s + 1) - m)
            if best is None or (score, bal) < (best[0], best[1]):
                best = (score, bal, s, m)
    _, _, s, m = best
    side = np.linspace(0.0, 1.0, s + 2)
    pts = [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([1.0, 1.0]), np.array([0.0, 1.0])]
    for v in side[1:-1]:
        pts += [np.array([v, 0.0]), np.array([v, 1.0]), np.array([0.0, v]), np.array([1.0, v])]
    boundary = np.array(pts)

    rng = np.random.default_rng(seed)
    for attempt in range(60):
        if m > 0:
            g = (np.arange(m) + 1.0) / (m + 1)
            gx, gy = np.meshgrid(g, g)
            interior = np.column_stack([gx.ravel(), gy.ravel()])
            jitter = (rng.uniform(-1, 1, size=interior.shape)) * (0.30 / (m + 1))
            margin = 0.55 / (m + 1)
            interior = np.clip(interior + jitter, margin, 1.0 - margin)
            cloud = np.vstack([boundary, interior])
        else:
            cloud = boundary
        tri = Delaunay(cloud)
        try:
            mesh = build_mesh(cloud, tri.simplices)
        except MeshError:
            continue
        min_angle = min(triangle_geometry(mesh, t).angles.min()
                        for t in range(mesh.num_triangles))
        if np.degrees(min_angle) >= min_angle_deg:
            return mesh
    raise MeshError("could not generate a unit-square mesh meeting the angle bound")


def slit_square_mesh(initial_nt: int = 80, corner_angle: float = np.pi / 24) -> Mesh:
    """Coarse mesh of [-1,1]^2 minus a thin triangle attached to the origin.

    The removed triangle has its sharp vertex (angle corner_angle) at the
    origin and its other vertices at (1, 0) and (1, tan(corner_angle)), which
    leaves a reentrant corner of angle 2 pi - corner_angle at the origin.  A
    five-triangle fan around the origin is refined regularly until it has at
    least initial_nt triangles.
    """
    t = np.tan(corner_angle)
    ring = np.array(
        [[1.0, t], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 0.0]]
    )
    vertices = np.vstack([[0.0, 0.0], ring])
    tris = np.array([[0, i, i + 1] for i in range(1, 6)], dtype=np.int64)
    mesh = build_mesh(vertices, tris)
    while mesh.num_triangles < initial_nt:
        mesh = refine_regular(mesh)
    return mesh
