import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtrecovery.mesh import build_mesh
from rtrecovery.quadrature import triangle_rule
from rtrecovery.spaces import (FluxField, FluxSpace, LagrangeVecField,
                               LagrangeVecSpace, bary_lagrange_values,
                               bary_lattice, flux_divergence, flux_local_dim,
                               monomial_exponents, project_scalar, scalar_dim)

ONE_TRI = build_mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]]),
                     np.array([[0, 1, 2]]))


def smooth_q(pts):
    x, y = pts[:, 0], pts[:, 1]
    return np.stack([np.sin(np.pi * x) * np.cosh(y), np.cos(x * y)], axis=1)


def smooth_div_q(pts):
    x, y = pts[:, 0], pts[:, 1]
    return np.pi * np.cos(np.pi * x) * np.cosh(y) - x * np.sin(x * y)


# -- dimensions ---------------------------------------------------------------


@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_dimension_counts(square_mesh_86, r):
    space = FluxSpace(square_mesh_86, r)
    m = square_mesh_86
    assert flux_local_dim(r) == (r + 1) * (r + 3)
    assert space.N == (r + 1) * (r + 3)
    expected = m.num_edges * (r + 1) + m.num_triangles * r * (r + 1)
    assert space.dofmap.num_flux_dofs == expected
    assert scalar_dim(r) == (r + 1) * (r + 2) // 2


def test_monomial_exponents_ordering():
    assert monomial_exponents(2) == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert len(monomial_exponents(5)) == 21


# -- interpolation against a symbolically computed oracle ---------------------


def test_interpolation_oracle_order_one():
    # Degrees of freedom of q = (x^2 + 2y, x - y^2) on the single reference
    # triangle, computed independently with exact rational/radical arithmetic:
    # edge dofs are weighted normal moments at the 2-point Gauss nodes of each
    # edge (edges in sorted vertex order), interior dofs are mean moments
    # against the constant Lagrange function.
    space = FluxSpace(ONE_TRI, 1)

    def q(pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([x ** 2 + 2 * y, x - y ** 2], axis=1)

    expected = np.array([
        -0.21132486540518712,   # edge (0,1), first Gauss node
        -0.78867513459481288,   # edge (0,1), second
        0.30812996125314547,    # edge (0,2), first
        1.2906521094459980,     # edge (0,2), second
        1.3431254476081673,     # edge (1,2), first
        1.1334790252230499,     # edge (1,2), second
        0.765,                  # interior, x component
        0.32666666666666667,    # interior, y component
    ])
    coef = space.interpolate(q).coef
    assert coef == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_interpolation_idempotent(r, rng):
    # interpolating a field already in the space returns its own coefficients,
    # so the dof functionals are dual to the basis
    space = FluxSpace(ONE_TRI, r)
    coef = rng.standard_normal(space.dofmap.num_flux_dofs)
    field = FluxField(space, coef)
    again = space.interpolate(lambda pts: field.eval_at(0, pts)).coef
    assert again == pytest.approx(coef, abs=1e-10)


@pytest.mark.parametrize("r", [0, 1, 2])
def test_interpolation_preserves_vector_polynomials(square_mesh_86, r, rng):
    space = FluxSpace(square_mesh_86, r)
    cx = rng.standard_normal(scalar_dim(r))
    cy = rng.standard_normal(scalar_dim(r))
    exps = monomial_exponents(r)

    def q(pts):
        mono = np.stack([pts[:, 0] ** a * pts[:, 1] ** b for a, b in exps], axis=1)
        return np.stack([mono @ cx, mono @ cy], axis=1)

    field = space.interpolate(q)
    lams = np.array(bary_lattice(3), dtype=float) / 3
    vals = field.eval_cells(lams)
    pts = np.einsum("qk,mkd->mqd", lams, square_mesh_86.vertices[square_mesh_86.triangles])
    exact = q(pts.reshape(-1, 2)).reshape(vals.shape)
    assert np.max(np.abs(vals - exact)) <= 1e-11 * max(1.0, np.max(np.abs(exact)))


# -- commuting property: divergence of the interpolant ------------------------


@pytest.mark.parametrize("r", [0, 1, 2])
def test_divergence_commutes_with_projection(square_mesh_86, r):
    space = FluxSpace(square_mesh_86, r)
    div_interp = flux_divergence(space.interpolate(smooth_q))
    proj = project_scalar(square_mesh_86, r, smooth_div_q)
    resid = np.max(np.abs(div_interp.coef - proj.coef))
    scale = max(1.0, np.max(np.abs(proj.coef)))
    assert resid <= 1e-11 * scale


def test_divergence_of_field_matches_finite_difference(rng):
    space = FluxSpace(ONE_TRI, 2)
    coef = rng.standard_normal(space.dofmap.num_flux_dofs)
    field = FluxField(space, coef)
    pts = np.array([[0.4, 0.3], [0.5, 0.2], [0.35, 0.45]])
    eps = 1e-6
    ex = np.array([eps, 0.0])
    ey = np.array([0.0, eps])
    fd = ((field.eval_at(0, pts + ex)[:, 0] - field.eval_at(0, pts - ex)[:, 0])
          + (field.eval_at(0, pts + ey)[:, 1] - field.eval_at(0, pts - ey)[:, 1])) / (2 * eps)
    assert field.div_at(0, pts) == pytest.approx(fd, abs=1e-5)


# -- evaluation consistency ---------------------------------------------------


def test_eval_cells_matches_eval_at(square_mesh_86, rng):
    space = FluxSpace(square_mesh_86, 1)
    field = FluxField(space, rng.standard_normal(space.dofmap.num_flux_dofs))
    lams = rng.dirichlet(np.ones(3), size=4)
    vals = field.eval_cells(lams)
    divs = field.div_cells(lams)
    for t in (0, 17, 85):
        pts = lams @ square_mesh_86.vertices[square_mesh_86.triangles[t]]
        assert field.eval_at(t, pts) == pytest.approx(vals[t], abs=1e-12)
        assert field.div_at(t, pts) == pytest.approx(divs[t], abs=1e-12)


def test_normal_trace_continuity(square_mesh_86, rng):
    # matched edge dofs force continuous normal components across interior edges
    m = square_mesh_86
    space = FluxSpace(m, 1)
    field = FluxField(space, rng.standard_normal(space.dofmap.num_flux_dofs))
    interior = np.nonzero(~m.edge_is_boundary)[0]
    for e in interior[::7]:
        a, b = m.vertices[m.edges[e]]
        d = b - a
        n = np.array([d[1], -d[0]]) / np.linalg.norm(d)
        pts = a + np.linspace(0.15, 0.85, 5)[:, None] * d
        t1, t2 = m.edge_tris[e]
        qn1 = field.eval_at(t1, pts) @ n
        qn2 = field.eval_at(t2, pts) @ n
        assert qn1 == pytest.approx(qn2, abs=1e-11)


# -- scalar projection --------------------------------------------------------


@pytest.mark.parametrize("r", [0, 1, 2])
def test_scalar_projection_reproduces_polynomials(square_mesh_86, r, rng):
    c = rng.standard_normal(scalar_dim(r))
    exps = monomial_exponents(r)

    def f(pts):
        return np.stack([pts[:, 0] ** a * pts[:, 1] ** b for a, b in exps], axis=1) @ c

    proj = project_scalar(square_mesh_86, r, f)
    lams = np.array(bary_lattice(2), dtype=float) / 2
    vals = proj.eval_cells(lams)
    pts = np.einsum("qk,mkd->mqd", lams, square_mesh_86.vertices[square_mesh_86.triangles])
    exact = f(pts.reshape(-1, 2)).reshape(vals.shape)
    assert np.max(np.abs(vals - exact)) <= 1e-12 * max(1.0, np.max(np.abs(exact)))


def test_scalar_projection_residual_is_orthogonal(square_mesh_86):
    r = 1
    proj = project_scalar(square_mesh_86, r, smooth_div_q)
    rule = triangle_rule(8)
    lag = bary_lagrange_values(r, rule.points)
    pts = np.einsum("qk,mkd->mqd", rule.points,
                    square_mesh_86.vertices[square_mesh_86.triangles])
    fv = smooth_div_q(pts.reshape(-1, 2)).reshape(pts.shape[:2])
    resid = fv - proj.eval_cells(rule.points)
    areas = square_mesh_86.geometry_tables()["area"]
    moments = np.einsum("q,mq,ql,m->ml", rule.weights, resid, lag, areas)
    assert np.max(np.abs(moments)) <= 1e-13


# -- continuous vector lattice space ------------------------------------------


@pytest.mark.parametrize("s", [1, 2, 3])
def test_lagrange_space_node_sharing(square_mesh_86, s):
    m = square_mesh_86
    space = LagrangeVecSpace(m, s)
    nodes = space.node_coordinates()
    cells = space.cell_nodes
    assert cells.shape == (m.num_triangles, (s + 1) * (s + 2) // 2)
    # all cell references resolve, and referenced coordinates lie in the triangle
    lams = np.array(bary_lattice(s), dtype=float) / s
    expect = np.einsum("qk,mkd->mqd", lams, m.vertices[m.triangles])
    assert nodes[cells] == pytest.approx(expect, abs=1e-12)
    # shared edges share node indices, hence fields are continuous
    counts = np.bincount(cells.reshape(-1), minlength=len(nodes))
    assert counts.min() >= 1
    assert len(nodes) == (m.num_vertices + m.num_edges * (s - 1)
                          + m.num_triangles * (s - 1) * (s - 2) // 2)


def test_lagrange_field_continuity(square_mesh_86, rng):
    m = square_mesh_86
    space = LagrangeVecSpace(m, 2)
    values = rng.standard_normal((space.num_nodes, 2))
    field = LagrangeVecField(space, values)
    e = int(np.nonzero(~m.edge_is_boundary)[0][0])
    t1, t2 = m.edge_tris[e]
    mid = m.vertices[m.edges[e]].mean(axis=0)

    def lams_in(t):
        tri = m.vertices[m.triangles[t]]
        mat = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
        ab = np.linalg.solve(mat, mid - tri[0])
        return np.array([[1 - ab.sum(), ab[0], ab[1]]])

    v1 = field.eval_at(t1, lams_in(t1))
    v2 = field.eval_at(t2, lams_in(t2))
    assert v1 == pytest.approx(v2, abs=1e-11)


# -- properties ---------------------------------------------------------------


@given(st.integers(0, 3), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=20, deadline=None)
def test_basis_dof_duality_random_triangle(r, seed):
    rng = np.random.default_rng(seed)
    for _ in range(40):
        pts = rng.uniform(-1, 1, (3, 2))
        u, v = pts[1] - pts[0], pts[2] - pts[0]
        if abs(u[0] * v[1] - u[1] * v[0]) > 0.2:
            break
    mesh = build_mesh(pts, np.array([[0, 1, 2]]))
    space = FluxSpace(mesh, r)
    coef = rng.standard_normal(space.dofmap.num_flux_dofs)
    field = FluxField(space, coef)
    again = space.interpolate(lambda p: field.eval_at(0, p)).coef
    np.testing.assert_allclose(again, coef, atol=1e-8 * max(1, np.abs(coef).max()))
