import numpy as np
import pytest

from rtrecovery.mesh import build_mesh, vertex_patch
from rtrecovery.recovery import (MIN_BOUNDARY_TRIS, RANK_RATIO_MIN,
                                 RecoveryError, check_uniqueness, fit_dimension,
                                 fit_vertex, patch_ls_rows, recover)
from rtrecovery.spaces import FluxField, FluxSpace, monomial_exponents


def fan_mesh(degrees):
    """Closed triangle fan around the origin with ring vertices at the given
    angles; the center is the only interior vertex."""
    ang = np.deg2rad(np.asarray(degrees, dtype=float))
    verts = np.vstack([[0.0, 0.0], np.stack([np.cos(ang), np.sin(ang)], axis=1)])
    n = len(degrees)
    tris = np.array([[0, 1 + i, 1 + (i + 1) % n] for i in range(n)])
    return build_mesh(verts, tris)


def random_vector_poly(r, rng):
    exps = monomial_exponents(r + 1)
    c = rng.standard_normal((2, len(exps)))

    def q(pts):
        mono = np.stack([pts[..., 0] ** a * pts[..., 1] ** b for a, b in exps], axis=-1)
        return np.einsum("...m,cm->...c", mono, c)

    return q


# -- uniqueness check ---------------------------------------------------------


def test_corner_vertex_not_unique(square_mesh_86):
    corner = int(np.argmin(np.linalg.norm(square_mesh_86.vertices, axis=1)))
    assert not check_uniqueness(square_mesh_86, corner, 0)


def test_interior_vertices_mostly_unique(square_mesh_86):
    m = square_mesh_86
    interior = [v for v in range(m.num_vertices) if not m.vertex_is_boundary[v]]
    flags0 = [check_uniqueness(m, v, 0) for v in interior]
    flags1 = [check_uniqueness(m, v, 1) for v in interior]
    assert sum(flags1) == len(interior)  # every interior star has >= 4 triangles
    assert sum(flags0) >= len(interior) // 2


def test_fan_angle_condition():
    # regular pentagon fan: five 72 degree wedges, all adjacent pairs 144 < 180
    assert check_uniqueness(fan_mesh([0, 72, 144, 216, 288]), 0, 0)
    # five wedges again, but one adjacent pair spans 160 + 25 = 185 > 180
    assert not check_uniqueness(fan_mesh([0, 160, 185, 210, 250]), 0, 0)
    # four wedges can never determine the order-0 fit
    assert not check_uniqueness(fan_mesh([0, 90, 180, 270]), 0, 0)


def test_higher_order_uses_rank(square_mesh_86):
    m = square_mesh_86
    interior = [v for v in range(m.num_vertices) if not m.vertex_is_boundary[v]]
    assert check_uniqueness(m, interior[0], 2)


# -- vertex fits --------------------------------------------------------------


def test_design_matrix_shapes(square_mesh_86):
    space = FluxSpace(square_mesh_86, 1)
    v = int(np.nonzero(~square_mesh_86.vertex_is_boundary)[0][0])
    patch = vertex_patch(square_mesh_86, v, 0)
    A, dofs = patch_ls_rows(space, patch)
    ne, nt = len(patch.edges), len(patch.triangles)
    assert A.shape == (2 * ne + 2 * nt, fit_dimension(1))
    assert dofs.shape == (A.shape[0],)
    assert len(np.unique(dofs)) == len(dofs)
    assert dofs.max() < space.dofmap.num_flux_dofs


@pytest.mark.parametrize("r", [0, 1])
def test_fit_methods_agree(square_mesh_86, r, rng):
    space = FluxSpace(square_mesh_86, r)
    coef = rng.standard_normal(space.dofmap.num_flux_dofs)
    for v in range(0, square_mesh_86.num_vertices, 9):
        a = fit_vertex(space, coef, v, method="lstsq")
        b = fit_vertex(space, coef, v, method="pinv")
        scale = max(1.0, np.max(np.abs(a.coef)))
        assert np.max(np.abs(a.coef - b.coef)) <= 1e-8 * scale
        assert a.layers == b.layers


def test_unknown_fit_method_rejected(square_mesh_86):
    space = FluxSpace(square_mesh_86, 0)
    coef = np.zeros(space.dofmap.num_flux_dofs)
    with pytest.raises(ValueError):
        fit_vertex(space, coef, 0, method="qr")


def test_boundary_patches_grow(square_mesh_86):
    m = square_mesh_86
    space = FluxSpace(m, 1)
    coef = np.zeros(space.dofmap.num_flux_dofs)
    for v in np.nonzero(m.vertex_is_boundary)[0]:
        fit = fit_vertex(space, coef, v)
        patch = vertex_patch(m, v, fit.layers)
        assert len(patch.triangles) >= MIN_BOUNDARY_TRIS
        assert fit.rank_ratio >= RANK_RATIO_MIN


def test_interior_patches_stay_single_layer(square_mesh_86):
    # the vertex star is already unisolvent away from the boundary, so no
    # interior patch needs enlargement on this mesh
    m = square_mesh_86
    space = FluxSpace(m, 1)
    coef = np.zeros(space.dofmap.num_flux_dofs)
    for v in np.nonzero(~m.vertex_is_boundary)[0]:
        assert fit_vertex(space, coef, v).layers == 0


def test_enlargement_cap_raises():
    # a lone triangle cannot supply the required boundary patch size
    mesh = build_mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
                      np.array([[0, 1, 2]]))
    space = FluxSpace(mesh, 0)
    with pytest.raises(RecoveryError):
        fit_vertex(space, np.zeros(space.dofmap.num_flux_dofs), 0)


# -- the recovery operator ----------------------------------------------------


@pytest.mark.parametrize("r", [0, 1])
def test_polynomial_preservation(square_mesh_86, r, rng):
    # fluxes that are globally polynomial of degree r+1 pass through the
    # recovery unchanged, up to least-squares roundoff
    space = FluxSpace(square_mesh_86, r)
    q = random_vector_poly(r, rng)
    rec = recover(space.interpolate(q))
    coords = rec.space.node_coordinates()
    exact = q(coords)
    scale = max(1.0, np.max(np.abs(exact)))
    assert np.max(np.abs(rec.values - exact)) <= 1e-8 * scale


def test_recover_linear_in_coefficients(square_mesh_86, rng):
    space = FluxSpace(square_mesh_86, 1)
    c1 = rng.standard_normal(space.dofmap.num_flux_dofs)
    c2 = rng.standard_normal(space.dofmap.num_flux_dofs)
    r1 = recover(FluxField(space, c1)).values
    r2 = recover(FluxField(space, c2)).values
    r12 = recover(FluxField(space, c1 + 2.5 * c2)).values
    assert r12 == pytest.approx(r1 + 2.5 * r2, abs=1e-9 * max(1, np.abs(r12).max()))


def test_recover_output_space(square_mesh_86, rng):
    space = FluxSpace(square_mesh_86, 2)
    field = FluxField(space, rng.standard_normal(space.dofmap.num_flux_dofs))
    rec = recover(field)
    assert rec.space.s == 3
    assert rec.values.shape == (rec.space.num_nodes, 2)
    assert np.all(np.isfinite(rec.values))


def test_recover_deterministic(square_mesh_86, rng):
    space = FluxSpace(square_mesh_86, 0)
    field = FluxField(space, rng.standard_normal(space.dofmap.num_flux_dofs))
    a = recover(field).values
    b = recover(field).values
    assert np.array_equal(a, b)
