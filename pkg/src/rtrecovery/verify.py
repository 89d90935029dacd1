"""Local error-expansion identities for second-order flux interpolation.

For a quadratic vector field p2 on a triangle T, the interpolation error
p2 - Pi p2 of the order-1 flux interpolant admits two exact representations:

* an edge expansion: for every quadratic w2,

      int_T (p2 - Pi p2) . curl w2 = sum_k int_{e_k} B_k(p2) dtt_k w2,

  where curl w2 = (-d_y w2, d_x w2), dtt_k is the second tangential
  derivative along edge k, and B_k is a constant-coefficient contraction of
  the Hessians of p2 with weights mu given in closed form below;

* a stream-function form: p2 - Pi p2 = curl w for an explicit cubic bubble
  combination w whose coefficients use a second weight family alpha.

Both weight families are rational in the squared edge lengths and the
circumdiameter.  fit_edge_operator recovers the B_k weights numerically from
the defining identity alone and provides an independent cross-check of the
closed forms.  Checks return dimensionless residuals: absolute mismatch
divided by the natural scale of the quantity (noted per check).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import TriangleGeometry, build_mesh, standalone_geometry
from .quadrature import triangle_rule
from .spaces import FluxSpace

# slots of the contraction weights: (projection i, derivative pair jl)
_SLOTS = ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 0, 0), (1, 0, 1), (1, 1, 1))


@dataclass(frozen=True)
class EdgeCoefficients:
    """Weight tables of the edge operator and the stream-function form.

    mu[i, j, l, k] and alpha[i, j, l, k]: projection index i, derivative
    direction indices j, l (0 = tangent, 1 = normal), edge k.  Both tables
    are symmetric in (j, l).
    """

    mu: np.ndarray
    alpha: np.ndarray


def edge_coefficients(geom: TriangleGeometry) -> EdgeCoefficients:
    l = geom.lengths
    d = geom.circumdiameter
    l123 = l[0] * l[1] * l[2]
    mu = np.empty((2, 2, 2, 3))
    alpha = np.empty((2, 2, 2, 3))
    for k in range(3):
        lk = l[k]
        lm = l[(k + 2) % 3]  # edge preceding k in cyclic order
        lp = l[(k + 1) % 3]  # edge following k
        dif = lm**2 - lp**2
        s = lm**2 + lp**2
        mu[0, 0, 0, k] = (3 * lk**4 - 3 * dif**2 - 4 * lk**2 * s) / 5760.0
        mu[0, 0, 1, k] = l123 * dif / (1440.0 * d)
        mu[0, 1, 1, k] = -(l123**2) / (1440.0 * d**2)
        mu[1, 0, 0, k] = d * dif * (4 * lk**4 - dif**2 - 3 * lk**2 * s) / (2880.0 * l123)
        mu[1, 0, 1, k] = -mu[0, 0, 0, k]
        mu[1, 1, 1, k] = -mu[0, 0, 1, k]

        alpha[0, 0, 0, k] = lm * lp * (3 * lk**4 - dif**2) / (24.0 * d * lk**2)
        alpha[0, 0, 1, k] = lm**2 * lp**2 * dif / (12.0 * d**2 * lk)
        alpha[0, 1, 1, k] = -(lm**3) * lp**3 / (6.0 * d**3)
        alpha[1, 0, 0, k] = dif * (9 * lk**4 - dif**2) / (48.0 * lk**3)
        alpha[1, 0, 1, k] = -alpha[0, 0, 0, k]
        alpha[1, 1, 1, k] = -alpha[0, 0, 1, k]
    mu[:, 1, 0, :] = mu[:, 0, 1, :]
    alpha[:, 1, 0, :] = alpha[:, 0, 1, :]
    return EdgeCoefficients(mu=mu, alpha=alpha)


# -- quadratic fields ---------------------------------------------------------
# scalar quadratics are coefficient vectors over (1, x, y, x^2, x y, y^2);
# vector quadratics are pairs of such vectors, shape (2, 6).


def quadratic_eval(c: np.ndarray, pts: np.ndarray) -> np.ndarray:
    x, y = pts[..., 0], pts[..., 1]
    basis = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=-1)
    return basis @ c


def quadratic_grad(c: np.ndarray, pts: np.ndarray) -> np.ndarray:
    x, y = pts[..., 0], pts[..., 1]
    gx = c[1] + 2 * c[3] * x + c[4] * y
    gy = c[2] + c[4] * x + 2 * c[5] * y
    return np.stack([gx, gy], axis=-1)


def quadratic_hessian(c: np.ndarray) -> np.ndarray:
    return np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])


def vector_quadratic_eval(c: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return np.stack([quadratic_eval(c[0], pts), quadratic_eval(c[1], pts)], axis=-1)


def vector_quadratic_hessians(c: np.ndarray) -> np.ndarray:
    return np.stack([quadratic_hessian(c[0]), quadratic_hessian(c[1])])


def hessian_contractions(hessians: np.ndarray, geom: TriangleGeometry, k: int) -> np.ndarray:
    """D[i, j, l]: component along (t_k, n_k)[i] of u_j^T H u_l per component.

    hessians: (2, 2, 2) array, one 2x2 Hessian per field component.
    """
    u = np.stack([geom.tangents[k], geom.normals[k]])
    core = np.einsum("ja,mab,lb->mjl", u, hessians, u)  # (2 comp, j, l)
    return np.einsum("ic,cjl->ijl", u, core)


def apply_edge_operator(hessians: np.ndarray, geom: TriangleGeometry, k: int,
                        coeffs: EdgeCoefficients | None = None) -> float:
    """B_k applied to a field with the given (constant) component Hessians."""
    if coeffs is None:
        coeffs = edge_coefficients(geom)
    D = hessian_contractions(hessians, geom, k)
    return float(np.sum(coeffs.mu[:, :, :, k] * D))


# -- bubble functions ---------------------------------------------------------


def cubic_bubble(lams: np.ndarray) -> np.ndarray:
    """lam1 lam2 lam3; integral over T equals |T|/60."""
    return lams[..., 0] * lams[..., 1] * lams[..., 2]


def edge_bubble_signed(lams: np.ndarray, k: int) -> np.ndarray:
    """lam_{k-1} lam_{k+1} (lam_{k-1} - lam_{k+1}); zero mean over T."""
    a = lams[..., (k + 2) % 3]
    b = lams[..., (k + 1) % 3]
    return a * b * (a - b)


def edge_bubble(lams: np.ndarray, k: int) -> np.ndarray:
    """lam_{k-1} lam_{k+1}."""
    return lams[..., (k + 2) % 3] * lams[..., (k + 1) % 3]


def _bubble_grads(geom: TriangleGeometry, lams: np.ndarray):
    """Gradients of the cubic bubble and the signed edge bubbles at
    barycentric points; shapes (n, 2) and (3, n, 2)."""
    g = geom.grad_bary  # (3, 2)
    l1, l2, l3 = lams[..., 0], lams[..., 1], lams[..., 2]
    grad0 = (np.outer(l2 * l3, g[0]) + np.outer(l1 * l3, g[1]) + np.outer(l1 * l2, g[2]))
    grads_k = []
    for k in range(3):
        a = lams[..., (k + 2) % 3]
        b = lams[..., (k + 1) % 3]
        ga = g[(k + 2) % 3]
        gb = g[(k + 1) % 3]
        grads_k.append(np.outer(2 * a * b - b * b, ga) + np.outer(a * a - 2 * a * b, gb))
    return grad0, np.stack(grads_k)


# -- local interpolation ------------------------------------------------------


def _local_interpolant(points: np.ndarray, func, r: int = 1):
    """Order-r flux interpolant of a smooth field on one standalone triangle."""
    mesh = build_mesh(np.asarray(points, dtype=float), np.array([[0, 1, 2]]), validate=False)
    space = FluxSpace(mesh, r)
    return mesh, space.interpolate(func)


def _perp(v: np.ndarray) -> np.ndarray:
    """Rotate by +pi/2: (x, y) -> (-y, x)."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


# -- identity checks ----------------------------------------------------------


def check_edge_expansion(points: np.ndarray, p2: np.ndarray, w2: np.ndarray) -> float:
    """Residual of the edge expansion of the interpolation error.

    Scale: max(1, |H(p2)|) * max(1, |H(w2)|) * h^4 with h the circumdiameter.
    """
    points = np.asarray(points, dtype=float)
    geom = standalone_geometry(points)
    mesh, interp = _local_interpolant(points, lambda x: vector_quadratic_eval(p2, x))
    rule = triangle_rule(6)
    phys = rule.points @ points
    diff = vector_quadratic_eval(p2, phys) - interp.eval_cells(rule.points)[0]
    curl_w = _perp(quadratic_grad(w2, phys))
    lhs = geom.area * np.dot(rule.weights, np.einsum("qc,qc->q", diff, curl_w))

    Hp = vector_quadratic_hessians(p2)
    Hw = quadratic_hessian(w2)
    coeffs = edge_coefficients(geom)
    rhs = 0.0
    for k in range(3):
        dtt = geom.tangents[k] @ Hw @ geom.tangents[k]
        rhs += geom.lengths[k] * apply_edge_operator(Hp, geom, k, coeffs) * dtt
    h = geom.circumdiameter
    scale = max(1.0, np.abs(Hp).max()) * max(1.0, np.abs(Hw).max()) * h**4
    return abs(lhs - rhs) / scale


def _sample_lams() -> np.ndarray:
    """Pointwise-check sample set: degree-5 principal lattice plus centroid."""
    from .spaces import bary_lattice
    lat = np.array(bary_lattice(5), dtype=float) / 5.0
    return np.vstack([lat, np.full((1, 3), 1.0 / 3.0)])


def check_curl_representation(points: np.ndarray, p2: np.ndarray) -> tuple[float, float, float]:
    """Residuals of the stream-function form of the interpolation error.

    Returns (pointwise residual, bubble-coefficient spread over the three
    equivalent formulas, divergence residual of the interpolation error).
    Scales: max(1, |H(p2)|) * h^2 for the pointwise part, * h^3 for the
    spread, * h for the divergence.
    """
    points = np.asarray(points, dtype=float)
    geom = standalone_geometry(points)
    mesh, interp = _local_interpolant(points, lambda x: vector_quadratic_eval(p2, x))
    coeffs = edge_coefficients(geom)
    Hp = vector_quadratic_hessians(p2)

    c0 = np.empty(3)
    for beta in range(3):
        D = hessian_contractions(Hp, geom, beta)
        c0[beta] = np.sum(coeffs.alpha[:, :, :, beta] * D)
    ck = np.array([
        geom.lengths[k] ** 3 / 12.0
        * float(geom.normals[k] @ (geom.tangents[k] @ Hp @ geom.tangents[k]))
        for k in range(3)
    ])

    lams = _sample_lams()
    phys = lams @ points
    grad0, gradsk = _bubble_grads(geom, lams)
    grad_w = c0[0] * grad0 + np.einsum("k,knc->nc", ck, gradsk)
    diff = vector_quadratic_eval(p2, phys) - interp.eval_at(0, phys)
    h = geom.circumdiameter
    scale = max(1.0, np.abs(Hp).max())
    residual = np.abs(diff - _perp(grad_w)).max() / (scale * h**2)
    spread = (c0.max() - c0.min()) / (scale * h**3)
    # the error must be divergence free: div p2 is linear, hence reproduced
    x, y = phys[..., 0], phys[..., 1]
    div_exact = (p2[0, 1] + 2 * p2[0, 3] * x + p2[0, 4] * y
                 + p2[1, 2] + p2[1, 4] * x + 2 * p2[1, 5] * y)
    div_res = np.abs(div_exact - interp.div_at(0, phys)).max() / (scale * h)
    return float(residual), float(spread), float(div_res)


def check_hierarchical_identities(points: np.ndarray, w2: np.ndarray) -> tuple[float, float]:
    """Residuals of two exact quadratic identities.

    (a) w2 minus its vertex interpolant equals -(1/2) sum_k l_k^2 phi_k dtt_k w2.
    (b) The Laplacian of w2 equals
        (1/(4|T|^2)) sum_k l_k^2 l_{k-1} l_{k+1} cos(theta_k) dtt_k w2.
    """
    points = np.asarray(points, dtype=float)
    geom = standalone_geometry(points)
    Hw = quadratic_hessian(w2)
    dtt = np.array([geom.tangents[k] @ Hw @ geom.tangents[k] for k in range(3)])

    lams = _sample_lams()
    phys = lams @ points
    wvals = quadratic_eval(w2, phys)
    vertex_vals = quadratic_eval(w2, points)
    linear = lams @ vertex_vals
    corr = sum(-0.5 * geom.lengths[k] ** 2 * edge_bubble(lams, k) * dtt[k] for k in range(3))
    h = geom.circumdiameter
    scale = max(1.0, np.abs(Hw).max())
    res_a = np.abs(wvals - linear - corr).max() / (scale * h**2)

    lap = Hw[0, 0] + Hw[1, 1]
    rhs = sum(
        geom.lengths[k] ** 2 * geom.lengths[(k + 2) % 3] * geom.lengths[(k + 1) % 3]
        * np.cos(geom.angles[k]) * dtt[k]
        for k in range(3)
    ) / (4.0 * geom.area**2)
    res_b = abs(lap - rhs) / scale
    return float(res_a), float(res_b)


# -- independent recovery of the edge weights ---------------------------------


def fit_edge_operator(points: np.ndarray) -> np.ndarray:
    """Solve for the mu weights numerically from the defining identity.

    Uses the 6 pure-quadratic vector fields and 3 pure-quadratic scalars as
    test functions; the resulting 18x18 linear system determines all weights
    uniquely.  Returns an array shaped like EdgeCoefficients.mu with the
    (j,l) = (0,1) and (1,0) slots carrying the common symmetric value.
    """
    points = np.asarray(points, dtype=float)
    geom = standalone_geometry(points)
    p_basis = []
    for comp in range(2):
        for mono in (3, 4, 5):
            c = np.zeros((2, 6))
            c[comp, mono] = 1.0
            p_basis.append(c)
    w_basis = []
    for mono in (3, 4, 5):
        c = np.zeros(6)
        c[mono] = 1.0
        w_basis.append(c)

    rule = triangle_rule(6)
    phys = rule.points @ points
    A = np.zeros((18, 18))
    b = np.zeros(18)
    row = 0
    for p2 in p_basis:
        mesh, interp = _local_interpolant(points, lambda x: vector_quadratic_eval(p2, x))
        diff = vector_quadratic_eval(p2, phys) - interp.eval_cells(rule.points)[0]
        Hp = vector_quadratic_hessians(p2)
        Dvals = [hessian_contractions(Hp, geom, k) for k in range(3)]
        for w2 in w_basis:
            curl_w = _perp(quadratic_grad(w2, phys))
            b[row] = geom.area * np.dot(rule.weights, np.einsum("qc,qc->q", diff, curl_w))
            Hw = quadratic_hessian(w2)
            for k in range(3):
                dtt = geom.tangents[k] @ Hw @ geom.tangents[k]
                for s, (i, j, l) in enumerate(_SLOTS):
                    # off-diagonal slot stands for both (j,l) orders
                    mult = 2.0 if j != l else 1.0
                    A[row, 6 * k + s] = geom.lengths[k] * mult * Dvals[k][i, j, l] * dtt
            row += 1
    sol = np.linalg.solve(A, b)
    mu = np.empty((2, 2, 2, 3))
    for k in range(3):
        for s, (i, j, l) in enumerate(_SLOTS):
            mu[i, j, l, k] = sol[6 * k + s]
            mu[i, l, j, k] = sol[6 * k + s]
    return mu


# -- randomised suite ---------------------------------------------------------


@dataclass
class SuiteReport:
    samples: int
    aspect_max: float
    max_edge_expansion: float
    max_curl_residual: float
    max_beta_spread: float
    max_hierarchy: float
    max_laplacian: float
    max_div_residual: float
    max_fit_mismatch: float
    worst_triangle: np.ndarray | None = None

    @property
    def worst(self) -> float:
        return max(self.max_edge_expansion, self.max_curl_residual,
                   self.max_beta_spread, self.max_hierarchy, self.max_laplacian,
                   self.max_div_residual, self.max_fit_mismatch)


def random_triangle(rng: np.random.Generator, aspect_max: float = 20.0,
                    size_range: tuple[float, float] = (0.1, 10.0)) -> np.ndarray:
    """Random nondegenerate ccw triangle with aspect ratio below the bound.

    Aspect ratio: longest edge over smallest altitude.
    """
    while True:
        pts = rng.uniform(-1.0, 1.0, size=(3, 2))
        u, v = pts[1] - pts[0], pts[2] - pts[0]
        area2 = u[0] * v[1] - u[1] * v[0]
        if area2 < 0:
            pts = pts[[0, 2, 1]]
            area2 = -area2
        if area2 < 1e-3:
            continue
        lengths = np.linalg.norm(pts[[2, 0, 1]] - pts[[1, 2, 0]], axis=1)
        aspect = lengths.max() / (area2 / lengths.max())
        if aspect <= aspect_max:
            scale = np.exp(rng.uniform(np.log(size_range[0]), np.log(size_range[1])))
            return pts * scale


def run_suite(samples: int = 500, aspect_max: float = 20.0, seed: int = 0,
              fit_every: int = 25) -> SuiteReport:
    """Randomised verification of all identities; returns worst residuals
    and the triangle on which the overall worst residual occurred."""
    rng = np.random.default_rng(seed)
    r_edge = r_curl = r_beta = r_hier = r_lap = r_div = r_fit = 0.0
    worst_val = -1.0
    worst_pts = None
    for i in range(samples):
        pts = random_triangle(rng, aspect_max)
        p2 = rng.standard_normal((2, 6))
        w2 = rng.standard_normal(6)
        sample_res = [check_edge_expansion(pts, p2, w2)]
        r_edge = max(r_edge, sample_res[0])
        rc, rb, rd = check_curl_representation(pts, p2)
        r_curl, r_beta, r_div = max(r_curl, rc), max(r_beta, rb), max(r_div, rd)
        sample_res += [rc, rb, rd]
        ra, rl = check_hierarchical_identities(pts, w2)
        r_hier, r_lap = max(r_hier, ra), max(r_lap, rl)
        sample_res += [ra, rl]
        if fit_every and i % fit_every == 0:
            geom = standalone_geometry(pts)
            mu_fit = fit_edge_operator(pts)
            mu_closed = edge_coefficients(geom).mu
            h = geom.circumdiameter
            rf = np.abs(mu_fit - mu_closed).max() / h**4
            r_fit = max(r_fit, rf)
            sample_res.append(rf)
        if max(sample_res) > worst_val:
            worst_val = max(sample_res)
            worst_pts = pts.copy()
    return SuiteReport(
        samples=samples,
        aspect_max=aspect_max,
        max_edge_expansion=r_edge,
        max_curl_residual=r_curl,
        max_beta_spread=r_beta,
        max_hierarchy=r_hier,
        max_laplacian=r_lap,
        max_div_residual=r_div,
        max_fit_mismatch=r_fit,
        worst_triangle=worst_pts,
    )
