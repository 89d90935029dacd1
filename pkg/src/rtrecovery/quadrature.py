"""Numerical integration on edges and triangles.

Edge rules are Gauss-Legendre on the unit interval [0, 1].  Triangle rules are
conical-product rules built from Gauss-Jacobi x Gauss-Legendre tensor grids on
the collapsed square; they are exact for all polynomials up to the declared
total degree and have strictly positive weights.  Points are returned in
barycentric coordinates with weights normalised to sum to one, so that

    integral_T f = |T| * sum_q w_q f(x_q),   x_q = sum_k lambda_qk z_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_TRIANGLE_DEGREE = 20
MAX_EDGE_POINTS = 6


@dataclass(frozen=True)
class QuadratureRule:
    """Triangle rule: barycentric points (n, 3), weights (n,) summing to 1."""

    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def npoints(self) -> int:
        return self.points.shape[0]


@lru_cache(maxsize=None)
def edge_gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule with n points on [0, 1].

    Returns (nodes, weights); nodes ascending, weights sum to 1.  Exact for
    polynomials of degree <= 2n - 1.
    """
    if not 1 <= n <= MAX_EDGE_POINTS:
        raise ValueError(f"edge rule size {n} outside supported range 1..{MAX_EDGE_POINTS}")
    x, w = np.polynomial.legendre.leggauss(n)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    order = np.argsort(nodes)
    return nodes[order], weights[order]


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Quadrature rule on the triangle exact for total degree <= degree."""
    if not 1 <= degree <= MAX_TRIANGLE_DEGREE:
        raise ValueError(f"triangle rule degree {degree} outside 1..{MAX_TRIANGLE_DEGREE}")
    n = (degree + 2) // 2  # ceil((degree + 1) / 2)
    # xi direction carries the collapsed Jacobian (1 - xi): Gauss-Jacobi(1, 0).
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xi = 0.5 * (xj + 1.0)
    wxi = 0.25 * wj  # absorbs both the affine map and the (1 - xi) scaling
    xl, wl = np.polynomial.legendre.leggauss(n)
    eta = 0.5 * (xl + 1.0)
    weta = 0.5 * wl

    x = np.repeat(xi, n)
    y = np.tile(eta, n) * (1.0 - x)
    w = np.repeat(wxi, n) * np.tile(weta, n)
    w = w / w.sum()  # exact sum is 1/2 (reference area); renormalise to 1
    bary = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(degree=degree, points=bary, weights=w)


def map_to_physical(rule: QuadratureRule, tri_pts: np.ndarray) -> np.ndarray:
    """Map barycentric rule points to physical coordinates.

    tri_pts has shape (3, 2) or batched (nelem, 3, 2); result (n, 2) or
    (nelem, n, 2).
    """
    if tri_pts.ndim == 2:
        return rule.points @ tri_pts
    return np.einsum("qk,ekd->eqd", rule.points, tri_pts)


def integrate_triangle(f, tri_pts: np.ndarray, degree: int) -> float:
    """Integrate callable f((n,2) points) -> (n,) over one triangle."""
    rule = triangle_rule(degree)
    pts = map_to_physical(rule, tri_pts)
    area = triangle_area(tri_pts)
    return float(area * np.dot(rule.weights, np.asarray(f(pts))))


def triangle_area(tri_pts: np.ndarray) -> float:
    v1 = tri_pts[1] - tri_pts[0]
    v2 = tri_pts[2] - tri_pts[0]
    return 0.5 * abs(v1[0] * v2[1] - v1[1] * v2[0])


def bary_monomial_integral(m1: int, m2: int, m3: int, area: float = 1.0) -> float:
    """Exact integral of lambda1^m1 lambda2^m2 lambda3^m3 over a triangle.

    Equals 2 |T| m1! m2! m3! / (m1 + m2 + m3 + 2)!.
    """
    num = 2.0 * math.factorial(m1) * math.factorial(m2) * math.factorial(m3)
    return area * num / math.factorial(m1 + m2 + m3 + 2)


def edge_monomial_integral(m1: int, m2: int, length: float = 1.0) -> float:
    """Exact integral of lambda1^m1 lambda2^m2 over an edge of given length."""
    num = math.factorial(m1) * math.factorial(m2)
    return length * num / math.factorial(m1 + m2 + 1)
