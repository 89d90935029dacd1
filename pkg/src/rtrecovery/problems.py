"""Reference problems for the convergence experiments.

Problems 1 and 2 share a smooth exact solution of Poisson's equation on the
unit square (Problem 2 is the same setup run at higher element orders).
Problem 3 poses Poisson's equation on the square [-1, 1]^2 with a thin
triangular slit removed; the exact solution has the leading corner
singularity r^gamma with gamma = pi / (2 pi - omega) for the reentrant angle
2 pi - omega at the origin, which limits uniform-refinement convergence and
motivates the adaptive loop.
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, slit_square_mesh, unit_square_mesh
from .solver import ProblemSpec

SLIT_ANGLE = np.pi / 24.0


def _ones(x: np.ndarray) -> np.ndarray:
    return np.ones(x.shape[:-1])


def _smooth_u(x: np.ndarray) -> np.ndarray:
    X, Y = x[..., 0], x[..., 1]
    return np.exp(X + Y) * np.sin(2 * np.pi * X) * np.sin(np.pi * Y)


def _smooth_p(x: np.ndarray) -> np.ndarray:
    X, Y = x[..., 0], x[..., 1]
    e = np.exp(X + Y)
    px = e * (np.sin(2 * np.pi * X) + 2 * np.pi * np.cos(2 * np.pi * X)) * np.sin(np.pi * Y)
    py = e * np.sin(2 * np.pi * X) * (np.sin(np.pi * Y) + np.pi * np.cos(np.pi * Y))
    return np.stack([px, py], axis=-1)


def _smooth_div_p(x: np.ndarray) -> np.ndarray:
    X, Y = x[..., 0], x[..., 1]
    e = np.exp(X + Y)
    s2, c2 = np.sin(2 * np.pi * X), np.cos(2 * np.pi * X)
    s1, c1 = np.sin(np.pi * Y), np.cos(np.pi * Y)
    uxx = e * (s2 + 4 * np.pi * c2 - 4 * np.pi**2 * s2) * s1
    uyy = e * s2 * (s1 + 2 * np.pi * c1 - np.pi**2 * s1)
    return uxx + uyy


def _smooth_f(x: np.ndarray) -> np.ndarray:
    return -_smooth_div_p(x)


def smooth_square_problem() -> ProblemSpec:
    return ProblemSpec(
        name="smooth-square",
        a=_ones,
        f=_smooth_f,
        g=_smooth_u,
        exact_u=_smooth_u,
        exact_p=_smooth_p,
        exact_div_p=_smooth_div_p,
    )


# -- slit square --------------------------------------------------------------

_GAMMA = np.pi / (2 * np.pi - SLIT_ANGLE)


_BRANCH_TOL = 1e-9


def _polar(x: np.ndarray):
    """Polar coordinates with the angle measured from the upper slit edge,
    so theta' runs over (0, 2 pi - omega) inside the domain.

    The branch cut sits strictly inside the removed sliver: points whose
    angle rounds to a hair below the upper edge must stay on the upper
    branch, otherwise boundary data on that edge picks up an O(1) jump.
    """
    X, Y = x[..., 0], x[..., 1]
    r = np.hypot(X, Y)
    th = np.arctan2(Y, X)
    th = np.where(th < SLIT_ANGLE - _BRANCH_TOL, th + 2 * np.pi, th)
    return r, th - SLIT_ANGLE


def _slit_u(x: np.ndarray) -> np.ndarray:
    r, tp = _polar(x)
    rg = np.where(r > 0, r**_GAMMA, 0.0)
    return rg * np.sin(_GAMMA * tp) - 0.25 * r**2


def _slit_p(x: np.ndarray) -> np.ndarray:
    r, tp = _polar(x)
    safe = np.where(r > 0, r, 1.0)
    rad = np.where(r > 0, _GAMMA * safe ** (_GAMMA - 1.0), 0.0)
    th = tp + SLIT_ANGLE  # angle in the fixed frame
    er = np.stack([np.cos(th), np.sin(th)], axis=-1)
    et = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    sing = rad[..., None] * (np.sin(_GAMMA * tp)[..., None] * er
                             + np.cos(_GAMMA * tp)[..., None] * et)
    return sing - 0.5 * x


def _slit_div_p(x: np.ndarray) -> np.ndarray:
    return -np.ones(x.shape[:-1])


def slit_square_problem() -> ProblemSpec:
    return ProblemSpec(
        name="slit-square",
        a=_ones,
        f=_ones,
        g=_slit_u,
        exact_u=_slit_u,
        exact_p=_slit_p,
        exact_div_p=_slit_div_p,
    )


def get_problem(pid: int) -> ProblemSpec:
    if pid in (1, 2):
        return smooth_square_problem()
    if pid == 3:
        return slit_square_problem()
    raise ValueError(f"unknown problem id {pid}")


def initial_mesh(pid: int, target_nt: int = 86, seed: int = 0) -> Mesh:
    if pid in (1, 2):
        return unit_square_mesh(target_nt, seed=seed)
    if pid == 3:
        return slit_square_mesh(initial_nt=target_nt)
    raise ValueError(f"unknown problem id {pid}")
