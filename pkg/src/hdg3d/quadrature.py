"""Quadrature rules on the reference tetrahedron and triangle.

Rules are collapsed-coordinate (Duffy) products of Gauss-Jacobi rules, so
they exist for any exactness degree and always have positive weights.
Weights are normalized to sum to one; the reference measures 1/6 and 1/2
are applied where the rule is used.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

__all__ = [
    "MAX_DEGREE",
    "TetRule",
    "TriRule",
    "BoundaryPoints",
    "tet_rule",
    "tri_rule",
    "boundary_points",
]

MAX_DEGREE = 80


@dataclass(frozen=True)
class TetRule:
    """Volume rule: ``int_Khat phi ~ (1/6) * sum(weights * phi(points))``."""

    bary: np.ndarray  # (Nnd, 4), columns (1-x-y-z, x, y, z)
    weights: np.ndarray  # (Nnd,), sums to 1
    exactness: int

    @property
    def points(self) -> np.ndarray:
        return self.bary[:, 1:]

    def __len__(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class TriRule:
    """Surface rule: ``int_Khat2 phi ~ (1/2) * sum(weights * phi(points))``."""

    bary: np.ndarray  # (Nqd, 3), columns (1-s-t, s, t)
    weights: np.ndarray
    exactness: int

    @property
    def points(self) -> np.ndarray:
        return self.bary[:, 1:]

    def __len__(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class BoundaryPoints:
    """Images of the triangle points on the four faces of the reference tet."""

    faces: tuple  # four (Nqd, 3) arrays, local face order

    def __getitem__(self, ell: int) -> np.ndarray:
        return self.faces[ell]


def _check_degree(degree: int) -> None:
    if degree < 0:
        raise ValueError(f"quadrature degree must be >= 0, got {degree}")
    if degree > MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (max {MAX_DEGREE})")


def _gauss_jacobi01(n: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes on [0, 1] for the weight (1 - v)**alpha, weights summing to 1/(alpha+1)
    x, w = roots_jacobi(n, alpha, 0)
    return (1.0 + x) / 2.0, w / 2.0 ** (alpha + 1)


def tet_rule(degree: int) -> TetRule:
    """Collapsed Gauss-Jacobi rule on the reference tetrahedron exact to `degree`."""
    _check_degree(degree)
    n = degree // 2 + 1
    u, wu = _gauss_jacobi01(n, 0)
    v, wv = _gauss_jacobi01(n, 1)
    w, ww = _gauss_jacobi01(n, 2)
    U, V, W = np.meshgrid(u, v, w, indexing="ij")
    weights = np.einsum("i,j,k->ijk", wu, wv, ww).ravel() * 6.0
    z = W.ravel()
    y = (V * (1.0 - W)).ravel()
    x = (U * (1.0 - V) * (1.0 - W)).ravel()
    bary = np.column_stack([1.0 - x - y - z, x, y, z])
    return TetRule(bary=bary, weights=weights, exactness=degree)


def tri_rule(degree: int) -> TriRule:
    """Collapsed Gauss-Jacobi rule on the reference triangle exact to `degree`."""
    _check_degree(degree)
    n = degree // 2 + 1
    u, wu = _gauss_jacobi01(n, 0)
    v, wv = _gauss_jacobi01(n, 1)
    U, V = np.meshgrid(u, v, indexing="ij")
    weights = np.outer(wu, wv).ravel() * 2.0
    t = V.ravel()
    s = (U * (1.0 - V)).ravel()
    bary = np.column_stack([1.0 - s - t, s, t])
    return TriRule(bary=bary, weights=weights, exactness=degree)


def boundary_points(tri: TriRule) -> BoundaryPoints:
    s, t = tri.points[:, 0], tri.points[:, 1]
    zero = np.zeros_like(s)
    return BoundaryPoints(
        faces=(
            np.column_stack([s, t, zero]),
            np.column_stack([s, zero, t]),
            np.column_stack([zero, s, t]),
            np.column_stack([s, t, 1.0 - s - t]),
        )
    )
