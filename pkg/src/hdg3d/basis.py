"""Orthonormal Dubiner bases on the reference tetrahedron and triangle.

The collapsed-coordinate Jacobi factors are evaluated through recurrences
that are homogenized by the collapsing factor, so every quantity is a
polynomial in the reference coordinates and there is no division at the
singular vertex of the Duffy map.

Functions are ordered hierarchically by total degree and, inside a degree
block, lexicographically in the index tuple ``(p, q, r)`` (resp. ``(p, q)``).
Each function is normalized to unit L2 norm on the reference simplex itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .quadrature import TetRule, TriRule, boundary_points

__all__ = [
    "dim3",
    "dim2",
    "BasisFamily",
    "BasisTables",
    "dubiner3d_indices",
    "dubiner2d_indices",
    "eval_dubiner3d",
    "eval_dubiner3d_grad",
    "eval_dubiner2d",
    "face_maps",
    "FACE_MAP_VERTEX_TABLE",
    "build_tables",
]

# images of the reference triangle vertices (w1, w2, w3) under F_1..F_6, 1-based
FACE_MAP_VERTEX_TABLE = np.array(
    [[1, 2, 3], [1, 3, 2], [3, 1, 2], [3, 2, 1], [2, 3, 1], [2, 1, 3]]
)


def dim3(k: int) -> int:
    return comb(k + 3, 3)


def dim2(k: int) -> int:
    return comb(k + 2, 2)


def dubiner3d_indices(k: int) -> list[tuple[int, int, int]]:
    return [
        (p, q, n - p - q)
        for n in range(k + 1)
        for p in range(n + 1)
        for q in range(n - p + 1)
    ]


def dubiner2d_indices(k: int) -> list[tuple[int, int]]:
    return [(p, n - p) for n in range(k + 1) for p in range(n + 1)]


def _scaled_jacobi(n, alpha, xs, s, dxs, ds):
    """Values and gradients of ``s**m * P_m^(alpha,0)(xs/s)`` for m = 0..n.

    `xs` and `s` are affine functions given by their values (npts,) and
    constant gradients (dim,).
    """
    vals = [np.ones_like(xs)]
    grads = [np.zeros(xs.shape + dxs.shape)]
    if n == 0:
        return vals, grads
    vals.append(((alpha + 2) * xs + alpha * s) / 2.0)
    grads.append(np.broadcast_to(((alpha + 2) * dxs + alpha * ds) / 2.0, grads[0].shape).copy())
    s2 = s * s
    for m in range(1, n):
        den = 2.0 * (m + 1) * (m + alpha + 1) * (2 * m + alpha)
        A = (2 * m + alpha + 1) * (2 * m + alpha + 2) * (2 * m + alpha) / den
        B = (2 * m + alpha + 1) * alpha**2 / den
        C = 2.0 * (m + alpha) * m * (2 * m + alpha + 2) / den
        lin = A * xs + B * s
        dlin = A * dxs + B * ds
        vals.append(lin * vals[m] - C * s2 * vals[m - 1])
        grads.append(
            dlin * vals[m][:, None]
            + lin[:, None] * grads[m]
            - C * (2.0 * (s[:, None] * ds) * vals[m - 1][:, None] + s2[:, None] * grads[m - 1])
        )
    return vals, grads


def _dubiner3d(k: int, pts: np.ndarray, want_grad: bool):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    one = np.ones_like(x)
    legendre, dlegendre = _scaled_jacobi(
        k, 0, 2 * x + y + z - 1, 1 - y - z, np.array([2.0, 1.0, 1.0]), np.array([0.0, -1.0, -1.0])
    )
    jac_b = {}
    jac_c = {}
    idx = dubiner3d_indices(k)
    nfun = len(idx)
    out = np.empty((len(x), nfun))
    grad = np.empty((3, len(x), nfun)) if want_grad else None
    for col, (p, q, r) in enumerate(idx):
        if p not in jac_b:
            jac_b[p] = _scaled_jacobi(
                k - p, 2 * p + 1, 2 * y + z - 1, 1 - z,
                np.array([0.0, 2.0, 1.0]), np.array([0.0, 0.0, -1.0]),
            )
        if p + q not in jac_c:
            jac_c[p + q] = _scaled_jacobi(
                k - p - q, 2 * (p + q) + 2, 2 * z - 1, one,
                np.array([0.0, 0.0, 2.0]), np.zeros(3),
            )
        a, da = legendre[p], dlegendre[p]
        b, db = jac_b[p][0][q], jac_b[p][1][q]
        c, dc = jac_c[p + q][0][r], jac_c[p + q][1][r]
        scale = np.sqrt(2.0 * (2 * p + 1) * (p + q + 1) * (2 * (p + q + r) + 3))
        out[:, col] = scale * a * b * c
        if want_grad:
            g = da * (b * c)[:, None] + db * (a * c)[:, None] + dc * (a * b)[:, None]
            grad[:, :, col] = scale * g.T
    return out, grad


def eval_dubiner3d(k: int, pts) -> np.ndarray:
    """Orthonormal Dubiner basis of degree `k` at points of the reference tet.

    Returns an array of shape ``(len(pts), dim3(k))``.
    """
    return _dubiner3d(k, pts, False)[0]


def eval_dubiner3d_grad(k: int, pts):
    """Reference-coordinate partial derivatives ``(dx, dy, dz)`` of the basis."""
    _, grad = _dubiner3d(k, pts, True)
    return grad[0], grad[1], grad[2]


def eval_dubiner2d(k: int, pts) -> np.ndarray:
    """Orthonormal Dubiner basis of degree `k` on the reference triangle."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    s, t = pts[:, 0], pts[:, 1]
    legendre, _ = _scaled_jacobi(
        k, 0, 2 * s + t - 1, 1 - t, np.array([2.0, 1.0]), np.array([0.0, -1.0])
    )
    one = np.ones_like(s)
    idx = dubiner2d_indices(k)
    out = np.empty((len(s), len(idx)))
    jac = {}
    for col, (p, q) in enumerate(idx):
        if p not in jac:
            jac[p] = _scaled_jacobi(
                k - p, 2 * p + 1, 2 * t - 1, one, np.array([0.0, 2.0]), np.zeros(2)
            )[0]
        out[:, col] = np.sqrt(2.0 * (2 * p + 1) * (p + q + 1)) * legendre[p] * jac[p][q]
    return out


def face_maps(pts) -> np.ndarray:
    """Apply the six affine self-maps F_1..F_6 of the reference triangle.

    Returns shape ``(6, len(pts), 2)``; entry ``mu - 1`` holds ``F_mu(pts)``.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    s, t = pts[:, 0], pts[:, 1]
    r = 1.0 - s - t
    return np.stack(
        [
            np.column_stack([s, t]),
            np.column_stack([t, s]),
            np.column_stack([t, r]),
            np.column_stack([s, r]),
            np.column_stack([r, s]),
            np.column_stack([r, t]),
        ]
    )


@dataclass(frozen=True)
class BasisFamily:
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"polynomial degree must be >= 0, got {self.k}")

    @property
    def d3(self) -> int:
        return dim3(self.k)

    @property
    def d2(self) -> int:
        return dim2(self.k)


@dataclass(frozen=True)
class BasisTables:
    """Basis values at the volume and surface quadrature points.

    ``Pface[l]`` holds the volume basis at the image of the triangle points on
    local face ``l``; ``Dperm[mu - 1]`` holds the face basis at ``F_mu`` of the
    triangle points.
    """

    family: BasisFamily
    tet: TetRule
    tri: TriRule
    P: np.ndarray
    Px: np.ndarray
    Py: np.ndarray
    Pz: np.ndarray
    Pface: np.ndarray  # (4, Nqd, d3)
    D: np.ndarray  # (Nqd, d2)
    Dperm: np.ndarray  # (6, Nqd, d2)

    @property
    def k(self) -> int:
        return self.family.k

    @property
    def d3(self) -> int:
        return self.family.d3

    @property
    def d2(self) -> int:
        return self.family.d2


def build_tables(family: BasisFamily, tet: TetRule, tri: TriRule) -> BasisTables:
    k = family.k
    P, grad = _dubiner3d(k, tet.points, True)
    bp = boundary_points(tri)
    Pface = np.stack([eval_dubiner3d(k, bp[ell]) for ell in range(4)])
    D = eval_dubiner2d(k, tri.points)
    Dperm = np.stack([eval_dubiner2d(k, img) for img in face_maps(tri.points)])
    return BasisTables(
        family=family, tet=tet, tri=tri, P=P, Px=grad[0], Py=grad[1], Pz=grad[2],
        Pface=Pface, D=D, Dperm=Dperm,
    )
