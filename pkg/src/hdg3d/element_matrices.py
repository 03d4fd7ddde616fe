"""Batched element matrices for the HDG local problems.

Every batch is stored element-first: matrices as ``(Nelt, rows, cols)`` and
vectors as ``(Nelt, n)``. Integrands are evaluated at all quadrature nodes of
all elements at once and contracted against precomputed reference tables;
no kernel loops over elements.

Coefficient fields are callables ``f(X, Y, Z)`` returning an array of the
same shape as the inputs, or plain numbers for constants.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisTables
from .mesh import ExpandedMesh, piola

__all__ = [
    "evaluate",
    "StabilizationField",
    "ElementMatrices",
    "quad_points_physical",
    "face_quad_points",
    "skeleton_quad_points",
    "source_vectors",
    "mass_matrices",
    "reference_convection",
    "convection_matrices",
    "type_a",
    "type_b",
    "type_c",
    "faces_block_diagonal",
    "variable_surface_matrices",
    "variable_convection_matrices",
    "stiffness_matrices",
    "build_element_matrices",
]


def evaluate(field, X, Y, Z) -> np.ndarray:
    """Evaluate a coefficient field (callable or constant) on point arrays."""
    if callable(field):
        out = np.asarray(field(X, Y, Z), dtype=float)
        return np.broadcast_to(out, np.shape(X))
    return np.full(np.shape(X), float(field))


@dataclass(frozen=True)
class StabilizationField:
    """Per-element, per-local-face stabilization values tau >= 0."""

    tau: np.ndarray  # (Nelt, 4)
    scaled: np.ndarray  # tau * |e|, (Nelt, 4)

    @classmethod
    def from_values(cls, em: ExpandedMesh, tau, allow_zero: bool = False) -> "StabilizationField":
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (em.nelt, 4)).copy()
        if np.any(tau < 0):
            raise ValueError("stabilization values must be non-negative")
        if not allow_zero and np.any(tau.max(axis=1) <= 0):
            K = int(np.flatnonzero(tau.max(axis=1) <= 0)[0])
            raise ValueError(f"stabilization vanishes on every face of element {K}")
        return cls(tau=tau, scaled=tau * em.element_areas)


def quad_points_physical(em: ExpandedMesh, tables: BasisTables):
    """Physical volume quadrature points, three (Nelt, Nnd) arrays."""
    V = em.coordinates[em.elements]  # (Nelt, 4, 3)
    pts = np.einsum("qv,Kvd->dKq", tables.tet.bary, V)
    return pts[0], pts[1], pts[2]


def face_quad_points(em: ExpandedMesh, tables: BasisTables):
    """Physical surface points F_K(q_r^l), three (Nelt, 4, Nqd) arrays."""
    s, t = tables.tri.points[:, 0], tables.tri.points[:, 1]
    zero = np.zeros_like(s)
    ref = np.stack(
        [
            np.column_stack([s, t, zero]),
            np.column_stack([s, zero, t]),
            np.column_stack([zero, s, t]),
            np.column_stack([s, t, 1 - s - t]),
        ]
    )
    bary = np.concatenate([1.0 - ref.sum(axis=2, keepdims=True), ref], axis=2)  # (4, Nqd, 4)
    V = em.coordinates[em.elements]
    pts = np.einsum("lrv,Kvd->dKlr", bary, V)
    return pts[0], pts[1], pts[2]


def skeleton_quad_points(em: ExpandedMesh, tables: BasisTables, faces=None):
    """Points phi_e(q_r) on global faces, three (nfaces, Nqd) arrays."""
    faces = np.arange(em.nfc) if faces is None else np.asarray(faces)
    W = em.coordinates[em.faces[faces]]  # (n, 3, 3)
    pts = np.einsum("rv,evd->der", tables.tri.bary, W)
    return pts[0], pts[1], pts[2]


def source_vectors(em: ExpandedMesh, tables: BasisTables, f) -> np.ndarray:
    """Tests of `f` against the element basis, (Nelt, d3)."""
    X, Y, Z = quad_points_physical(em, tables)
    fx = evaluate(f, X, Y, Z) * tables.tet.weights
    return em.volume[:, None] * (fx @ tables.P)


def _node_products(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # row q holds the flattened outer product A[q] B[q]^T
    return (A[:, :, None] * B[:, None, :]).reshape(len(A), -1)


def mass_matrices(em: ExpandedMesh, tables: BasisTables, m) -> np.ndarray:
    """``int_K m P_i P_j`` for all elements, (Nelt, d3, d3)."""
    X, Y, Z = quad_points_physical(em, tables)
    M = em.volume[:, None] * evaluate(m, X, Y, Z)
    d = tables.d3
    ref = tables.tet.weights[:, None] * _node_products(tables.P, tables.P)
    return (M @ ref).reshape(-1, d, d)


def reference_convection(tables: BasisTables) -> np.ndarray:
    """``Chat[h]_ij = int_Khat P_i d_h P_j`` on the reference tet, (3, d3, d3)."""
    wp = tables.tet.weights[:, None] * tables.P
    return np.stack([wp.T @ G for G in (tables.Px, tables.Py, tables.Pz)]) / 6.0


def convection_matrices(em: ExpandedMesh, tables: BasisTables):
    """``int_K P_i d_s P_j`` for s = x, y, z; three (Nelt, d3, d3) arrays."""
    a = piola(em.coordinates, em.elements)
    C = np.einsum("Ksh,hij->sKij", a, reference_convection(tables))
    return C[0], C[1], C[2]


def type_a(em: ExpandedMesh, tables: BasisTables, xi) -> np.ndarray:
    """``sum_l xi_l sum_r P_i(q_r^l) w_r P_j(q_r^l)``, (Nelt, d3, d3)."""
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (em.nelt, 4))
    w = tables.tri.weights
    ref = np.einsum("lri,r,lrj->lij", tables.Pface, w, tables.Pface)
    return np.einsum("Kl,lij->Kij", xi, ref)


def type_b(em: ExpandedMesh, tables: BasisTables, xi) -> np.ndarray:
    """Face blocks ``xi_l sum_r w_r D_i D_j``, (Nelt, 4, d2, d2)."""
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (em.nelt, 4))
    ref = (tables.tri.weights[:, None] * tables.D).T @ tables.D
    return xi[:, :, None, None] * ref


def faces_block_diagonal(blocks: np.ndarray) -> np.ndarray:
    """Stack (Nelt, 4, d2, d2) face blocks into (Nelt, 4 d2, 4 d2)."""
    nelt, _, d2, _ = blocks.shape
    out = np.zeros((nelt, 4 * d2, 4 * d2))
    for ell in range(4):
        out[:, ell * d2:(ell + 1) * d2, ell * d2:(ell + 1) * d2] = blocks[:, ell]
    return out


def type_c(em: ExpandedMesh, tables: BasisTables, xi) -> np.ndarray:
    """``xi_l sum_r D_i(F_perm(q_r)) w_r P_j(q_r^l)``, stacked to (Nelt, 4 d2, d3)."""
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (em.nelt, 4))
    w = tables.tri.weights
    ref = np.einsum("mri,r,lrj->mlij", tables.Dperm, w, tables.Pface)  # (6, 4, d2, d3)
    out = xi[:, :, None, None] * ref[em.perm.astype(np.intp) - 1, np.arange(4)[None, :]]
    return out.reshape(em.nelt, 4 * tables.d2, tables.d3)


def variable_surface_matrices(em: ExpandedMesh, tables: BasisTables, alpha, xi):
    """Surface matrices with a variable weight sampled at the face points.

    Returns ``(DP, DD)``: DP is (Nelt, 4 d2, d3) with face blocks
    ``(xi_l/|e_l|) int_e alpha D_i P_j``; DD is (Nelt, 4 d2, 4 d2), block
    diagonal, with ``(xi_l/|e_l|) int_e alpha D_i D_j``. `alpha` is a field or
    an array of shape (Nelt, 4, Nqd).
    """
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (em.nelt, 4))
    if isinstance(alpha, np.ndarray) and alpha.ndim == 3:
        al = alpha
    else:
        al = evaluate(alpha, *face_quad_points(em, tables))
    wa = xi[:, :, None] * al * tables.tri.weights  # (Nelt, 4, Nqd)
    Dm = tables.Dperm[em.perm.astype(np.intp) - 1]  # (Nelt, 4, Nqd, d2)
    DP = np.einsum("Klr,Klri,lrj->Klij", wa, Dm, tables.Pface, optimize=True)
    DD = np.einsum("Klr,Klri,Klrj->Klij", wa, Dm, Dm, optimize=True)
    return DP.reshape(em.nelt, 4 * tables.d2, tables.d3), faces_block_diagonal(DD)


def variable_convection_matrices(em: ExpandedMesh, tables: BasisTables, m):
    """``int_K m P_i d_s P_j`` for s = x, y, z; three (Nelt, d3, d3) arrays."""
    X, Y, Z = quad_points_physical(em, tables)
    mw = evaluate(m, X, Y, Z) * tables.tet.weights
    d = tables.d3
    ref = np.stack(
        [mw @ _node_products(tables.P, G) for G in (tables.Px, tables.Py, tables.Pz)]
    ).reshape(3, em.nelt, d, d)
    a = piola(em.coordinates, em.elements)
    C = np.einsum("Ksh,hKij->sKij", a, ref) / 6.0
    return C[0], C[1], C[2]


def stiffness_matrices(em: ExpandedMesh, tables: BasisTables) -> np.ndarray:
    """``int_K grad P_i . grad P_j``, (Nelt, d3, d3), at the degree of `tables`."""
    w = tables.tet.weights[:, None]
    G = (tables.Px, tables.Py, tables.Pz)
    ref = np.stack([[(w * Gh).T @ Gg for Gg in G] for Gh in G]) / 6.0  # (3, 3, d, d)
    a = piola(em.coordinates, em.elements)
    metric = np.einsum("Ksh,Ksg->Khg", a, a) / (6.0 * em.volume)[:, None, None]
    return np.einsum("Khg,hgij->Kij", metric, ref)


@dataclass(frozen=True)
class ElementMatrices:
    Mkinv: np.ndarray
    Mc: np.ndarray
    Cx: np.ndarray
    Cy: np.ndarray
    Cz: np.ndarray
    tauPP: np.ndarray
    tauDP: np.ndarray
    nxDP: np.ndarray
    nyDP: np.ndarray
    nzDP: np.ndarray
    tauDD: np.ndarray
    fvec: np.ndarray

    @property
    def d3(self) -> int:
        return self.Mc.shape[1]

    @property
    def d2(self) -> int:
        return self.tauDD.shape[1] // 4


def build_element_matrices(em: ExpandedMesh, tables: BasisTables, kappa, c, f,
                           tau: StabilizationField) -> ElementMatrices:
    """All volume and surface matrices needed by the reaction-diffusion local solvers."""
    if callable(kappa):
        kinv = lambda X, Y, Z: 1.0 / np.asarray(kappa(X, Y, Z), dtype=float)  # noqa: E731
    else:
        kinv = 1.0 / float(kappa)
    Cx, Cy, Cz = convection_matrices(em, tables)
    n = em.normals
    return ElementMatrices(
        Mkinv=mass_matrices(em, tables, kinv),
        Mc=mass_matrices(em, tables, c),
        Cx=Cx,
        Cy=Cy,
        Cz=Cz,
        tauPP=type_a(em, tables, tau.scaled),
        tauDP=type_c(em, tables, tau.scaled),
        nxDP=type_c(em, tables, n[..., 0]),
        nyDP=type_c(em, tables, n[..., 1]),
        nzDP=type_c(em, tables, n[..., 2]),
        tauDD=faces_block_diagonal(type_b(em, tables, tau.scaled)),
        fvec=source_vectors(em, tables, f),
    )
