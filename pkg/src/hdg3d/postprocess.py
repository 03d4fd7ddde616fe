"""Local postprocessing, projections, error functionals and convergence rates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import BasisFamily, BasisTables, build_tables, dim3
from .element_matrices import (
    ElementMatrices,
    evaluate,
    face_quad_points,
    mass_matrices,
    quad_points_physical,
    skeleton_quad_points,
    StabilizationField,
    stiffness_matrices,
    type_c,
    variable_convection_matrices,
)
from .global_system import face_l2_coefficients
from .local_solver import SingularElementError
from .mesh import ExpandedMesh
from .quadrature import tet_rule, tri_rule

__all__ = [
    "postprocess_star",
    "l2_project_volume",
    "l2_project_skeleton",
    "hdg_project",
    "ErrorReport",
    "errors",
    "error_quad_degree",
    "rates",
    "p_ratios",
]


def _vector_field(q, X, Y, Z):
    return [np.broadcast_to(np.asarray(v, dtype=float), np.shape(X)) for v in q(X, Y, Z)]


def postprocess_star(em: ExpandedMesh, tables_kp1: BasisTables, q: np.ndarray, u: np.ndarray, kappa) -> np.ndarray:
    """Element-by-element degree k+1 reconstruction u* from (q_h, u_h).

    Solves ``(grad u*, grad w)_K = -(kappa^-1 q_h, grad w)_K`` with the
    constant-mode row replaced by ``mean(u*) = mean(u_h)``. q is (Nelt, 3, d3(k)),
    u is (Nelt, d3(k)); returns (Nelt, d3(k+1)).
    """
    dk = q.shape[2]
    if dim3(tables_kp1.k - 1) != dk:
        raise ValueError("tables must be one degree above the solution degree")
    if callable(kappa):
        kinv = lambda X, Y, Z: 1.0 / np.asarray(kappa(X, Y, Z), dtype=float)  # noqa: E731
    else:
        kinv = 1.0 / float(kappa)
    S = stiffness_matrices(em, tables_kp1)
    Cv = variable_convection_matrices(em, tables_kp1, kinv)
    rhs = -sum(np.einsum("Ka,Kab->Kb", q[:, s], Cv[s][:, :dk, :]) for s in range(3))
    wP = tables_kp1.tet.weights @ tables_kp1.P  # reference means, times 1 (vol cancels)
    S[:, 0, :] = wP[None, :]
    rhs[:, 0] = u @ wP[: u.shape[1]]
    try:
        return np.linalg.solve(S, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        raise SingularElementError(-1, 0.0) from None


def l2_project_volume(em: ExpandedMesh, tables: BasisTables, f) -> np.ndarray:
    """Elementwise L2 projection onto P_k, (Nelt, d3)."""
    X, Y, Z = quad_points_physical(em, tables)
    wP = tables.tet.weights[:, None] * tables.P
    gram = wP.T @ tables.P
    return np.linalg.solve(gram, (evaluate(f, X, Y, Z) @ wP).T).T


def l2_project_skeleton(em: ExpandedMesh, tables: BasisTables, f) -> np.ndarray:
    """Facewise L2 projection onto P_k(e) for every face, (Nfc, d2)."""
    return face_l2_coefficients(em, tables, f)


def hdg_project(em: ExpandedMesh, elmats: ElementMatrices | None, tables: BasisTables,
                tau: StabilizationField, q, u):
    """HDG projection of a vector field `q` and scalar field `u`.

    Returns ``(Pi_q, Pi_u)`` with shapes (Nelt, 3, d3) and (Nelt, d3).
    `elmats` must carry the normal and tau surface matrices for the same tau
    and tables; with ``None`` they are built here from `tables`.
    """
    d3, d2, nelt = tables.d3, tables.d2, em.nelt
    if elmats is None:
        surf = [type_c(em, tables, em.normals[..., s]) for s in range(3)]
        surf.append(type_c(em, tables, tau.scaled))
    else:
        surf = [elmats.nxDP, elmats.nyDP, elmats.nzDP, elmats.tauDP]
    nv = d3 - d2
    A = np.zeros((nelt, 4 * d3, 4 * d3))
    rhs = np.zeros((nelt, 4 * d3))
    if nv:
        M = mass_matrices(em, tables, 1.0)[:, :nv, :]
        X, Y, Z = quad_points_physical(em, tables)
        wP = tables.tet.weights[:, None] * tables.P[:, :nv]
        comps = _vector_field(q, X, Y, Z) + [evaluate(u, X, Y, Z)]
        for s in range(4):
            A[:, s * nv:(s + 1) * nv, s * d3:(s + 1) * d3] = M
            rhs[:, s * nv:(s + 1) * nv] = em.volume[:, None] * (comps[s] @ wP)
    A[:, 4 * nv:, :] = np.concatenate(surf, axis=2)
    Xf, Yf, Zf = face_quad_points(em, tables)
    qx, qy, qz = _vector_field(q, Xf, Yf, Zf)
    n = em.normals
    flux = (qx * n[..., 0:1] + qy * n[..., 1:2] + qz * n[..., 2:3]
            + tau.scaled[..., None] * evaluate(u, Xf, Yf, Zf))  # (Nelt, 4, Nqd)
    Dm = tables.Dperm[em.perm.astype(np.intp) - 1]
    rhs[:, 4 * nv:] = np.einsum("Klr,r,Klri->Kli", flux, tables.tri.weights, Dm).reshape(nelt, -1)
    try:
        x = np.linalg.solve(A, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        for K in range(nelt):
            if np.linalg.matrix_rank(A[K]) < 4 * d3:
                raise SingularElementError(K, 0.0) from None
        raise
    return x[:, :3 * d3].reshape(nelt, 3, d3), x[:, 3 * d3:]


@dataclass(frozen=True)
class ErrorReport:
    """Relative errors; a zero exact norm turns the matching entry absolute."""

    e_q: float
    e_u: float
    e_uhat: float
    eps_u: float
    eps_uhat: float
    e_star: float

    def as_tuple(self):
        return (self.e_q, self.e_u, self.e_uhat, self.eps_u, self.eps_uhat, self.e_star)


def _ratio(num: float, den: float) -> float:
    if not np.isfinite(num) or not np.isfinite(den):
        raise ValueError("non-finite error norm")
    return math.sqrt(num / den) if den > 1e-28 else math.sqrt(num)


ERROR_QUAD_EXTRA = 8
_CHUNK = 1024


def error_quad_degree(k: int) -> int:
    """Default exactness of the error rules, well above the solver's 2k+2."""
    return 2 * k + 4 + ERROR_QUAD_EXTRA


def errors(em: ExpandedMesh, k: int, u_exact, q_exact, q: np.ndarray, u: np.ndarray,
           uhat: np.ndarray, u_star: np.ndarray, Pi_u: np.ndarray, P_uhat: np.ndarray,
           quad_degree: int | None = None) -> ErrorReport:
    """Volume and skeleton error norms on fresh rules (degree 2k+12 by default).

    Skeleton norms use ``||v||_h^2 = sum_e |e| ||v||_e^2``. Sums are
    accumulated over element and face chunks in a fixed order.
    """
    deg = error_quad_degree(k) if quad_degree is None else quad_degree
    tab = build_tables(BasisFamily(k + 1), tet_rule(deg), tri_rule(deg))
    V = em.coordinates[em.elements]
    # the BDM scalar unknown lives one degree lower, hence slicing by width
    Pu, Pq = tab.P[:, : u.shape[1]], tab.P[:, : q.shape[2]]
    PPi = tab.P[:, : Pi_u.shape[1]]
    vol = np.zeros(6)  # |q|^2, |u|^2, |q-qh|^2, |u-uh|^2, |Pi u-uh|^2, |u-u*|^2
    for start in range(0, em.nelt, _CHUNK):
        sl = slice(start, min(start + _CHUNK, em.nelt))
        X, Y, Z = np.einsum("qv,Kvd->dKq", tab.tet.bary, V[sl])
        wv = em.volume[sl, None] * tab.tet.weights
        ue = evaluate(u_exact, X, Y, Z)
        qe = _vector_field(q_exact, X, Y, Z)
        uh = u[sl] @ Pu.T
        vol += [
            sum(np.sum(wv * c**2) for c in qe),
            np.sum(wv * ue**2),
            sum(np.sum(wv * (c - q[sl, s] @ Pq.T) ** 2) for s, c in enumerate(qe)),
            np.sum(wv * (ue - uh) ** 2),
            np.sum(wv * (Pi_u[sl] @ PPi.T - uh) ** 2),
            np.sum(wv * (ue - u_star[sl] @ tab.P.T) ** 2),
        ]

    D = tab.D[:, : uhat.shape[1]]
    skel = np.zeros(3)  # |u|_h^2, |u-uhat|_h^2, |Pu-uhat|_h^2
    for start in range(0, em.nfc, _CHUNK):
        faces = np.arange(start, min(start + _CHUNK, em.nfc))
        Xs, Ys, Zs = skeleton_quad_points(em, tab, faces)
        ws = (em.area[faces] ** 2)[:, None] * tab.tri.weights
        us = evaluate(u_exact, Xs, Ys, Zs)
        uhat_h = uhat[faces] @ D.T
        skel += [
            np.sum(ws * us**2),
            np.sum(ws * (us - uhat_h) ** 2),
            np.sum(ws * (P_uhat[faces] @ D.T - uhat_h) ** 2),
        ]

    nrm_q, nrm_u = vol[0], vol[1]
    return ErrorReport(
        e_q=_ratio(vol[2], nrm_q),
        e_u=_ratio(vol[3], nrm_u),
        e_uhat=_ratio(skel[1], skel[0]),
        eps_u=_ratio(vol[4], nrm_u),
        eps_uhat=_ratio(skel[2], skel[0]),
        e_star=_ratio(vol[5], nrm_u),
    )


def rates(errs) -> np.ndarray:
    """Estimated convergence rates ``log2(e_h / e_{h/2})`` between levels."""
    e = np.asarray(errs, dtype=float)
    if np.any(e <= 0):
        raise ValueError("rates need positive errors")
    return np.log2(e[:-1] / e[1:])


def p_ratios(errs) -> np.ndarray:
    """``log(e_k/e_{k+1}) / log(e_{k+1}/e_{k+2})`` for a degree sweep."""
    e = np.asarray(errs, dtype=float)
    if np.any(e <= 0):
        raise ValueError("ratios need positive errors")
    r = np.log(e[:-1] / e[1:])
    return r[:-1] / r[1:]
