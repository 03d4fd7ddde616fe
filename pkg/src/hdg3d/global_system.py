"""Skeleton degrees of freedom, boundary data, sparse assembly and global solve.

Trace coefficients are stored face-first as ``(Nfc, d2)``, so the global dof
of coefficient ``i`` on face ``e`` is ``e * d2 + i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import BasisTables
from .element_matrices import evaluate, skeleton_quad_points
from .local_solver import CondensedOperator, LocalBlocks, local_flux, local_recover
from .mesh import ExpandedMesh

__all__ = [
    "SingularSystemError",
    "DofMap",
    "SkeletonSystem",
    "face_owner",
    "face_l2_coefficients",
    "dirichlet_project",
    "neumann_load",
    "neumann_load_scalar",
    "assemble",
    "solve",
    "reconstruct",
    "flux_residual",
]


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class DofMap:
    nfc: int
    d2: int
    facebyele: np.ndarray

    @classmethod
    def from_mesh(cls, em: ExpandedMesh, d2: int) -> "DofMap":
        return cls(nfc=em.nfc, d2=d2, facebyele=em.facebyele)

    @property
    def size(self) -> int:
        return self.nfc * self.d2

    def face_dofs(self, faces) -> np.ndarray:
        return np.asarray(faces)[..., None] * self.d2 + np.arange(self.d2)

    def element_dofs(self) -> np.ndarray:
        """dof(K) for all elements, (Nelt, 4 d2), faces in local order."""
        return self.face_dofs(self.facebyele).reshape(len(self.facebyele), -1)

    def gather(self, uhat: np.ndarray) -> np.ndarray:
        """Per-element traces (Nelt, 4 d2) from face coefficients (Nfc, d2)."""
        return uhat.reshape(-1)[self.element_dofs()]


@dataclass(frozen=True)
class SkeletonSystem:
    H: sp.csr_matrix
    F: np.ndarray
    GN: np.ndarray
    uD: np.ndarray  # (Ndir, d2)


def face_owner(em: ExpandedMesh):
    """For each face, the lowest-numbered element containing it and its local index."""
    flat = em.facebyele.ravel()
    order = np.argsort(flat, kind="stable")
    first = order[np.searchsorted(flat[order], np.arange(em.nfc))]
    return first // 4, first % 4


def face_l2_coefficients(em: ExpandedMesh, tables: BasisTables, f, faces=None) -> np.ndarray:
    """Face-by-face L2 projection of `f` onto the trace basis, (nfaces, d2)."""
    X, Y, Z = skeleton_quad_points(em, tables, faces)
    wD = tables.tri.weights[:, None] * tables.D
    gram = wD.T @ tables.D
    rhs = evaluate(f, X, Y, Z) @ wD
    return np.linalg.solve(gram, rhs.T).T


def dirichlet_project(em: ExpandedMesh, tables: BasisTables, uD) -> np.ndarray:
    return face_l2_coefficients(em, tables, uD, em.dirfaces)


def _normal_components(g, X, Y, Z):
    if callable(g):
        return [np.broadcast_to(np.asarray(v, dtype=float), X.shape) for v in g(X, Y, Z)]
    return [evaluate(gs, X, Y, Z) for gs in g]


def neumann_load(em: ExpandedMesh, tables: BasisTables, g) -> np.ndarray:
    """``<g . nu, D_i>_e`` on Neumann faces, (Nneu, d2).

    `g` is a callable returning three component arrays, or a triple of fields.
    The outward normal is taken from the adjacent element.
    """
    faces = em.neufaces
    X, Y, Z = skeleton_quad_points(em, tables, faces)
    K, ell = face_owner(em)
    n = em.normals[K[faces], ell[faces]]  # (Nneu, 3), |n| = |e|
    gx, gy, gz = _normal_components(g, X, Y, Z)
    gn = gx * n[:, :1] + gy * n[:, 1:2] + gz * n[:, 2:]
    return gn @ (tables.tri.weights[:, None] * tables.D)


def neumann_load_scalar(em: ExpandedMesh, tables: BasisTables, gN) -> np.ndarray:
    """``<gN, D_i>_e`` on Neumann faces for scalar data ``gN = -q . nu``."""
    faces = em.neufaces
    X, Y, Z = skeleton_quad_points(em, tables, faces)
    vals = evaluate(gN, X, Y, Z) * em.area[faces][:, None]
    return vals @ (tables.tri.weights[:, None] * tables.D)


def assemble(cond: CondensedOperator, dofmap: DofMap, em: ExpandedMesh | None = None,
             phiN: np.ndarray | None = None, uD: np.ndarray | None = None) -> SkeletonSystem:
    """Triplet assembly of the condensed flux operators and their load vectors."""
    dofs = dofmap.element_dofs()
    n = dofs.shape[1]
    rows = np.repeat(dofs, n, axis=1).ravel()
    cols = np.tile(dofs, (1, n)).ravel()
    H = sp.coo_matrix((cond.C.ravel(), (rows, cols)), shape=(dofmap.size, dofmap.size)).tocsr()
    H.sum_duplicates()
    F = np.bincount(dofs.ravel(), weights=cond.Cf.ravel(), minlength=dofmap.size)
    GN = np.zeros(dofmap.size)
    if phiN is not None and len(phiN):
        GN[dofmap.face_dofs(em.neufaces).ravel()] = np.asarray(phiN).ravel()
    if uD is None:
        ndir = 0 if em is None else em.ndir
        uD = np.zeros((ndir, dofmap.d2))
    return SkeletonSystem(H=H, F=F, GN=GN, uD=np.asarray(uD))


def _factor_solve(A: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    A = A.tocsc()
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularSystemError(f"reduced skeleton system is singular ({exc})") from None
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("reduced skeleton system is singular (non-finite solution)")
    res = np.linalg.norm(A @ x - b)
    if res > 1e-6 * max(np.linalg.norm(b), 1e-300):
        # pivoting-free factorization broke down; fall back to partial pivoting
        try:
            x = spla.splu(A, permc_spec="COLAMD").solve(b)
        except RuntimeError as exc:
            raise SingularSystemError(f"reduced skeleton system is singular ({exc})") from None
        res = np.linalg.norm(A @ x - b)
        if not np.isfinite(res) or res > 1e-6 * max(np.linalg.norm(b), 1e-300):
            raise SingularSystemError(f"reduced skeleton system is singular (residual {res:.2e})")
    return x


def _check_constant_kernel(H: sp.csr_matrix, d2: int) -> None:
    # without Dirichlet faces and with c = 0, constant traces lie in the kernel
    v = np.zeros(H.shape[0])
    v[::d2] = 1.0
    Hv = np.linalg.norm(H @ v)
    if Hv <= 1e-10 * abs(H).sum(axis=1).max() * np.linalg.norm(v):
        raise SingularSystemError(
            "skeleton system is singular: no Dirichlet faces and constants are in the kernel "
            "(pure Neumann problem with c = 0)"
        )


def solve(system: SkeletonSystem, em: ExpandedMesh) -> np.ndarray:
    """Eliminate Dirichlet dofs and solve for the free trace coefficients.

    Returns the face coefficients as an (Nfc, d2) array; Dirichlet rows are
    copied from ``system.uD``.
    """
    nfc = em.nfc
    d2 = system.F.size // nfc
    uhat = np.zeros((nfc, d2))
    uhat[em.dirfaces] = system.uD
    is_dir = np.zeros(nfc, dtype=bool)
    is_dir[em.dirfaces] = True
    free = np.flatnonzero(np.repeat(~is_dir, d2))
    fixed = np.flatnonzero(np.repeat(is_dir, d2))
    if free.size == 0:
        return uhat
    if not fixed.size:
        _check_constant_kernel(system.H, d2)
    rhs = (system.F + system.GN)[free]
    if fixed.size:
        rhs = rhs - system.H[free][:, fixed] @ uhat.reshape(-1)[fixed]
    x = _factor_solve(system.H[free][:, free], rhs)
    flat = uhat.reshape(-1)
    flat[free] = x
    return uhat


def reconstruct(blocks: LocalBlocks, uhat: np.ndarray, dofmap: DofMap, threads: int | None = None):
    """Recover (q, u) element by element from the solved traces."""
    return local_recover(blocks, dofmap.gather(uhat), threads)


def flux_residual(blocks: LocalBlocks, q, u, uhat, dofmap: DofMap, em: ExpandedMesh, phiN=None):
    """Assembled flux tests minus the Neumann load, restricted to non-Dirichlet faces.

    Returns ``(residual, scale)`` where `scale` is the norm of the per-element
    flux tests; on interior faces the assembled fluxes must cancel.
    """
    uloc = dofmap.gather(uhat)
    flux = local_flux(blocks, q, u, uloc)
    total = np.bincount(dofmap.element_dofs().ravel(), weights=flux.ravel(), minlength=dofmap.size)
    if phiN is not None and len(phiN):
        total[dofmap.face_dofs(em.neufaces).ravel()] -= np.asarray(phiN).ravel()
    keep = np.repeat(np.asarray(em.facetype) != 1, dofmap.d2)
    return total[keep], float(np.linalg.norm(flux))
