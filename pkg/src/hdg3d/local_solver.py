"""Element-local HDG systems, static condensation and local recovery."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisFamily
from .element_matrices import ElementMatrices
from .parallel import element_map

__all__ = [
    "RCOND_MIN",
    "SingularElementError",
    "LocalBlocks",
    "CondensedOperator",
    "assemble_blocks",
    "condense",
    "local_recover",
    "local_flux",
    "bdm_blocks",
]

RCOND_MIN = 1e-14


class SingularElementError(np.linalg.LinAlgError):
    def __init__(self, element: int, rcond: float):
        super().__init__(f"local matrix of element {element} is singular (rcond ~ {rcond:.2e})")
        self.element = element
        self.rcond = rcond


@dataclass(frozen=True)
class LocalBlocks:
    """Per-element blocks; ``nq`` rows are flux unknowns, the rest scalar ones."""

    A1: np.ndarray  # (Nelt, n, n)
    A2: np.ndarray  # (Nelt, n, 4 d2)
    A3: np.ndarray  # (Nelt, 4 d2, n)
    Af: np.ndarray  # (Nelt, n)
    tauDD: np.ndarray  # (Nelt, 4 d2, 4 d2)
    d3: int

    @property
    def nelt(self) -> int:
        return self.A1.shape[0]

    @property
    def nq(self) -> int:
        return 3 * self.d3

    @property
    def nu(self) -> int:
        return self.A1.shape[1] - self.nq


@dataclass(frozen=True)
class CondensedOperator:
    C: np.ndarray  # (Nelt, 4 d2, 4 d2)
    Cf: np.ndarray  # (Nelt, 4 d2)


def assemble_blocks(em: ElementMatrices) -> LocalBlocks:
    """Stack the element matrices into the local solver blocks."""
    d = em.d3
    shapes = {em.Mkinv.shape, em.Mc.shape, em.Cx.shape, em.Cy.shape, em.Cz.shape, em.tauPP.shape}
    if len(shapes) != 1 or em.nxDP.shape[2] != d or em.fvec.shape[1] != d:
        raise ValueError("element matrices have inconsistent dimensions")
    nelt = em.Mc.shape[0]
    A1 = np.zeros((nelt, 4 * d, 4 * d))
    C = (em.Cx, em.Cy, em.Cz)
    for s in range(3):
        A1[:, s * d:(s + 1) * d, s * d:(s + 1) * d] = em.Mkinv
        A1[:, s * d:(s + 1) * d, 3 * d:] = -np.swapaxes(C[s], 1, 2)
        A1[:, 3 * d:, s * d:(s + 1) * d] = C[s]
    A1[:, 3 * d:, 3 * d:] = em.Mc + em.tauPP
    A3 = np.concatenate([em.nxDP, em.nyDP, em.nzDP, em.tauDP], axis=2)
    A2 = np.concatenate(
        [np.swapaxes(em.nxDP, 1, 2), np.swapaxes(em.nyDP, 1, 2),
         np.swapaxes(em.nzDP, 1, 2), -np.swapaxes(em.tauDP, 1, 2)],
        axis=1,
    )
    Af = np.zeros((nelt, 4 * d))
    Af[:, 3 * d:] = em.fvec
    return LocalBlocks(A1=A1, A2=A2, A3=A3, Af=Af, tauDD=em.tauDD, d3=d)


def _inverse_checked(A: np.ndarray, offset: int) -> np.ndarray:
    try:
        inv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        inv = None
    if inv is None or not np.all(np.isfinite(inv)):
        for i, Ai in enumerate(A):
            try:
                np.linalg.inv(Ai)
            except np.linalg.LinAlgError:
                raise SingularElementError(offset + i, 0.0) from None
        raise SingularElementError(offset, 0.0)
    rcond = 1.0 / (np.abs(A).sum(axis=1).max(axis=1) * np.abs(inv).sum(axis=1).max(axis=1))
    low = np.flatnonzero(rcond < RCOND_MIN)
    if low.size:
        raise SingularElementError(offset + int(low[0]), float(rcond[low[0]]))
    return inv


def condense(blocks: LocalBlocks, tauDD: np.ndarray | None = None, threads: int | None = None) -> CondensedOperator:
    """``C = A3 A1^-1 A2 + tauDD`` and ``Cf = A3 A1^-1 Af`` for every element."""
    tauDD = blocks.tauDD if tauDD is None else tauDD

    def work(sl):
        inv = _inverse_checked(blocks.A1[sl], sl.start)
        A3inv = blocks.A3[sl] @ inv
        C = A3inv @ blocks.A2[sl] + tauDD[sl]
        Cf = np.einsum("Kij,Kj->Ki", A3inv, blocks.Af[sl])
        return C, Cf

    C, Cf = element_map(work, blocks.nelt, threads)
    return CondensedOperator(C=C, Cf=Cf)


def local_recover(blocks: LocalBlocks, uhat_faces: np.ndarray, threads: int | None = None):
    """Solve ``A1 [q; u] = Af - A2 uhat`` per element.

    `uhat_faces` is (Nelt, 4 d2) in local face order. Returns q as
    (Nelt, 3, d3) and u as (Nelt, nu).
    """

    def work(sl):
        rhs = blocks.Af[sl] - np.einsum("Kij,Kj->Ki", blocks.A2[sl], uhat_faces[sl])
        try:
            x = np.linalg.solve(blocks.A1[sl], rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            _inverse_checked(blocks.A1[sl], sl.start)
            raise
        return (x,)

    (x,) = element_map(work, blocks.nelt, threads)
    d = blocks.d3
    return x[:, : 3 * d].reshape(-1, 3, d), x[:, 3 * d:]


def local_flux(blocks: LocalBlocks, q: np.ndarray, u: np.ndarray, uhat_faces: np.ndarray) -> np.ndarray:
    """Tests of the numerical flux, ``-A3 [q; u] + tauDD uhat``, (Nelt, 4 d2)."""
    x = np.concatenate([q.reshape(len(q), -1), u], axis=1)
    return -np.einsum("Kij,Kj->Ki", blocks.A3, x) + np.einsum("Kij,Kj->Ki", blocks.tauDD, uhat_faces)


def bdm_blocks(blocks: LocalBlocks, family: BasisFamily) -> LocalBlocks:
    """Drop the top-degree scalar modes: hybridized BDM local solvers.

    The blocks must have been built with tau = 0.
    """
    if family.k < 1:
        raise ValueError("the BDM variant requires k >= 1")
    if family.d3 != blocks.d3 or blocks.nu != blocks.d3:
        raise ValueError("blocks do not match the basis family or are already trimmed")
    if np.any(blocks.tauDD != 0) or np.any(blocks.A3[:, :, 3 * blocks.d3:] != 0):
        raise ValueError("the BDM variant requires tau = 0 on every face")
    n = 4 * blocks.d3 - family.d2
    return LocalBlocks(
        A1=np.ascontiguousarray(blocks.A1[:, :n, :n]),
        A2=np.ascontiguousarray(blocks.A2[:, :n]),
        A3=np.ascontiguousarray(blocks.A3[:, :, :n]),
        Af=np.ascontiguousarray(blocks.Af[:, :n]),
        tauDD=blocks.tauDD,
        d3=blocks.d3,
    )
