"""Matrix blocks for convection-diffusion HDG discretizations.

Only the blocks are provided here; no convection-diffusion solver is assembled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisTables
from .element_matrices import (
    evaluate,
    face_quad_points,
    variable_convection_matrices,
    variable_surface_matrices,
)
from .mesh import ExpandedMesh

__all__ = ["ConvectionMatrices", "convection_bilinear_matrices"]


@dataclass(frozen=True)
class ConvectionMatrices:
    conv: np.ndarray  # (Nelt, d3, d3): (beta . grad P_j, P_i)_K
    surf_DP: np.ndarray  # (Nelt, 4 d2, d3): <(beta . nu) P_j, D_i>_{dK}
    surf_DD: np.ndarray  # (Nelt, 4 d2, 4 d2): <(beta . nu) D_j, D_i>_{dK}


def convection_bilinear_matrices(em: ExpandedMesh, tables: BasisTables, beta) -> ConvectionMatrices:
    """Volume and surface convection matrices for a velocity field ``beta``.

    `beta` is a callable ``(X, Y, Z) -> (bx, by, bz)`` or a constant 3-vector.
    ``nu`` is the outward unit normal of each element face.
    """
    if callable(beta):
        comps = [lambda X, Y, Z, s=s: np.asarray(beta(X, Y, Z)[s], dtype=float) for s in range(3)]
    else:
        b = np.asarray(beta, dtype=float).reshape(3)
        comps = [float(v) for v in b]
    Cs = [variable_convection_matrices(em, tables, comps[s])[s] for s in range(3)]
    conv = Cs[0] + Cs[1] + Cs[2]

    X, Y, Z = face_quad_points(em, tables)  # (Nelt, 4, Nqd)
    unit = em.normals / em.element_areas[..., None]
    bn = sum(evaluate(comps[s], X, Y, Z) * unit[:, :, s, None] for s in range(3))
    DP, DD = variable_surface_matrices(em, tables, bn, em.element_areas)
    return ConvectionMatrices(conv, DP, DD)
