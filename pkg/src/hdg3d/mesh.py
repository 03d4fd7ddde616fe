"""Tetrahedral meshes: raw and expanded data structures, geometry, generators.

All vertex, element and face indices are 0-based. Permutation codes keep
their conventional values 1..6.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from pathlib import Path
from typing import Callable

import numpy as np

from .basis import FACE_MAP_VERTEX_TABLE

__all__ = [
    "LOCAL_FACES",
    "INTERIOR",
    "DIRICHLET",
    "NEUMANN",
    "MeshError",
    "RawMesh",
    "ExpandedMesh",
    "ElementGeometry",
    "expand",
    "geometry",
    "piola",
    "nodal_matrices",
    "box_mesh",
    "l_domain_mesh",
    "dirichlet_planes",
    "read_mesh",
    "write_mesh",
]

# local vertex triples of the faces e_1..e_4
LOCAL_FACES = np.array([[0, 1, 2], [0, 1, 3], [0, 2, 3], [3, 1, 2]])
# faces 1 and 3 inherit an inward-pointing orientation
_OUTWARD_SIGN = np.array([-1.0, 1.0, -1.0, 1.0])

INTERIOR, DIRICHLET, NEUMANN = 0, 1, 2


class MeshError(ValueError):
    pass


def _frozen(a, dtype=None) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RawMesh:
    coordinates: np.ndarray  # (Nver, 3)
    elements: np.ndarray  # (Nelt, 4)
    dirichlet: np.ndarray  # (Ndir, 3)
    neumann: np.ndarray  # (Nneu, 3)

    def __post_init__(self):
        object.__setattr__(self, "coordinates", _frozen(np.reshape(self.coordinates, (-1, 3)), float))
        object.__setattr__(self, "elements", _frozen(np.reshape(self.elements, (-1, 4)), np.int64))
        object.__setattr__(self, "dirichlet", _frozen(np.reshape(self.dirichlet, (-1, 3)), np.int64))
        object.__setattr__(self, "neumann", _frozen(np.reshape(self.neumann, (-1, 3)), np.int64))

    @property
    def nver(self) -> int:
        return len(self.coordinates)

    @property
    def nelt(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class ExpandedMesh:
    raw: RawMesh
    faces: np.ndarray  # (Nfc, 3) vertex triples giving the face parametrization
    facetype: np.ndarray  # (Nfc,) INTERIOR | DIRICHLET | NEUMANN
    dirfaces: np.ndarray
    neufaces: np.ndarray
    facebyele: np.ndarray  # (Nelt, 4)
    perm: np.ndarray  # (Nelt, 4), values 1..6
    volume: np.ndarray  # (Nelt,)
    area: np.ndarray  # (Nfc,)
    normals: np.ndarray  # (Nelt, 4, 3) outward, |n| = |e|

    @property
    def coordinates(self) -> np.ndarray:
        return self.raw.coordinates

    @property
    def elements(self) -> np.ndarray:
        return self.raw.elements

    @property
    def nelt(self) -> int:
        return self.raw.nelt

    @property
    def nfc(self) -> int:
        return len(self.faces)

    @property
    def ndir(self) -> int:
        return len(self.dirfaces)

    @property
    def nneu(self) -> int:
        return len(self.neufaces)

    @property
    def element_areas(self) -> np.ndarray:
        """|e_l^K| as an (Nelt, 4) array."""
        return self.area[self.facebyele]


@dataclass(frozen=True)
class ElementGeometry:
    B: np.ndarray
    detB: float
    a: np.ndarray  # det(B) * inv(B).T


def _face_keys(tri: np.ndarray, nver: int) -> np.ndarray:
    s = np.sort(tri, axis=-1).astype(np.int64)
    return (s[..., 0] * nver + s[..., 1]) * nver + s[..., 2]


def _jacobians(coords: np.ndarray, elements: np.ndarray) -> np.ndarray:
    v = coords[elements]  # (Nelt, 4, 3)
    return np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0], v[:, 3] - v[:, 0]], axis=-1)


def expand(raw: RawMesh) -> ExpandedMesh:
    """Build face lists, incidences, permutation codes and geometric fields."""
    coords, elements = raw.coordinates, raw.elements
    nver, nelt = raw.nver, raw.nelt
    if nelt == 0:
        raise MeshError("mesh has no elements")
    if nver >= 2**20:
        raise MeshError("too many vertices for face hashing")
    for name, arr in (("elements", elements), ("dirichlet", raw.dirichlet), ("neumann", raw.neumann)):
        if arr.size and (arr.min() < 0 or arr.max() >= nver):
            raise MeshError(f"{name} references a vertex out of range")

    B = _jacobians(coords, elements)
    detB = np.linalg.det(B)
    bad = np.flatnonzero(detB <= 0)
    if bad.size:
        raise MeshError(f"element {bad[0]} is not positively oriented (det B = {detB[bad[0]]:.3e})")

    local = elements[:, LOCAL_FACES]  # (Nelt, 4, 3)
    keys = _face_keys(local, nver).ravel()
    ukeys, first, inverse, counts = np.unique(keys, return_index=True, return_inverse=True, return_counts=True)
    if counts.max() > 2:
        j = int(np.flatnonzero(counts > 2)[0])
        raise MeshError(f"face {local.reshape(-1, 3)[first[j]].tolist()} is shared by {counts[j]} elements")

    bnd = np.concatenate([raw.dirichlet, raw.neumann])
    ndir, nneu = len(raw.dirichlet), len(raw.neumann)
    bkeys = _face_keys(bnd, nver)
    pos = np.searchsorted(ukeys, bkeys)
    pos = np.minimum(pos, len(ukeys) - 1)
    found = (ukeys[pos] == bkeys) if len(bkeys) else np.zeros(0, bool)
    if not found.all():
        j = int(np.flatnonzero(~found)[0])
        raise MeshError(f"boundary face {bnd[j].tolist()} matches no element face")
    if np.any(counts[pos] != 1):
        j = int(np.flatnonzero(counts[pos] != 1)[0])
        raise MeshError(f"boundary face {bnd[j].tolist()} is an interior face")
    if len(np.unique(pos)) != len(pos):
        raise MeshError("a boundary face is listed more than once")

    nuniq = len(ukeys)
    number = np.full(nuniq, -1, dtype=np.int64)
    number[pos] = np.arange(len(bnd))
    single = np.flatnonzero((counts == 1) & (number < 0))
    if single.size:
        tri = local.reshape(-1, 3)[first[single[0]]]
        raise MeshError(f"boundary face {tri.tolist()} is neither Dirichlet nor Neumann")
    interior = np.flatnonzero(counts == 2)
    number[interior] = len(bnd) + np.arange(len(interior))

    faces = np.empty((nuniq, 3), dtype=np.int64)
    faces[: len(bnd)] = bnd
    faces[len(bnd):] = local.reshape(-1, 3)[first[interior]]
    facetype = np.zeros(nuniq, dtype=np.int8)
    facetype[:ndir] = DIRICHLET
    facetype[ndir: ndir + nneu] = NEUMANN

    facebyele = number[inverse].reshape(nelt, 4)

    glob = faces[facebyele]  # (Nelt, 4, 3)
    perm = np.zeros((nelt, 4), dtype=np.int8)
    for mu, row in enumerate(FACE_MAP_VERTEX_TABLE, start=1):
        match = np.all(local == glob[..., row - 1], axis=-1)
        perm[match] = mu
    if np.any(perm == 0):
        raise MeshError("could not match a local face parametrization to its global face")

    v = coords[local]  # (Nelt, 4, 3, 3)
    normals = 0.5 * np.cross(v[:, :, 1] - v[:, :, 0], v[:, :, 2] - v[:, :, 0])
    normals *= _OUTWARD_SIGN[None, :, None]
    w = coords[faces]
    area = 0.5 * np.linalg.norm(np.cross(w[:, 1] - w[:, 0], w[:, 2] - w[:, 0]), axis=1)

    return ExpandedMesh(
        raw=raw,
        faces=_frozen(faces),
        facetype=_frozen(facetype),
        dirfaces=_frozen(np.arange(ndir)),
        neufaces=_frozen(np.arange(ndir, ndir + nneu)),
        facebyele=_frozen(facebyele),
        perm=_frozen(perm),
        volume=_frozen(detB / 6.0),
        area=_frozen(area),
        normals=_frozen(normals),
    )


def piola(coordinates: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """Cofactor matrices ``det(B_K) inv(B_K).T`` for all elements, (Nelt, 3, 3).

    Entry ``[K, s, h]`` multiplies the reference derivative ``d/dh`` in the
    physical derivative ``d/ds`` (scaled by det B).
    """
    v = coordinates[elements]
    x, y, z = v[..., 0].T, v[..., 1].T, v[..., 2].T  # each (4, Nelt)
    dx, dy, dz = x[1:] - x[0], y[1:] - y[0], z[1:] - z[0]  # rows: vertices 2, 3, 4
    a = np.empty((elements.shape[0], 3, 3))
    a[:, 0, 0] = dy[1] * dz[2] - dy[2] * dz[1]
    a[:, 0, 1] = dy[2] * dz[0] - dy[0] * dz[2]
    a[:, 0, 2] = dy[0] * dz[1] - dy[1] * dz[0]
    a[:, 1, 0] = dx[2] * dz[1] - dx[1] * dz[2]
    a[:, 1, 1] = dx[0] * dz[2] - dx[2] * dz[0]
    a[:, 1, 2] = dx[1] * dz[0] - dx[0] * dz[1]
    a[:, 2, 0] = dx[1] * dy[2] - dx[2] * dy[1]
    a[:, 2, 1] = dx[2] * dy[0] - dx[0] * dy[2]
    a[:, 2, 2] = dx[0] * dy[1] - dx[1] * dy[0]
    return a


def geometry(raw: RawMesh, K: int) -> ElementGeometry:
    if not 0 <= K < raw.nelt:
        raise IndexError(f"element index {K} out of range")
    els = raw.elements[K: K + 1]
    B = _jacobians(raw.coordinates, els)[0]
    return ElementGeometry(B=B, detB=float(np.linalg.det(B)), a=piola(raw.coordinates, els)[0])


def nodal_matrices(em: ExpandedMesh):
    """Vertex coordinates by element as three (4, Nelt) arrays."""
    v = em.coordinates[em.elements]
    return v[..., 0].T.copy(), v[..., 1].T.copy(), v[..., 2].T.copy()


def dirichlet_planes(axis: int, values, tol: float = 1e-12) -> Callable:
    """Face-classification rule: Dirichlet on the planes ``x[axis] = value``."""
    values = np.atleast_1d(np.asarray(values, dtype=float))

    def rule(centroids: np.ndarray, normals: np.ndarray) -> np.ndarray:
        on = np.any(np.abs(centroids[:, axis, None] - values[None, :]) < tol, axis=1)
        on &= np.abs(normals[:, axis]) > 1 - 1e-9
        return np.where(on, DIRICHLET, NEUMANN)

    return rule


def _all_dirichlet(centroids, normals):
    return np.full(len(centroids), DIRICHLET)


def box_mesh(cells=(1, 1, 1), bounds=((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)), bc=None, keep=None) -> RawMesh:
    """Structured tetrahedral mesh of an axis-aligned box (or a union of its cells).

    Each hexahedral cell is split into six tetrahedra around its main diagonal.
    `bc(centroids, unit_normals)` returns DIRICHLET or NEUMANN per boundary face
    (default: all Dirichlet). `keep(cell_centers)` selects a subset of cells.
    """
    nx, ny, nz = (int(c) for c in cells)
    if min(nx, ny, nz) < 1:
        raise MeshError(f"cell counts must be >= 1, got {cells}")
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if np.any(hi <= lo):
        raise MeshError(f"degenerate bounds {bounds}")
    bc = _all_dirichlet if bc is None else bc

    n = np.array([nx, ny, nz])
    I, J, L = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    cell_ijk = np.column_stack([I.ravel(), J.ravel(), L.ravel()])
    h = (hi - lo) / n
    if keep is not None:
        cell_ijk = cell_ijk[np.asarray(keep(lo + (cell_ijk + 0.5) * h), dtype=bool)]
        if len(cell_ijk) == 0:
            raise MeshError("no cells selected")

    def vid(ijk):
        return (ijk[..., 0] * (ny + 1) + ijk[..., 1]) * (nz + 1) + ijk[..., 2]

    eye = np.eye(3, dtype=np.int64)
    tets = []
    for sigma in permutations(range(3)):
        p0 = np.zeros(3, dtype=np.int64)
        p1 = p0 + eye[sigma[0]]
        p2 = p1 + eye[sigma[1]]
        p3 = np.ones(3, dtype=np.int64)
        sign = np.linalg.det(np.stack([p1, p2, p3], axis=1).astype(float))
        corners = [p0, p1, p2, p3] if sign > 0 else [p0, p2, p1, p3]
        tets.append(np.stack([vid(cell_ijk + c) for c in corners], axis=1))
    elements = np.stack(tets, axis=1).reshape(-1, 4)

    used, elements = np.unique(elements, return_inverse=True)
    elements = elements.reshape(-1, 4)
    gi = used // ((ny + 1) * (nz + 1))
    gj = (used // (nz + 1)) % (ny + 1)
    gk = used % (nz + 1)
    coords = lo + np.column_stack([gi, gj, gk]) * h

    local = elements[:, LOCAL_FACES]
    keys = _face_keys(local, len(coords)).ravel()
    _, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    flat = np.flatnonzero(counts[inverse] == 1)
    ell = flat % 4
    tri = local.reshape(-1, 3)[flat]
    inward = (ell == 0) | (ell == 2)
    tri[inward] = tri[inward][:, [0, 2, 1]]
    w = coords[tri]
    nrm = np.cross(w[:, 1] - w[:, 0], w[:, 2] - w[:, 0])
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    kind = np.asarray(bc(w.mean(axis=1), nrm))
    return RawMesh(coords, elements, tri[kind == DIRICHLET], tri[kind == NEUMANN])


def l_domain_mesh(n: int, bc=None) -> RawMesh:
    """Union of four unit cubes: a column [0,1]x[0,1]x[0,3] plus [1,2]x[0,1]x[0,1].

    `n` cells per unit length; Nelt = 24 n**3. Default boundary rule: Dirichlet
    on the planes z = 0, 1, 3 and Neumann elsewhere.
    """
    if bc is None:
        bc = dirichlet_planes(2, [0.0, 1.0, 3.0])
    return box_mesh(
        (2 * n, n, 3 * n),
        ((0.0, 2.0), (0.0, 1.0), (0.0, 3.0)),
        bc=bc,
        keep=lambda c: (c[:, 0] < 1.0) | (c[:, 2] < 1.0),
    )


_SECTIONS = ("coordinates", "elements", "dirichlet", "neumann")


def write_mesh(raw: RawMesh, path) -> None:
    """Write the line-oriented mesh format (0-based indices, 17 significant digits)."""
    lines = ["# hdg3d tetrahedral mesh, 0-based vertex indices"]
    lines.append(f"coordinates {raw.nver}")
    lines += [" ".join(f"{v:.17g}" for v in row) for row in raw.coordinates]
    for name in _SECTIONS[1:]:
        arr = getattr(raw, name)
        lines.append(f"{name} {len(arr)}")
        lines += [" ".join(str(int(v)) for v in row) for row in arr]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> RawMesh:
    data = {name: [] for name in _SECTIONS}
    current, expected = None, {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split()
        if head[0] in data:
            current = head[0]
            if len(head) > 1:
                expected[current] = int(head[1])
            continue
        if current is None:
            raise MeshError(f"line {lineno}: data before any section header")
        data[current].append(head)
    for name, n in expected.items():
        if len(data[name]) != n:
            raise MeshError(f"section {name}: expected {n} rows, found {len(data[name])}")
    widths = {"coordinates": 3, "elements": 4, "dirichlet": 3, "neumann": 3}
    for name, rows in data.items():
        if any(len(r) != widths[name] for r in rows):
            raise MeshError(f"section {name}: rows must have {widths[name]} entries")
    return RawMesh(
        coordinates=np.array(data["coordinates"], dtype=float).reshape(-1, 3),
        elements=np.array(data["elements"], dtype=np.int64).reshape(-1, 4),
        dirichlet=np.array(data["dirichlet"], dtype=np.int64).reshape(-1, 3),
        neumann=np.array(data["neumann"], dtype=np.int64).reshape(-1, 3),
    )
