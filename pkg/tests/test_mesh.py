import itertools

import numpy as np
import pytest

from hdg3d.basis import FACE_MAP_VERTEX_TABLE
from hdg3d.mesh import (
    DIRICHLET,
    INTERIOR,
    LOCAL_FACES,
    NEUMANN,
    MeshError,
    RawMesh,
    box_mesh,
    dirichlet_planes,
    expand,
    geometry,
    l_domain_mesh,
    nodal_matrices,
    read_mesh,
    write_mesh,
)

from helpers import scrambled_mesh, single_tet


def brute_force_faces(elements):
    return {frozenset(f) for el in elements for f in itertools.combinations(el, 3)}


def check_invariants(em):
    nint = em.nfc - em.ndir - em.nneu
    assert 4 * em.nelt == 2 * nint + em.ndir + em.nneu
    assert np.abs(em.normals.sum(axis=1)).max() < 1e-12
    assert np.allclose(np.linalg.norm(em.normals, axis=2), em.area[em.facebyele], rtol=1e-12)
    # vertices of phi_e o F_perm coincide with those of the local face
    local = em.elements[:, LOCAL_FACES]
    glob = em.faces[em.facebyele]
    for K in range(em.nelt):
        for ell in range(4):
            row = np.array(FACE_MAP_VERTEX_TABLE[em.perm[K, ell] - 1]) - 1
            assert np.array_equal(local[K, ell], glob[K, ell][row])
    assert set(em.facetype[em.dirfaces]) <= {DIRICHLET}
    assert set(em.facetype[em.neufaces]) <= {NEUMANN}


def test_single_tet_identity_perms():
    em = expand(single_tet())
    assert em.nfc == 4
    assert em.perm.tolist() == [[1, 1, 1, 1]]
    assert np.allclose(em.volume, 1 / 6)
    check_invariants(em)


def test_unit_cube():
    raw = box_mesh((1, 1, 1))
    em = expand(raw)
    assert (em.nelt, em.nfc, em.ndir, em.nneu) == (6, 18, 12, 0)
    assert len(brute_force_faces(raw.elements.tolist())) == 18
    assert 4 * 6 == 2 * 6 + 12
    assert em.volume.sum() == pytest.approx(1.0, rel=1e-12)
    check_invariants(em)


def test_l_domain_counts():
    for n, (nelt, nfc) in [(1, (24, 66)), (2, (192, 456))]:
        em = expand(l_domain_mesh(n))
        assert (em.nelt, em.nfc) == (nelt, nfc)
        assert em.volume.sum() == pytest.approx(4.0, rel=1e-12)
        check_invariants(em)


def test_nested_refinement():
    coarse, fine = box_mesh((1, 1, 1)), box_mesh((2, 2, 2))
    assert fine.nelt == 48
    for v in coarse.coordinates:
        assert np.any(np.all(np.isclose(fine.coordinates, v), axis=1))


def test_positive_orientation_and_mixed_bc():
    raw = box_mesh((2, 3, 2), bounds=((0, 1), (-1, 2), (0, 0.5)), bc=dirichlet_planes(2, [0.0]))
    em = expand(raw)
    assert np.all(em.volume > 0)
    assert em.volume.sum() == pytest.approx(1 * 3 * 0.5, rel=1e-12)
    assert em.ndir == 2 * 3 * 2  # two triangles per cell on z = 0
    check_invariants(em)


def test_scrambled_mesh_covers_all_perm_codes():
    em = expand(scrambled_mesh())
    assert em.nelt <= 48
    assert set(em.perm.ravel().tolist()) == {1, 2, 3, 4, 5, 6}
    check_invariants(em)


def test_interior_normals_opposite():
    em = expand(scrambled_mesh(seed=3))
    total = np.zeros((em.nfc, 3))
    np.add.at(total, em.facebyele.ravel(), em.normals.reshape(-1, 3))
    interior = np.flatnonzero(em.facetype == INTERIOR)
    assert np.abs(total[interior]).max() < 1e-14


def test_boundary_rows_keep_input_order():
    raw = scrambled_mesh(seed=5)
    em = expand(raw)
    assert np.array_equal(em.faces[: em.ndir], raw.dirichlet)
    assert np.array_equal(em.faces[em.ndir: em.ndir + em.nneu], raw.neumann)
    keys = [tuple(sorted(f)) for f in em.faces[em.ndir + em.nneu:]]
    assert keys == sorted(keys)


def test_expand_deterministic():
    raw = scrambled_mesh(seed=2)
    a, b = expand(raw), expand(raw)
    for name in ("faces", "facebyele", "perm", "normals", "area", "volume"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_expand_errors():
    raw = single_tet()
    flipped = RawMesh(raw.coordinates, raw.elements[:, [0, 2, 1, 3]], raw.dirichlet, raw.neumann)
    with pytest.raises(MeshError, match="orient"):
        expand(flipped)
    bogus = RawMesh(np.vstack([raw.coordinates, [[2, 2, 2]]]), raw.elements,
                    np.vstack([raw.dirichlet, [[0, 1, 4]]]), raw.neumann)
    with pytest.raises(MeshError, match="matches no element face"):
        expand(bogus)
    # three tets sharing one face
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, -1], [0.3, 0.3, 1]], dtype=float)
    els = np.array([[0, 1, 2, 3], [0, 2, 1, 4], [0, 1, 2, 5]])
    with pytest.raises(MeshError, match="shared by 3"):
        expand(RawMesh(V, els, np.zeros((0, 3), int), np.zeros((0, 3), int)))
    with pytest.raises(MeshError):
        box_mesh((0, 1, 1))
    with pytest.raises(MeshError):
        box_mesh((1, 1, 1), bounds=((0, 0), (0, 1), (0, 1)))


def test_geometry_examples():
    g = geometry(single_tet(), 0)
    assert np.allclose(g.B, np.eye(3)) and g.detB == pytest.approx(1.0) and np.allclose(g.a, np.eye(3))
    ref = single_tet().coordinates
    g2 = geometry(single_tet(2 * ref), 0)
    assert g2.detB == pytest.approx(8.0) and np.allclose(g2.a, 4 * np.eye(3))
    rng = np.random.default_rng(1)
    V = ref + 0.2 * rng.standard_normal((4, 3))
    if np.linalg.det((V[1:] - V[0]).T) < 0:
        V[[1, 2]] = V[[2, 1]]
    g3 = geometry(single_tet(V), 0)
    assert np.allclose(g3.B, (V[1:] - V[0]).T)
    assert g3.detB == pytest.approx(6 * expand(single_tet(V)).volume[0], rel=1e-12)
    assert np.allclose(g3.a, g3.detB * np.linalg.inv(g3.B).T, rtol=1e-12, atol=1e-14)


def test_nodal_matrices():
    X, Y, Z = nodal_matrices(expand(single_tet()))
    assert X[:, 0].tolist() == [0, 1, 0, 0]
    ref = single_tet().coordinates
    X, _, _ = nodal_matrices(expand(single_tet(ref + [1, 0, 0])))
    assert X[:, 0].tolist() == [1, 2, 1, 1]
    em = expand(box_mesh((1, 1, 1)))
    X, Y, Z = nodal_matrices(em)
    back = np.zeros((em.raw.nver, 3))
    back[em.elements.T] = np.stack([X, Y, Z], axis=-1)
    assert np.array_equal(back, em.coordinates)


def test_mesh_file_round_trip(tmp_path):
    raw = scrambled_mesh(seed=1)
    raw = RawMesh(raw.coordinates * np.pi, raw.elements, raw.dirichlet, raw.neumann)
    path = tmp_path / "m.txt"
    write_mesh(raw, path)
    back = read_mesh(path)
    for name in ("coordinates", "elements", "dirichlet", "neumann"):
        assert np.array_equal(getattr(raw, name), getattr(back, name))


def test_mesh_file_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("coordinates 2\n0 0 0\n")
    with pytest.raises(MeshError):
        read_mesh(p)
    p.write_text("0 0 0\n")
    with pytest.raises(MeshError):
        read_mesh(p)
