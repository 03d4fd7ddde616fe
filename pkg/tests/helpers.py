"""Shared test utilities: scrambled meshes and naive per-element quadrature."""
from __future__ import annotations

import itertools

import numpy as np

from hdg3d.basis import eval_dubiner2d, eval_dubiner3d, eval_dubiner3d_grad
from hdg3d.mesh import LOCAL_FACES, RawMesh, box_mesh, dirichlet_planes

EVEN_PERMS = [p for p in itertools.permutations(range(4))
              if sum(p[i] > p[j] for i in range(4) for j in range(i + 1, 4)) % 2 == 0]


def scrambled_mesh(cells=(2, 2, 2), seed=0, bc=None) -> RawMesh:
    """Box mesh with element vertices reordered by random even permutations
    (orientation preserved) and boundary triples shuffled, so that every
    permutation code appears."""
    raw = box_mesh(cells, bc=bc or dirichlet_planes(2, [0.0, 1.0]))
    rng = np.random.default_rng(seed)
    picks = rng.integers(len(EVEN_PERMS), size=raw.nelt)
    elements = np.array([raw.elements[K][list(EVEN_PERMS[p])] for K, p in enumerate(picks)])

    def shuffle(tris):
        return np.array([t[rng.permutation(3)] for t in tris]).reshape(-1, 3)

    return RawMesh(raw.coordinates, elements, shuffle(raw.dirichlet), shuffle(raw.neumann))


def single_tet(vertices=None) -> RawMesh:
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float) if vertices is None else vertices
    el = np.array([[0, 1, 2, 3]])
    faces = np.array([[el[0, i] for i in f] for f in LOCAL_FACES])
    return RawMesh(np.asarray(V, dtype=float), el, faces, np.zeros((0, 3), dtype=int))


# ---------------------------------------------------------------------------
# Independent Gauss-Legendre collapsed quadrature (not the package's rules)

def gl_tet(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1), 0.5 * w
    U, V, W = np.meshgrid(x, x, x, indexing="ij")
    WU, WV, WW = np.meshgrid(w, w, w, indexing="ij")
    px = U
    py = V * (1 - U)
    pz = W * (1 - U) * (1 - V)
    wt = WU * WV * WW * (1 - U) ** 2 * (1 - V)
    return np.column_stack([px.ravel(), py.ravel(), pz.ravel()]), wt.ravel()  # sum = 1/6


def gl_tri(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1), 0.5 * w
    U, V = np.meshgrid(x, x, indexing="ij")
    WU, WV = np.meshgrid(w, w, indexing="ij")
    return np.column_stack([U.ravel(), (V * (1 - U)).ravel()]), (WU * WV * (1 - U)).ravel()  # sum = 1/2


class ElementOracle:
    """Physical basis functions of one element evaluated by inverting F_K."""

    def __init__(self, coords, tet, k):
        self.V = np.asarray(coords, dtype=float)
        self.B = (self.V[1:] - self.V[0]).T
        self.Binv = np.linalg.inv(self.B)
        self.det = np.linalg.det(self.B)
        self.k = k

    def ref(self, x):
        return (np.asarray(x) - self.V[0]) @ self.Binv.T

    def P(self, x):
        return eval_dubiner3d(self.k, self.ref(x))

    def gradP(self, x):
        g = np.stack(eval_dubiner3d_grad(self.k, self.ref(x)), axis=-1)  # (n, d3, 3)
        return g @ self.Binv  # chain rule, (n, d3, 3)

    def volume_points(self, n=8):
        p, w = gl_tet(n)
        return self.V[0] + p @ self.B.T, w * self.det


def face_points(W, n=8):
    """Points on the triangle with vertex rows W parametrized by (s, t)."""
    st, w = gl_tri(n)
    area = 0.5 * np.linalg.norm(np.cross(W[1] - W[0], W[2] - W[0]))
    pts = W[0] + st[:, :1] * (W[1] - W[0]) + st[:, 1:] * (W[2] - W[0])
    return pts, st, 2 * area * w, area


def trace_basis(k, W, x):
    """Face basis D^e at physical points x of the face with vertex rows W."""
    A = np.column_stack([W[1] - W[0], W[2] - W[0]])
    st = np.linalg.lstsq(A, (x - W[0]).T, rcond=None)[0].T
    return eval_dubiner2d(k, st)


class NaiveFace:
    """Independent quadrature on local face ell of element K with the global face basis."""

    def __init__(self, em, K, ell, k, n=10):
        e = em.facebyele[K, ell]
        W = em.coordinates[em.faces[e]]
        self.pts, _, self.w, self.area = face_points(W, n)
        self.D = trace_basis(k, W, self.pts)
