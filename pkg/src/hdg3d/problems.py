"""Manufactured-solution problems for convergence studies.

Each problem supplies kappa, c, the exact u and q = -kappa grad u, the source
f = div q + c u, Dirichlet data u and Neumann data g = -q (only its normal
component is used).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = ["ProblemSpec", "registry", "get_problem"]


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    kappa: Callable | float
    c: Callable | float
    u: Callable
    q: Callable  # returns (qx, qy, qz)
    f: Callable
    description: str = ""

    def g(self, X, Y, Z):
        qx, qy, qz = self.q(X, Y, Z)
        return -qx, -qy, -qz

    @property
    def uD(self):
        return self.u


def paper_sine() -> ProblemSpec:
    def kappa(x, y, z):
        return 2.0 + np.sin(x) * np.sin(y) * np.sin(z)

    def c(x, y, z):
        return 1.0 + 0.5 * (x**2 + y**2 + z**2)

    def u(x, y, z):
        return np.sin(x * y * z)

    def grad_u(x, y, z):
        cs = np.cos(x * y * z)
        return cs * y * z, cs * x * z, cs * x * y

    def q(x, y, z):
        kap = kappa(x, y, z)
        return tuple(-kap * g for g in grad_u(x, y, z))

    def f(x, y, z):
        gx, gy, gz = grad_u(x, y, z)
        dk = (
            np.cos(x) * np.sin(y) * np.sin(z),
            np.sin(x) * np.cos(y) * np.sin(z),
            np.sin(x) * np.sin(y) * np.cos(z),
        )
        lap = -np.sin(x * y * z) * ((y * z) ** 2 + (x * z) ** 2 + (x * y) ** 2)
        div_q = -(dk[0] * gx + dk[1] * gy + dk[2] * gz) - kappa(x, y, z) * lap
        return div_q + c(x, y, z) * u(x, y, z)

    return ProblemSpec(
        "paper-sine", kappa, c, u, q, f,
        "u = sin(xyz), kappa = 2 + sin x sin y sin z, c = 1 + |x|^2/2",
    )


def poly(degree: int, seed: int = 1234, kappa: float = 1.5, c: float = 0.5) -> ProblemSpec:
    """Random polynomial exact solution of total degree `degree`, constant coefficients."""
    rng = np.random.default_rng(seed + degree)
    coef = np.zeros((degree + 1,) * 3)
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            for m in range(degree + 1 - i - j):
                coef[i, j, m] = rng.uniform(-1.0, 1.0)
    coef[0, 0, 0] += 2.0
    grads = [npoly.polyder(coef, axis=a) for a in range(3)]
    hess = [npoly.polyder(coef, m=2, axis=a) for a in range(3)]

    def u(x, y, z):
        return npoly.polyval3d(x, y, z, coef)

    def q(x, y, z):
        return tuple(-kappa * npoly.polyval3d(x, y, z, g) for g in grads)

    def f(x, y, z):
        lap = sum(npoly.polyval3d(x, y, z, h) for h in hess)
        return -kappa * lap + c * u(x, y, z)

    return ProblemSpec(f"poly-{degree}", kappa, c, u, q, f, f"random degree-{degree} polynomial")


def constant() -> ProblemSpec:
    def u(x, y, z):
        return np.ones_like(np.asarray(x, dtype=float))

    def q(x, y, z):
        zero = np.zeros_like(np.asarray(x, dtype=float))
        return zero, zero, zero

    return ProblemSpec("constant", 1.0, 1.0, u, q, u, "u = 1, kappa = c = 1, f = 1")


_REGISTRY = {
    "paper-sine": lambda k: paper_sine(),
    "poly-k": lambda k: poly(k),
    "constant": lambda k: constant(),
}


def registry() -> list[str]:
    return list(_REGISTRY)


def get_problem(name: str, k: int = 1) -> ProblemSpec:
    """Look up a problem by name; ``poly-k`` uses the study degree `k`."""
    if name.startswith("poly-") and name[5:].isdigit():
        return poly(int(name[5:]))
    try:
        return _REGISTRY[name](k)
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {', '.join(registry())}") from None
