"""Manufactured problems ``div(-kappa grad p + b p) + gamma p = f`` on the unit square.

All fields are callables of ``(x, y)`` numpy arrays. ``kappa`` returns a
``(..., 2, 2)`` array and vector fields return an ``(fx, fy)`` pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoefficientSet:
    kappa: Callable
    b: Callable
    gamma: Field
    f: Field
    g: Field

    def nu(self, x, y) -> np.ndarray:
        """Pointwise inverse of kappa via the 2x2 adjugate."""
        k = np.asarray(self.kappa(x, y), dtype=float)
        det = k[..., 0, 0] * k[..., 1, 1] - k[..., 0, 1] * k[..., 1, 0]
        adj = np.empty_like(k)
        adj[..., 0, 0] = k[..., 1, 1]
        adj[..., 1, 1] = k[..., 0, 0]
        adj[..., 0, 1] = -k[..., 0, 1]
        adj[..., 1, 0] = -k[..., 1, 0]
        return adj / det[..., None, None]

    def beta(self, x, y) -> np.ndarray:
        """``kappa^{-1} b`` stacked as (..., 2)."""
        bx, by = self.b(x, y)
        bx, by, _ = np.broadcast_arrays(bx, by, np.asarray(x, dtype=float))
        bv = np.stack([bx, by], axis=-1)
        return np.einsum("...ij,...j->...i", self.nu(x, y), bv)

    def check_kappa(self, x, y) -> None:
        """Raise ContractError unless kappa is symmetric positive definite at every point."""
        k = np.asarray(self.kappa(x, y), dtype=float)
        if not np.allclose(k[..., 0, 1], k[..., 1, 0], rtol=1e-12, atol=1e-14):
            raise ContractError("kappa is not symmetric")
        det = k[..., 0, 0] * k[..., 1, 1] - k[..., 0, 1] * k[..., 1, 0]
        if not (np.all(det > 0) and np.all(k[..., 0, 0] > 0)):
            raise ContractError("kappa is not positive definite")


@dataclass(frozen=True)
class ManufacturedProblem:
    name: str
    coeffs: CoefficientSet
    p: Field
    u: Callable
    div_u: Field
    grad_p: Callable
    notes: str = ""


def _identity(x, y):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    return out


def _zero_vec(x, y):
    z = np.zeros_like(np.asarray(x, dtype=float))
    return z, z


def _zero(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


def paper_benchmark() -> ManufacturedProblem:
    """Variable full-tensor diffusion with convection and reaction.

    ``p = x^2 y + sin(2 pi x) sin(2 pi y) + 2``,
    ``kappa = [[y^2+1, -xy], [-xy, x^2+1]]``, ``b = (x, y)``,
    ``gamma = x^2 + y^3``.
    """
    tp = 2.0 * np.pi

    def p(x, y):
        return x**2 * y + np.sin(tp * x) * np.sin(tp * y) + 2.0

    def grad_p(x, y):
        px = 2 * x * y + tp * np.cos(tp * x) * np.sin(tp * y)
        py = x**2 + tp * np.sin(tp * x) * np.cos(tp * y)
        return px, py

    def hess_p(x, y):
        ss = np.sin(tp * x) * np.sin(tp * y)
        cc = np.cos(tp * x) * np.cos(tp * y)
        return 2 * y - tp**2 * ss, 2 * x + tp**2 * cc, -tp**2 * ss

    def kappa(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        k = np.empty(x.shape + (2, 2))
        k[..., 0, 0] = y**2 + 1
        k[..., 0, 1] = -x * y
        k[..., 1, 0] = -x * y
        k[..., 1, 1] = x**2 + 1
        return k

    def b(x, y):
        return x, y

    def gamma(x, y):
        return x**2 + y**3

    def u(x, y):
        px, py = grad_p(x, y)
        pv = p(x, y)
        ux = -((y**2 + 1) * px - x * y * py) + x * pv
        uy = -(-x * y * px + (x**2 + 1) * py) + y * pv
        return ux, uy

    def div_u(x, y):
        px, py = grad_p(x, y)
        pxx, pxy, pyy = hess_p(x, y)
        return (-(y**2 + 1) * pxx - (x**2 + 1) * pyy + 2 * x * y * pxy
                + 2 * x * px + 2 * y * py + 2 * p(x, y))

    def f(x, y):
        return div_u(x, y) + gamma(x, y) * p(x, y)

    return ManufacturedProblem(
        "benchmark",
        CoefficientSet(kappa, b, gamma, f, p),
        p, u, div_u, grad_p,
        "full-tensor diffusion, convection b=(x,y), reaction x^2+y^3",
    )


# p*, grad p*, laplacian p* for the patch tests, by degree.
_PATCH = {
    0: (lambda x, y: 1.0 + 0 * x,
        lambda x, y: (0 * x, 0 * x),
        lambda x, y: 0 * x),
    1: (lambda x, y: x + 2 * y,
        lambda x, y: (1.0 + 0 * x, 2.0 + 0 * x),
        lambda x, y: 0 * x),
    2: (lambda x, y: x**2,
        lambda x, y: (2 * x, 0 * x),
        lambda x, y: 2.0 + 0 * x),
    3: (lambda x, y: x**3 - 3 * x * y**2 + x * y + 1,
        lambda x, y: (3 * x**2 - 3 * y**2 + y, -6 * x * y + x),
        lambda x, y: 0 * x),
    4: (lambda x, y: x**4 + x**2 * y**2 - y**3 + 2,
        lambda x, y: (4 * x**3 + 2 * x * y**2, 2 * x**2 * y - 3 * y**2),
        lambda x, y: 12 * x**2 + 2 * y**2 + 2 * x**2 - 6 * y),
}


def patch_problem(k: int) -> ManufacturedProblem:
    """Polynomial solution of degree ``k`` with ``kappa = I``, ``b = 0``, ``gamma = 0``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    p, gp, lap = _PATCH[min(k, 4)]

    def u(x, y):
        gx, gy = gp(x, y)
        return -gx, -gy

    def f(x, y):
        return -lap(x, y)

    return ManufacturedProblem(
        f"patch-{k}",
        CoefficientSet(_identity, _zero_vec, _zero, f, p),
        p, u, f, gp,
        "polynomial patch test",
    )


PROBLEMS = {"benchmark": paper_benchmark}


def get_problem(name: str) -> ManufacturedProblem:
    if name in PROBLEMS:
        return PROBLEMS[name]()
    if name.startswith("patch-"):
        return patch_problem(int(name.split("-", 1)[1]))
    raise ValueError(f"unknown problem {name!r}; choose benchmark or patch-<k>")
