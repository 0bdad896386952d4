"""Scaled polynomial bases on polygons and edges.

Scalar monomials are centred at the element barycenter and scaled by the
element diameter, ``m_a(x) = ((x - x_B) / h_E) ** a``, in graded
lexicographic order ``1, X, Y, X^2, XY, Y^2, ...``.

Vector fields in ``(P_k)^2`` are stored as coefficient columns over the
"component monomial" basis ``[m_a e_x for a] + [m_a e_y for a]``. Every
vector basis used here has constant coefficients in that representation,
so the matrices below are independent of the element except for the
``1 / h_E`` factor in derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre


def dim_poly(k: int) -> int:
    """Dimension of P_k in two variables."""
    if k < 0:
        return 0
    return (k + 1) * (k + 2) // 2


def dim_grad(k: int) -> int:
    """Dimension of grad P_{k+1}."""
    return dim_poly(k + 1) - 1


def dim_grad_perp(k: int) -> int:
    return dim_poly(k - 1)


def monomial_exponents(k: int) -> np.ndarray:
    """Exponent pairs of P_k in graded lexicographic order, shape (n, 2)."""
    out = [(d - j, j) for d in range(k + 1) for j in range(d + 1)]
    return np.array(out, dtype=int).reshape(-1, 2)


def monomial_index(a: int, b: int) -> int:
    d = a + b
    return d * (d + 1) // 2 + b


@dataclass(frozen=True)
class ScaledMonomialBasis:
    center: tuple[float, float]
    diameter: float
    degree: int

    @cached_property
    def exponents(self) -> np.ndarray:
        return monomial_exponents(self.degree)

    @property
    def size(self) -> int:
        return dim_poly(self.degree)

    def scaled(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - np.asarray(self.center)) / self.diameter

    def eval(self, x: np.ndarray) -> np.ndarray:
        """Values of all monomials at points ``x`` (m, 2); returns (m, n)."""
        return _powers(self.scaled(x), self.degree)

    def grad(self, x: np.ndarray) -> np.ndarray:
        """Gradients at ``x``; returns (m, n, 2) in physical units."""
        s = self.scaled(x)
        pw = _powers(s, self.degree)
        e = self.exponents
        g = np.zeros(pw.shape + (2,))
        for i, (a, b) in enumerate(e):
            if a > 0:
                g[:, i, 0] = a * pw[:, monomial_index(a - 1, b)]
            if b > 0:
                g[:, i, 1] = b * pw[:, monomial_index(a, b - 1)]
        return g / self.diameter


def _powers(s: np.ndarray, k: int) -> np.ndarray:
    xs, ys = s[:, 0], s[:, 1]
    px = np.ones((len(s), k + 1))
    py = np.ones((len(s), k + 1))
    for d in range(1, k + 1):
        px[:, d] = px[:, d - 1] * xs
        py[:, d] = py[:, d - 1] * ys
    e = monomial_exponents(k)
    return px[:, e[:, 0]] * py[:, e[:, 1]]


def grad_coefficients(k: int) -> np.ndarray:
    """Columns ``h_E * grad m_a`` for ``1 <= |a| <= k+1`` over (P_k)^2."""
    n = dim_poly(k)
    cols = []
    for a, b in monomial_exponents(k + 1)[1:]:
        c = np.zeros(2 * n)
        if a > 0:
            c[monomial_index(a - 1, b)] = a
        if b > 0:
            c[n + monomial_index(a, b - 1)] = b
        cols.append(c)
    return np.array(cols).T.reshape(2 * n, -1)


def grad_perp_coefficients(k: int) -> np.ndarray:
    """Columns ``curl(r^2 m_a) / 2`` for ``|a| <= k-1``, with ``r^2 = X^2 + Y^2``.

    ``curl psi = (d_Y psi, -d_X psi)``. The fields are divergence-free and,
    since ``r^2 P_{k-1}`` contains no nonzero harmonic polynomial, they meet
    ``grad P_{k+1}`` only in zero. For ``k = 1`` this is ``(Y, -X)``.
    """
    n = dim_poly(k)
    cols = []
    for a, b in monomial_exponents(k - 1):
        c = np.zeros(2 * n)
        # psi = X^(a+2) Y^b + X^a Y^(b+2)
        if b > 0:
            c[monomial_index(a + 2, b - 1)] += 0.5 * b
        c[monomial_index(a, b + 1)] += 0.5 * (b + 2)
        c[n + monomial_index(a + 1, b)] -= 0.5 * (a + 2)
        if a > 0:
            c[n + monomial_index(a - 1, b + 2)] -= 0.5 * a
        cols.append(c)
    return np.array(cols).T.reshape(2 * n, -1)


def component_divergence(k: int) -> np.ndarray:
    """Divergence of component monomials into P_{k-1}, in units of 1/h_E.

    Shape (dim P_{k-1}, 2 dim P_k).
    """
    n = dim_poly(k)
    out = np.zeros((dim_poly(k - 1), 2 * n))
    for i, (a, b) in enumerate(monomial_exponents(k)):
        if a > 0:
            out[monomial_index(a - 1, b), i] = a
        if b > 0:
            out[monomial_index(a, b - 1), n + i] = b
    return out


@dataclass(frozen=True)
class VectorBasisDecomposition:
    """Basis of (P_k(E))^2 split as grad P_{k+1} plus a divergence-free complement.

    The complement is ``curl(r^2 P_{k-1})``; it is a divergence-free
    direct-sum complement but not the L2-orthogonal one, which is all the
    method needs.
    """

    center: tuple[float, float]
    diameter: float
    degree: int

    @cached_property
    def scalar(self) -> ScaledMonomialBasis:
        return ScaledMonomialBasis(self.center, self.diameter, self.degree)

    @cached_property
    def grad_coeffs(self) -> np.ndarray:
        return grad_coefficients(self.degree)

    @cached_property
    def perp_coeffs(self) -> np.ndarray:
        return grad_perp_coefficients(self.degree)

    @cached_property
    def coeffs(self) -> np.ndarray:
        """(2 dim P_k, (k+1)(k+2)) component coefficients of the full basis."""
        return np.hstack([self.grad_coeffs, self.perp_coeffs])

    @property
    def n_grad(self) -> int:
        return dim_grad(self.degree)

    @property
    def n_perp(self) -> int:
        return dim_grad_perp(self.degree)

    @property
    def size(self) -> int:
        return self.n_grad + self.n_perp

    def eval_components(self, x: np.ndarray) -> np.ndarray:
        """Values of the vector basis at ``x``; returns (m, 2, n_full)."""
        m = self.scalar.eval(x)
        n = self.scalar.size
        c = self.coeffs
        return np.stack([m @ c[:n], m @ c[n:]], axis=1)

    def eval(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        full = self.eval_components(x)
        return full[..., : self.n_grad], full[..., self.n_grad :], full

    def divergence_coeffs(self) -> np.ndarray:
        """Map full-basis coefficients to divergence coefficients in P_{k-1}."""
        return component_divergence(self.degree) @ self.coeffs / self.diameter

    def to_components(self, c: np.ndarray) -> np.ndarray:
        """Full-basis coefficients to component-monomial coefficients."""
        return self.coeffs @ c


def legendre_values(t: np.ndarray, k: int) -> np.ndarray:
    """Legendre polynomials L_0..L_k at parameters ``t`` in [-1, 1]; (m, k+1)."""
    return legendre.legvander(np.asarray(t, dtype=float), k)
