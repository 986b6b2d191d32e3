"""Polynomial bases on the reference triangle, physical subtriangles and edges."""

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import legvander

from staggered_dg.exceptions import ConfigError
from staggered_dg.fem.quadrature import triangle_rule


def dim_p(degree: int) -> int:
    """Dimension of P^degree in two variables (0 for negative degree)."""
    return (degree + 1) * (degree + 2) // 2 if degree >= 0 else 0


def monomial_exponents(degree: int) -> list[tuple[int, int]]:
    """Exponents (i, j) of x^i y^j ordered by total degree."""
    return [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]


def _monomials(xi: np.ndarray, exponents: list[tuple[int, int]]) -> np.ndarray:
    x, y = xi[..., 0], xi[..., 1]
    return np.stack([x**i * y**j for i, j in exponents], axis=-1)


def _monomial_gradients(xi: np.ndarray, exponents: list[tuple[int, int]]) -> np.ndarray:
    x, y = xi[..., 0], xi[..., 1]
    columns = []
    for i, j in exponents:
        dx = i * x ** max(i - 1, 0) * y**j if i > 0 else np.zeros_like(x)
        dy = j * x**i * y ** max(j - 1, 0) if j > 0 else np.zeros_like(y)
        columns.append(np.stack([dx, dy], axis=-1))
    return np.stack(columns, axis=-2)


class ReferenceBasis:
    """Orthonormal basis of P^k on the reference triangle.

    Monomials are orthonormalized by a Cholesky factor of their Gram matrix, so the
    first ``dim_p(m)`` functions span P^m for every m <= k.
    """

    def __init__(self, degree: int) -> None:
        if degree < 0:
            raise ConfigError(f"negative polynomial degree {degree}", key="k")
        self.degree = degree
        self.exponents = monomial_exponents(degree)
        rule = triangle_rule(max(2 * degree, 1))
        vander = _monomials(rule.points, self.exponents)
        gram = vander.T @ (rule.weights[:, None] * vander)
        factor = np.linalg.cholesky(gram)
        self._coeffs = np.linalg.inv(factor).T

    @property
    def dim(self) -> int:
        return len(self.exponents)

    def values(self, xi: np.ndarray) -> np.ndarray:
        """Basis values, shape (..., dim)."""
        return _monomials(xi, self.exponents) @ self._coeffs

    def gradients(self, xi: np.ndarray) -> np.ndarray:
        """Reference gradients, shape (..., dim, 2)."""
        return np.einsum("...mr,mj->...jr", _monomial_gradients(xi, self.exponents), self._coeffs)


@lru_cache(maxsize=None)
def reference_basis(degree: int) -> ReferenceBasis:
    """Shared reference basis of a degree."""
    return ReferenceBasis(degree)


class ScalarBasis:
    """Basis of P^k(τ) evaluated at physical points of one subtriangle."""

    def __init__(self, degree: int, vertices: np.ndarray) -> None:
        if degree < 1:
            raise ConfigError(f"degree must be >= 1, got {degree}", key="k")
        self.degree = degree
        self.vertices = np.asarray(vertices, dtype=float)
        self.origin = self.vertices[0]
        edges = [self.vertices[1] - self.origin, self.vertices[2] - self.origin]
        self.jac = np.stack(edges, axis=1)
        self.jinv = np.linalg.inv(self.jac)
        self.reference = reference_basis(degree)

    @property
    def dim(self) -> int:
        return self.reference.dim

    def to_reference(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.origin) @ self.jinv.T

    def values(self, x: np.ndarray) -> np.ndarray:
        """Values at physical points, shape (..., dim)."""
        return self.reference.values(self.to_reference(x))

    def gradients(self, x: np.ndarray) -> np.ndarray:
        """Physical gradients, shape (..., dim, 2)."""
        return self.reference.gradients(self.to_reference(x)) @ self.jinv


class BubbleSpace:
    """B^{k+1}(τ) = λ1 λ2 λ3 P^{k-2}(τ) on the reference triangle; empty for k = 1."""

    def __init__(self, degree: int) -> None:
        self.degree = degree
        self.factor = reference_basis(degree - 2) if degree >= 2 else None

    @property
    def dim(self) -> int:
        return self.factor.dim if self.factor is not None else 0

    def values(self, xi: np.ndarray) -> np.ndarray:
        """Bubble values, shape (..., dim)."""
        if self.factor is None:
            return np.zeros(xi.shape[:-1] + (0,))
        x, y = xi[..., 0], xi[..., 1]
        cubic = (1.0 - x - y) * x * y
        return cubic[..., None] * self.factor.values(xi)

    def gradients(self, xi: np.ndarray) -> np.ndarray:
        """Reference gradients, shape (..., dim, 2)."""
        if self.factor is None:
            return np.zeros(xi.shape[:-1] + (0, 2))
        x, y = xi[..., 0], xi[..., 1]
        cubic = (1.0 - x - y) * x * y
        d_cubic = np.stack([y * (1.0 - 2.0 * x - y), x * (1.0 - x - 2.0 * y)], axis=-1)
        return (
            d_cubic[..., None, :] * self.factor.values(xi)[..., None]
            + cubic[..., None, None] * self.factor.gradients(xi)
        )

    def curls(self, xi: np.ndarray, jinv: np.ndarray) -> np.ndarray:
        """Physical curls (∂_y b, -∂_x b) for a map with inverse Jacobian ``jinv``."""
        grad = self.gradients(xi)
        if jinv.ndim == 3:
            grad = np.einsum("...jr,crd->c...jd", grad, jinv)
        else:
            grad = grad @ jinv
        return np.stack([grad[..., 1], -grad[..., 0]], axis=-1)


def edge_legendre(s: np.ndarray, count: int) -> np.ndarray:
    """Legendre polynomials orthonormal on s ∈ [0, 1], shape (..., count)."""
    scale = np.sqrt(2.0 * np.arange(count) + 1.0)
    return legvander(2.0 * np.asarray(s) - 1.0, count - 1) * scale
