"""Quadrature rules on the reference triangle (0,0),(1,0),(0,1) and on [-1, 1]."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from staggered_dg.exceptions import ConfigError

MAX_EXACTNESS = 48


@dataclass(frozen=True)
class QuadratureRule:
    """Points and positive weights; ``degree`` is the exactness actually attained."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self) -> int:
        return len(self.weights)


def _check(exactness: int) -> None:
    if not 1 <= exactness <= MAX_EXACTNESS:
        raise ConfigError(
            f"quadrature exactness {exactness} outside supported range 1..{MAX_EXACTNESS}",
            key="exactness",
        )


@lru_cache(maxsize=None)
def triangle_rule(exactness: int) -> QuadratureRule:
    """Rule on the reference triangle with weights summing to 1/2."""
    _check(exactness)
    if exactness == 1:
        return QuadratureRule(np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5]), 1)
    if exactness == 2:
        points = np.array([[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]])
        return QuadratureRule(points, np.full(3, 1.0 / 6.0), 2)
    # Collapsed (Duffy) tensor Gauss rule: x = u(1 - v), y = v, dx dy = (1 - v) du dv.
    n = (exactness + 3) // 2
    nodes, weights = leggauss(n)
    u = 0.5 * (nodes + 1.0)
    wu = 0.5 * weights
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu) * (1.0 - vv)
    points = np.stack([(uu * (1.0 - vv)).ravel(), vv.ravel()], axis=1)
    return QuadratureRule(points, ww.ravel(), 2 * n - 2)


@lru_cache(maxsize=None)
def edge_rule(exactness: int) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1] (weights sum to 2)."""
    _check(exactness)
    n = (exactness + 2) // 2
    nodes, weights = leggauss(n)
    return QuadratureRule(nodes, weights, 2 * n - 1)


def unit_interval(rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
    """Edge rule mapped to s ∈ [0, 1] with weights summing to 1."""
    return 0.5 * (rule.points + 1.0), 0.5 * rule.weights
