"""Quadrature rules on the reference triangle in barycentric form.

Weights are normalised to sum to one, so a physical integral is
``area * sum(w * f(points))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = ["QuadratureRule", "strang_fix_7", "collapsed_gauss", "rule_for_degree", "map_points"]


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray  # (k, 3) barycentric coordinates
    weights: np.ndarray  # (k,)
    degree: int

    def __len__(self) -> int:
        return self.weights.shape[0]


@lru_cache(maxsize=None)
def strang_fix_7() -> QuadratureRule:
    """Seven-point rule with positive weights, exact through degree 5."""
    s15 = np.sqrt(15.0)
    a1 = (6.0 - s15) / 21.0
    a2 = (6.0 + s15) / 21.0
    w1 = (155.0 - s15) / 1200.0
    w2 = (155.0 + s15) / 1200.0
    pts = [(1 / 3, 1 / 3, 1 / 3)]
    wts = [9.0 / 40.0]
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        pts += [(b, a, a), (a, b, a), (a, a, b)]
        wts += [w, w, w]
    return QuadratureRule(np.array(pts), np.array(wts), 5)


@lru_cache(maxsize=None)
def collapsed_gauss(n: int) -> QuadratureRule:
    """Duffy-collapsed tensor Gauss rule with ``n*n`` points, exact through degree ``2n-1``.

    Gauss-Jacobi(1, 0) in the collapsed direction absorbs the Jacobian,
    so all weights are positive.
    """
    if n < 1:
        raise ValueError("need at least one point per direction")
    xs, ws = roots_legendre(n)
    ys, wy = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (xs + 1.0)
    t = 0.5 * (ys + 1.0)
    S, T = np.meshgrid(s, t)
    WS, WT = np.meshgrid(ws, wy)
    # (s, t) in the unit square -> (xi, eta) = (s (1-t), t)
    xi = (S * (1.0 - T)).ravel()
    eta = T.ravel()
    w = (WS * WT).ravel()
    w = w / w.sum()
    pts = np.column_stack([1.0 - xi - eta, xi, eta])
    return QuadratureRule(pts, w, 2 * n - 1)


def rule_for_degree(degree: int) -> QuadratureRule:
    """Cheapest rule here that integrates polynomials of ``degree`` exactly."""
    if degree <= 5:
        return strang_fix_7()
    return collapsed_gauss(int(np.ceil((degree + 1) / 2)))


def map_points(nodes: np.ndarray, triangles: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """Physical quadrature points, shape (T, k, 2)."""
    verts = nodes[triangles]  # (T, 3, 2)
    return np.einsum("kj,tjd->tkd", rule.points, verts)
