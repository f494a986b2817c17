"""Quadrature rules on reference simplices and their facets.

Rules are built by collapsing tensor-product Gauss-Legendre points onto the
unit simplex (Duffy map).  That costs a few more points than optimal
symmetric rules but the exactness degree is guaranteed by construction, which
is what the assembly and the test oracles rely on.

Conventions: the unit d-simplex is {x in R^d : x_i >= 0, sum x_i <= 1};
weights sum to its measure 1/d!.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

MAX_DEGREE = 50


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on the unit simplex, exact to ``degree``."""

    dim: int
    points: np.ndarray  # (n, dim)
    weights: np.ndarray  # (n,)
    degree: int

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def _gauss01(m: int):
    # Gauss-Legendre on [0, 1]; exact for polynomials of degree 2m-1.
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def simplex_rule(dim: int, degree: int) -> QuadratureRule:
    """Rule on the unit ``dim``-simplex exact for polynomials of ``degree``.

    dim = 1, 2 or 3.  Raises for degree < 0 or degree > MAX_DEGREE.
    """
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(
            f"quadrature degree {degree} unsupported (supported: 0..{MAX_DEGREE})"
        )
    if dim == 1:
        m = max(1, (degree + 2) // 2)
        x, w = _gauss01(m)
        return QuadratureRule(1, x.reshape(-1, 1), w.copy(), degree)
    if dim == 2:
        # x = u(1-v), y = v; Jacobian (1-v).  Monomial x^a y^b pulls back to
        # degree a in u and a+b+1 in v, hence m covering degree+1 suffices.
        m = max(1, (degree + 3) // 2)
        u, wu = _gauss01(m)
        v, wv = _gauss01(m)
        U, V = np.meshgrid(u, v, indexing="ij")
        WU, WV = np.meshgrid(wu, wv, indexing="ij")
        x = (U * (1.0 - V)).ravel()
        y = V.ravel()
        w = (WU * WV * (1.0 - V)).ravel()
        return QuadratureRule(2, np.column_stack([x, y]), w, degree)
    if dim == 3:
        # x = u, y = v(1-u), z = w(1-u)(1-v); Jacobian (1-u)^2 (1-v).
        # Pullback degree in u is at most degree+2.
        m = max(1, (degree + 4) // 2)
        u, wu = _gauss01(m)
        U, V, W = np.meshgrid(u, u, u, indexing="ij")
        WU, WV, WW = np.meshgrid(wu, wu, wu, indexing="ij")
        x = U.ravel()
        y = (V * (1.0 - U)).ravel()
        z = (W * (1.0 - U) * (1.0 - V)).ravel()
        wq = (WU * WV * WW * (1.0 - U) ** 2 * (1.0 - V)).ravel()
        return QuadratureRule(3, np.column_stack([x, y, z]), wq, degree)
    raise ValueError(f"unsupported simplex dimension {dim}")


def map_to_simplex(rule: QuadratureRule, vertices: np.ndarray):
    """Push a reference rule onto the simplex spanned by ``vertices``.

    ``vertices`` has shape (dim+1, gdim) with gdim >= dim, so the same helper
    maps volume rules onto elements and facet rules onto (gdim-1)-facets.
    Returns (points (n, gdim), weights (n,)).
    """
    v0 = vertices[0]
    edges = vertices[1:] - v0  # (dim, gdim)
    pts = v0 + rule.points @ edges
    gram = edges @ edges.T
    scale = np.sqrt(max(np.linalg.det(gram), 0.0))
    return pts, rule.weights * scale


def simplex_measure(vertices: np.ndarray) -> float:
    """Measure of the simplex spanned by ``vertices`` ((dim+1, gdim))."""
    v0 = vertices[0]
    edges = vertices[1:] - v0
    gram = edges @ edges.T
    dim = edges.shape[0]
    return np.sqrt(max(np.linalg.det(gram), 0.0)) / factorial(dim)
