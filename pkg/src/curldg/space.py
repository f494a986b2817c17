"""Broken vector polynomial spaces on simplicial meshes.

Each element carries d * dim(P_k) degrees of freedom: a scalar polynomial per
vector component.  The scalar basis is an orthonormalized (against the
element L2 inner product) scaled monomial basis, so element mass matrices are
identities and L2 projections reduce to moment evaluation.  Orthonormalization
coefficients are cached per congruence class (translated copies of an element
share them), which is what makes assembly on uniform meshes cheap.
"""

from __future__ import annotations

from math import comb

import numpy as np
from scipy.linalg import solve_triangular

from .mesh import SimplicialMesh
from .quadrature import map_to_simplex, simplex_rule


def monomial_exponents(dim: int, degree: int) -> np.ndarray:
    """Graded-lexicographic exponent table for P_degree in dim variables."""
    exps = []
    if dim == 2:
        for total in range(degree + 1):
            for a in range(total, -1, -1):
                exps.append((a, total - a))
    else:
        for total in range(degree + 1):
            for a in range(total, -1, -1):
                for b in range(total - a, -1, -1):
                    exps.append((a, b, total - a - b))
    return np.array(exps, dtype=np.int64)


def rot(v: np.ndarray) -> np.ndarray:
    """Apply the clockwise quarter-turn R = [[0, 1], [-1, 0]] along axis -1."""
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


class DGSpace:
    """Vector-valued discontinuous space V_h^k over a simplicial mesh."""

    def __init__(self, mesh: SimplicialMesh, degree: int):
        if degree < 1:
            raise ValueError("polynomial degree must be >= 1")
        self.mesh = mesh
        self.degree = degree
        self.dim = mesh.dim
        self.exponents = monomial_exponents(self.dim, degree)
        self.n_scalar = comb(degree + self.dim, self.dim)
        assert self.n_scalar == len(self.exponents)
        self.n_loc = self.dim * self.n_scalar
        self.n_dofs = mesh.n_elements * self.n_loc

        self._class_of_elem = np.empty(mesh.n_elements, dtype=np.int64)
        self._class_coeff: list[np.ndarray] = []
        class_index: dict[bytes, int] = {}
        rule = simplex_rule(self.dim, 2 * degree)
        for e in range(mesh.n_elements):
            coords = mesh.element_coords(e)
            key = np.round(
                (coords - mesh.elem_centroid[e]) / mesh.elem_diameter[e], 12
            ).tobytes()
            idx = class_index.get(key)
            if idx is None:
                idx = len(self._class_coeff)
                class_index[key] = idx
                self._class_coeff.append(self._orthonormalize(e, rule))
            self._class_of_elem[e] = idx
        self._trace_cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}

    def _rel(self, e: int, pts: np.ndarray) -> np.ndarray:
        return (pts - self.mesh.elem_centroid[e]) / self.mesh.elem_diameter[e]

    def _vandermonde(self, rel: np.ndarray):
        # monomial values and gradients at relative coordinates (nq, dim)
        nq = rel.shape[0]
        powers = [
            np.vstack([np.ones(nq)] + [rel[:, a] ** p for p in range(1, self.degree + 1)])
            for a in range(self.dim)
        ]  # per axis: (degree+1, nq)
        V = np.ones((len(self.exponents), nq))
        G = np.zeros((len(self.exponents), self.dim, nq))
        for i, exp in enumerate(self.exponents):
            for a in range(self.dim):
                V[i] *= powers[a][exp[a]]
            for a in range(self.dim):
                if exp[a] == 0:
                    continue
                g = exp[a] * powers[a][exp[a] - 1]
                for b in range(self.dim):
                    if b != a:
                        g = g * powers[b][exp[b]]
                G[i, a] = g
        return V, G

    def _orthonormalize(self, e: int, rule) -> np.ndarray:
        pts, w = map_to_simplex(rule, self.mesh.element_coords(e))
        V, _ = self._vandermonde(self._rel(e, pts))
        M = (V * w) @ V.T
        L = np.linalg.cholesky(M)
        # basis = C @ monomials with C = L^{-1} gives an orthonormal basis
        return solve_triangular(L, np.eye(len(M)), lower=True)

    # -- evaluation -------------------------------------------------------

    def scalar_basis(self, e: int, pts: np.ndarray, cache_key=None):
        """Scalar basis values and physical gradients at points of element e.

        Returns (S, G) with S (n_scalar, nq) and G (n_scalar, dim, nq).
        ``cache_key`` memoizes traces that repeat across translated elements.
        """
        cls = int(self._class_of_elem[e])
        if cache_key is not None:
            key = (cls, cache_key)
            hit = self._trace_cache.get(key)
            if hit is not None:
                return hit
        rel = self._rel(e, pts)
        V, G = self._vandermonde(rel)
        C = self._class_coeff[cls]
        S = C @ V
        h = self.mesh.elem_diameter[e]
        Gp = np.einsum("ij,jaq->iaq", C, G) / h
        if cache_key is not None:
            self._trace_cache[(cls, cache_key)] = (S, Gp)
        return S, Gp

    def trace_key(self, e: int, pts: np.ndarray) -> bytes:
        return np.round(self._rel(e, pts), 12).tobytes()

    def dof_slice(self, e: int) -> slice:
        return slice(e * self.n_loc, (e + 1) * self.n_loc)

    def element_coeffs(self, coeffs: np.ndarray, e: int) -> np.ndarray:
        """Local coefficients reshaped to (dim, n_scalar)."""
        return coeffs[self.dof_slice(e)].reshape(self.dim, self.n_scalar)

    def zero_function(self) -> "DGFunction":
        return DGFunction(self, np.zeros(self.n_dofs))

    def random_function(self, rng) -> "DGFunction":
        """Unit-variance coefficients in the orthonormal basis."""
        return DGFunction(self, rng.standard_normal(self.n_dofs))


class DGFunction:
    """Coefficient vector over a DGSpace; evaluation is element-local."""

    def __init__(self, space: DGSpace, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.n_dofs,):
            raise ValueError(f"coefficient vector must have length {space.n_dofs}")
        self.space = space
        self.coeffs = coeffs

    def value(self, e: int, pts: np.ndarray, cache_key=None) -> np.ndarray:
        """Field values, shape (nq, dim)."""
        S, _ = self.space.scalar_basis(e, pts, cache_key)
        ce = self.space.element_coeffs(self.coeffs, e)
        return (ce @ S).T

    def jacobian(self, e: int, pts: np.ndarray, cache_key=None) -> np.ndarray:
        """Jacobian d u_a / d x_b, shape (nq, dim, dim)."""
        _, G = self.space.scalar_basis(e, pts, cache_key)
        ce = self.space.element_coeffs(self.coeffs, e)
        return np.einsum("ci,iaq->qca", ce, G)

    def curl(self, e: int, pts: np.ndarray, cache_key=None) -> np.ndarray:
        """Vector curl in 3D; the rotated divergence div(R u) (scalar) in 2D."""
        J = self.jacobian(e, pts, cache_key)
        if self.space.dim == 3:
            return np.stack(
                [
                    J[:, 2, 1] - J[:, 1, 2],
                    J[:, 0, 2] - J[:, 2, 0],
                    J[:, 1, 0] - J[:, 0, 1],
                ],
                axis=1,
            )
        return J[:, 1, 0] - J[:, 0, 1]

    def norm_l2(self) -> float:
        # orthonormal element bases make the mass matrix the identity
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other):
        return DGFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return DGFunction(self.space, self.coeffs - other.coeffs)

    def __mul__(self, a: float):
        return DGFunction(self.space, a * self.coeffs)

    __rmul__ = __mul__
