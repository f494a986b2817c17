"""Problem data and the five experiment presets.

A ProblemData bundles the coefficients of the magnetic advection-diffusion
model

    curl(eps curl u) - beta x (curl u) + grad(beta . u) + gamma u = f

(2D reduction: R grad(eps div(R u)) - R beta div(R u) + grad(beta . u) +
gamma u = f with R the quarter-turn matrix), together with the boundary
partition and the weak boundary data

    g_D = n x u + [inflow] (u . n) n            (2D: (Rn . u) Rn + ...)
    g_N = eps n x curl u + [inflow] (beta . n) u

Presets exp1/exp2 manufacture f and the boundary data symbolically from the
exact solutions; exp3/exp4/exp5 carry the literal data of the rotating-flow,
interior-layer and boundary-layer runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .mesh import SimplicialMesh, build_slit_mesh, build_uniform_mesh
from .quadrature import map_to_simplex, simplex_rule
from .space import rot

XY = sp.symbols("x y")
XYZ = sp.symbols("x y z")


def _vec_fn(exprs, syms) -> Callable:
    fns = [sp.lambdify(syms, e, "numpy") for e in exprs]

    def fn(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        args = [pts[:, i] for i in range(len(syms))]
        cols = [
            np.broadcast_to(np.asarray(f(*args), dtype=float), (pts.shape[0],))
            for f in fns
        ]
        return np.stack(cols, axis=1)

    return fn


def _scalar_fn(expr, syms) -> Callable:
    f = sp.lambdify(syms, expr, "numpy")

    def fn(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        args = [pts[:, i] for i in range(len(syms))]
        return np.broadcast_to(np.asarray(f(*args), dtype=float), (pts.shape[0],)).copy()

    return fn


def _mat_fn(mat, syms) -> Callable:
    d = mat.shape[0]
    fns = [[sp.lambdify(syms, mat[i, j], "numpy") for j in range(d)] for i in range(d)]

    def fn(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        args = [pts[:, i] for i in range(len(syms))]
        out = np.empty((n, d, d))
        for i in range(d):
            for j in range(d):
                out[:, i, j] = np.broadcast_to(
                    np.asarray(fns[i][j](*args), dtype=float), (n,)
                )
        return out

    return fn


@dataclass
class ProblemData:
    """Coefficients, boundary partition and data of one model problem."""

    name: str
    dim: int
    eps: float
    beta: Callable  # (N, d) -> (N, d)
    beta_jac: Callable  # (N, d) -> (N, d, d)
    gamma: Callable  # (N, d) -> (N,)
    f: Callable  # (N, d) -> (N, d)
    dirichlet: Callable  # (N, d) -> (N,) bool; True = Dirichlet
    g_d: Callable  # (pts, n, inflow) -> (N, d)
    g_n: Callable  # (pts, n, inflow) -> (N, d)
    exact: Optional[Callable] = None  # (N, d) -> (N, d)
    exact_curl: Optional[Callable] = None  # 3D: (N, 3); 2D: (N,)
    beta_const: Optional[np.ndarray] = None
    gamma_const: Optional[float] = None
    defaults: dict = field(default_factory=dict)
    mesh_builder: Optional[Callable] = None
    notes: str = ""

    def __post_init__(self):
        # eps = 0 is admitted so the pure-advection limit assembles; presets
        # always supply eps > 0
        if self.eps < 0:
            raise ValueError("diffusivity eps must be nonnegative")
        if self.mesh_builder is None:
            self.mesh_builder = lambda n: build_uniform_mesh(self.dim, n)


def _zero_bc(dim):
    def fn(pts, n, inflow):
        pts = np.atleast_2d(pts)
        return np.zeros((pts.shape[0], dim))

    return fn


def _all_dirichlet(pts):
    pts = np.atleast_2d(pts)
    return np.ones(pts.shape[0], dtype=bool)


def _plane_predicate(axes, tol=1e-10):
    """True where any coordinate in ``axes`` is 0 or 1."""

    def fn(pts):
        pts = np.atleast_2d(pts)
        hit = np.zeros(pts.shape[0], dtype=bool)
        for a in axes:
            hit |= np.abs(pts[:, a]) < tol
            hit |= np.abs(pts[:, a] - 1.0) < tol
        return hit

    return fn


def dirichlet_data_from_trace(u_d: Callable, dim: int) -> Callable:
    """Weak Dirichlet data from a prescribed boundary trace."""

    def g_d(pts, n, inflow):
        u = u_d(pts)
        if dim == 3:
            g = np.cross(np.broadcast_to(n, u.shape), u)
        else:
            rn = rot(n)
            g = (u @ rn)[:, None] * rn
        if inflow:
            g = g + (u @ n)[:, None] * n
        return g

    return g_d


def manufactured_problem(
    name: str,
    dim: int,
    eps: float,
    u_exprs,
    beta_exprs,
    gamma_expr,
    dirichlet,
    defaults=None,
    notes: str = "",
) -> ProblemData:
    """Build coefficients and boundary data from an exact solution."""
    syms = XYZ if dim == 3 else XY
    u = sp.Matrix([sp.sympify(e) for e in u_exprs])
    beta = sp.Matrix([sp.sympify(e) for e in beta_exprs])
    gamma = sp.sympify(gamma_expr)
    e = sp.Float(eps)

    if dim == 3:
        x, y, z = syms
        curl_u = sp.Matrix(
            [
                sp.diff(u[2], y) - sp.diff(u[1], z),
                sp.diff(u[0], z) - sp.diff(u[2], x),
                sp.diff(u[1], x) - sp.diff(u[0], y),
            ]
        )
        curl_ecurl = sp.Matrix(
            [
                sp.diff(e * curl_u[2], y) - sp.diff(e * curl_u[1], z),
                sp.diff(e * curl_u[0], z) - sp.diff(e * curl_u[2], x),
                sp.diff(e * curl_u[1], x) - sp.diff(e * curl_u[0], y),
            ]
        )
        grad_bu = sp.Matrix([sp.diff(beta.dot(u), s) for s in syms])
        f = curl_ecurl - beta.cross(curl_u) + grad_bu + gamma * u
        curl_fn = _vec_fn(list(curl_u), syms)
    else:
        x, y = syms
        div_ru = sp.diff(u[1], x) - sp.diff(u[0], y)
        rgrad = sp.Matrix([sp.diff(e * div_ru, y), -sp.diff(e * div_ru, x)])
        rbeta = sp.Matrix([beta[1], -beta[0]])
        grad_bu = sp.Matrix([sp.diff(beta.dot(u), s) for s in syms])
        f = rgrad - rbeta * div_ru + grad_bu + gamma * u
        curl_fn = _scalar_fn(div_ru, syms)

    u_fn = _vec_fn(list(u), syms)
    beta_fn = _vec_fn(list(beta), syms)
    beta_jac = _mat_fn(beta.jacobian(sp.Matrix(syms)), syms)
    beta_const = None
    if all(len(b.free_symbols) == 0 for b in beta):
        beta_const = np.array([float(b) for b in beta])
    gamma_const = float(gamma) if len(gamma.free_symbols) == 0 else None

    def g_n(pts, n, inflow):
        if dim == 3:
            g = eps * np.cross(np.broadcast_to(n, (pts.shape[0], 3)), curl_fn(pts))
        else:
            g = eps * curl_fn(pts)[:, None] * rot(n)
        if inflow:
            g = g + (beta_fn(pts) @ n)[:, None] * u_fn(pts)
        return g

    return ProblemData(
        name=name,
        dim=dim,
        eps=eps,
        beta=beta_fn,
        beta_jac=beta_jac,
        gamma=_scalar_fn(gamma, syms),
        f=_vec_fn(list(sp.simplify(f)), syms),
        dirichlet=dirichlet,
        g_d=dirichlet_data_from_trace(u_fn, dim),
        g_n=g_n,
        exact=u_fn,
        exact_curl=curl_fn,
        beta_const=beta_const,
        gamma_const=gamma_const,
        defaults=defaults or {},
        notes=notes,
    )


def data_problem(
    name: str,
    dim: int,
    eps: float,
    beta_exprs,
    gamma_expr,
    f_exprs,
    u_dirichlet: Callable,
    dirichlet=None,
    defaults=None,
    mesh_builder=None,
    notes: str = "",
) -> ProblemData:
    """Problem with literal forcing and a prescribed Dirichlet trace."""
    syms = XYZ if dim == 3 else XY
    beta = sp.Matrix([sp.sympify(e) for e in beta_exprs])
    beta_const = None
    if all(len(b.free_symbols) == 0 for b in beta):
        beta_const = np.array([float(b) for b in beta])
    gamma = sp.sympify(gamma_expr)
    return ProblemData(
        name=name,
        dim=dim,
        eps=eps,
        beta=_vec_fn(list(beta), syms),
        beta_jac=_mat_fn(beta.jacobian(sp.Matrix(syms)), syms),
        gamma=_scalar_fn(gamma, syms),
        f=_vec_fn([sp.sympify(e) for e in f_exprs], syms),
        dirichlet=dirichlet or _all_dirichlet,
        g_d=dirichlet_data_from_trace(u_dirichlet, dim),
        g_n=_zero_bc(dim),
        beta_const=beta_const,
        gamma_const=float(gamma) if len(gamma.free_symbols) == 0 else None,
        defaults=defaults or {},
        mesh_builder=mesh_builder,
        notes=notes,
    )


# -- presets -----------------------------------------------------------------

PRESET_NAMES = ("exp1", "exp2", "exp3", "exp4", "exp5")


def preset(name: str, eps: float | None = None) -> ProblemData:
    """The experiment presets; eps defaults to the value run in the paper
    for exp3/exp4 and must be given for the sweeps (exp1, exp2, exp5)."""
    if name == "exp1":
        if eps is None:
            raise ValueError("exp1 needs eps (sweeps 1, 1e-3, 1e-9)")
        return manufactured_problem(
            "exp1",
            3,
            eps,
            ("sin(y)", "sin(z)", "sin(x)"),
            ("1", "2", "3"),
            "0",
            dirichlet=_plane_predicate((0, 1)),
            defaults=dict(eta=100.0, tau=100.0, theta=1.0,
                          alpha=("signed", 1.0), alpha_d=("centered",)),
        )
    if name == "exp2":
        if eps is None:
            raise ValueError("exp2 needs eps (sweeps 1, 1e-3, 1e-9)")
        c = 1.0 if eps <= 1e-3 else 0.1
        return manufactured_problem(
            "exp2",
            2,
            eps,
            ("sin(y)", "sin(x)"),
            ("1", "1"),
            "0",
            dirichlet=_plane_predicate((1,)),
            defaults=dict(eta=10.0, tau=10.0, theta=1.0,
                          alpha=("signed", c), alpha_d=("centered",)),
        )
    if name == "exp3":
        eps = 1e-9 if eps is None else eps

        def u_slit(pts):
            pts = np.atleast_2d(pts)
            on = (np.abs(pts[:, 0] - 0.5) < 1e-9) & (pts[:, 1] <= 0.5 + 1e-9)
            s = np.sin(2 * np.pi * pts[:, 1]) ** 2
            val = np.where(on, s, 0.0)
            return np.stack([val, val], axis=1)

        return data_problem(
            "exp3",
            2,
            eps,
            ("y - 1/2", "1/2 - x"),
            "0",
            ("0", "0"),
            u_slit,
            defaults=dict(eta=10.0, tau=10.0, theta=1.0,
                          alpha=("signed", 1.0), alpha_d=("centered",)),
            mesh_builder=lambda n: build_slit_mesh(n),
            notes=(
                "rotating velocity field: closed streamlines and a stationary "
                "point at (1/2, 1/2); outside the no-closed-curves hypothesis"
            ),
        )
    if name == "exp4":
        eps = 1e-3 if eps is None else eps

        def u_layer(pts):
            pts = np.atleast_2d(pts)
            on = (np.abs(pts[:, 1]) < 1e-9) | (
                (np.abs(pts[:, 0]) < 1e-9) & (pts[:, 1] <= 0.2 + 1e-12)
            )
            val = np.where(on, 1.0, 0.0)
            return np.stack([val, val], axis=1)

        return data_problem(
            "exp4",
            2,
            eps,
            ("1/2", "sqrt(3)/2"),
            "0",
            ("0", "0"),
            u_layer,
            defaults=dict(eta=10.0, tau=0.1, theta=1.0,
                          alpha=("signed", 0.1), alpha_d=("centered",)),
        )
    if name == "exp5":
        if eps is None:
            raise ValueError("exp5 needs eps (sweeps 1e-3, 1e-9)")

        def u_zero(pts):
            pts = np.atleast_2d(pts)
            return np.zeros((pts.shape[0], 2))

        return data_problem(
            "exp5",
            2,
            eps,
            ("1", "2"),
            "0",
            ("1", "1"),
            u_zero,
            defaults=dict(eta=10.0, tau=10.0, theta=1.0,
                          alpha=("signed", 1.0), alpha_d=("centered",)),
        )
    raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


# -- effective reaction ------------------------------------------------------


def effective_reaction(problem: ProblemData, pts: np.ndarray) -> np.ndarray:
    """M(x) = (gamma - div beta / 2) I + (grad beta + grad beta^T) / 2."""
    pts = np.atleast_2d(pts)
    J = problem.beta_jac(pts)
    div = np.einsum("qaa->q", J)
    g = problem.gamma(pts)
    d = problem.dim
    M = (g - 0.5 * div)[:, None, None] * np.eye(d)[None, :, :]
    return M + 0.5 * (J + np.swapaxes(J, 1, 2))


def rho_values(problem: ProblemData, pts: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of the effective reaction matrix at each point."""
    return np.linalg.eigvalsh(effective_reaction(problem, pts))[:, 0]


@dataclass
class RhoBar:
    """Per-element minimum of rho(x); the Friedrichs positivity witness."""

    values: np.ndarray  # (ne,)
    min_value: float
    nonnegative: bool  # min >= -1e-12


def rho_bar(problem: ProblemData, mesh: SimplicialMesh, quad_degree: int = 4) -> RhoBar:
    rule = simplex_rule(mesh.dim, quad_degree)
    vals = np.empty(mesh.n_elements)
    for e in range(mesh.n_elements):
        pts, _ = map_to_simplex(rule, mesh.element_coords(e))
        pts = np.vstack([pts, mesh.element_coords(e)])
        vals[e] = rho_values(problem, pts).min()
    mn = float(vals.min())
    return RhoBar(vals, mn, mn >= -1e-12)
