"""Assembly of the weighted-residual DG scheme.

The bilinear form splits into a diffusion part

    a_d(u, v) = (eps curl u, curl v)
                - <{{eps curl u}}_ad, [[v]]_t>          (interior + Dirichlet)
                - theta <[[u]]_t, {{eps curl v}}_ad>
                + <eps eta/h_F [[u]]_t, [[v]]_t>

and a reaction-convection part

    a_rc(u, v) = (L_b u + gamma u, v)
                 + <[[b x u]]_t, {{v}}_{1-ad}>           (interior)
                 - <[u]_n, {b . v}_{1-a}>
                 + <[[u]]_t, {{b x v}}_a - {{b x v}}_ad>
                 + <tau |[[a - ad]]| [u]_n, [v]_n>
                 - <b . n, u . v>                        (inflow boundary)

with load F(v) = (f, v) + Dirichlet and Neumann data terms.  The 2D variant
is the faithful translational-symmetry reduction: curls become rotated
divergences, tangential jumps become the scalar [v]_t = Rn+.v+ + Rn-.v-, and
the coupling terms pick up the signs of the embedding (the theta terms enter
with + and the flux-jump term with -, so theta = 1 stays the symmetric
variant in both dimensions).

Matrix convention: A[i, j] = a(phi_j, phi_i) (rows are test functions), so
a(u, v) = v^T A u for coefficient vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sparse

from .mesh import FacetClass, SimplicialMesh
from .problems import ProblemData
from .quadrature import map_to_simplex, simplex_rule
from .space import DGFunction, DGSpace, rot
from . import traces


@dataclass(frozen=True)
class WeightRule:
    """Facet weight strategy: centered (1/2, 1/2) or signed upwinding
    alpha+- = (1 + c sgn(b . n+-)) / 2 (so b . [[alpha]] = c |b . n|)."""

    kind: str  # "centered" | "signed"
    c: float = 1.0

    def pair(self, sign_bn: float) -> tuple[float, float]:
        if self.kind == "centered":
            return 0.5, 0.5
        s = float(np.sign(sign_bn))
        return 0.5 * (1.0 + self.c * s), 0.5 * (1.0 - self.c * s)


def centered() -> WeightRule:
    return WeightRule("centered")


def signed(c: float = 1.0) -> WeightRule:
    return WeightRule("signed", c)


def compute_weights(sign_bn: float, rule: WeightRule) -> tuple[float, float]:
    """(alpha+, alpha-) for a facet with sgn(beta . n+) = sign_bn."""
    return rule.pair(sign_bn)


@dataclass
class SchemeParams:
    theta: float = 1.0
    eta: float = 10.0
    tau: float = 10.0
    alpha: WeightRule = field(default_factory=lambda: signed(1.0))
    alpha_d: WeightRule = field(default_factory=centered)
    quad_degree: Optional[int] = None  # default 2k + 2

    def __post_init__(self):
        if not -1.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [-1, 1]")
        if self.eta <= 0:
            raise ValueError("penalty eta must be positive")
        if self.tau < 0:
            raise ValueError("stabilization tau must be nonnegative")

    def qdeg(self, space: DGSpace) -> int:
        return self.quad_degree if self.quad_degree is not None else 2 * space.degree + 2


@dataclass
class SparseSystem:
    matrix: sparse.csr_matrix
    rhs: np.ndarray

    @property
    def n(self) -> int:
        return self.rhs.shape[0]


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add_block(self, test_dofs, trial_dofs, block):
        nl = len(test_dofs)
        self.rows.append(np.repeat(test_dofs, len(trial_dofs)))
        self.cols.append(np.tile(trial_dofs, nl))
        self.vals.append(block.ravel())

    def matrix(self, n) -> sparse.coo_matrix:
        if not self.rows:
            return sparse.coo_matrix((n, n))
        return sparse.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(n, n),
        )


def _facet_signs(mesh: SimplicialMesh, problem: ProblemData) -> np.ndarray:
    """sgn(beta . n_F) at facet centroids (classification convention)."""
    b = problem.beta(mesh.facet_centroid)
    return np.sign(np.einsum("fk,fk->f", b, mesh.facet_normal))


class _SideTraces:
    """Per-dof trace arrays of one element on a set of facet points.

    Layout: V (n_loc, nq, d) values; C (n_loc, nq, 3) curl in 3D or
    (n_loc, nq) rotated divergence in 2D.  Dof ordering is component-major,
    matching DGSpace.  Arrays are congruence-invariant, so they are memoized
    on the space keyed by (element class, relative point key).
    """

    def __init__(self, space: DGSpace, e: int, pts: np.ndarray):
        key = (int(space._class_of_elem[e]), space.trace_key(e, pts), "side")
        hit = space._trace_cache.get(key)
        if hit is not None:
            self.V, self.C, self.S, self.Gq = hit
            return
        d = space.dim
        nsc = space.n_scalar
        S, G = space.scalar_basis(e, pts, cache_key=space.trace_key(e, pts))
        nq = pts.shape[0]
        V = np.zeros((space.n_loc, nq, d))
        for c in range(d):
            V[c * nsc:(c + 1) * nsc, :, c] = S
        Gq = G.transpose(0, 2, 1)  # (n_sc, nq, d)
        if d == 3:
            C = np.zeros((space.n_loc, nq, 3))
            eye = np.eye(3)
            for c in range(3):
                C[c * nsc:(c + 1) * nsc] = np.cross(Gq, eye[c])
        else:
            C = np.zeros((space.n_loc, nq))
            C[0 * nsc:1 * nsc] = -Gq[:, :, 1]
            C[1 * nsc:2 * nsc] = Gq[:, :, 0]
        self.V = V
        self.C = C
        self.S = S
        self.Gq = Gq
        space._trace_cache[key] = (V, C, S, Gq)


def _ein_vec(X, Y, w):
    # sum_{q,k} X[j,q,k] w[q] Y[i,q,k] as a single matmul
    nl = Y.shape[0]
    Xw = (X * w[None, :, None]).reshape(X.shape[0], -1)
    return Y.reshape(nl, -1) @ Xw.T


def _ein_sc(X, Y, w):
    return (Y * w) @ X.T


def assemble_diffusion(space: DGSpace, problem: ProblemData, params: SchemeParams,
                       tags) -> sparse.coo_matrix:
    """The four diffusion terms over elements, interior and Dirichlet facets."""
    mesh = space.mesh
    eps, theta, eta = problem.eps, params.theta, params.eta
    d = mesh.dim
    trip = _Triplets()
    if eps == 0.0:
        return trip.matrix(space.n_dofs)

    vol_rule = simplex_rule(d, params.qdeg(space))
    vol_cache: dict[int, np.ndarray] = {}
    for e in range(mesh.n_elements):
        cls_id = int(space._class_of_elem[e])
        block = vol_cache.get(cls_id)
        if block is None:
            pts, w = map_to_simplex(vol_rule, mesh.element_coords(e))
            tr = _SideTraces(space, e, pts)
            block = eps * (_ein_vec(tr.C, tr.C, w) if d == 3 else _ein_sc(tr.C, tr.C, w))
            vol_cache[cls_id] = block
        dofs = np.arange(space.n_loc) + e * space.n_loc
        trip.add_block(dofs, dofs, block)

    f_rule = simplex_rule(d - 1, params.qdeg(space))
    signs = _facet_signs(mesh, problem)
    for f in range(mesh.n_facets):
        cls = tags[f].cls
        interior = cls is FacetClass.INTERIOR
        if not interior and not cls.is_dirichlet:
            continue
        pts, w = map_to_simplex(f_rule, mesh.facet_coords(f))
        n = mesh.facet_normal[f]
        hF = mesh.facet_diameter[f]
        if interior:
            elems = (int(mesh.facet_plus[f]), int(mesh.facet_minus[f]))
            normals = (n, -n)
            ad = params.alpha_d.pair(signs[f])
        else:
            elems = (int(mesh.facet_plus[f]),)
            normals = (n,)
            ad = (1.0,)  # boundary conventions: {{.}} := value
        side = [_SideTraces(space, e, pts) for e in elems]
        if d == 3:
            Tt = [np.cross(ns, s.V) for ns, s in zip(normals, side)]
        else:
            Tt = [s.V @ rot(ns) for ns, s in zip(normals, side)]
        sgn = 1.0 if d == 2 else -1.0  # embedding sign of the coupling terms
        Tt_all = np.concatenate(Tt)
        C_sc = np.concatenate([a * s.C for a, s in zip(ad, side)])
        ein = _ein_vec if d == 3 else _ein_sc
        blk = sgn * eps * ein(C_sc, Tt_all, w)
        blk += sgn * theta * eps * ein(Tt_all, C_sc, w)
        blk += eps * eta / hF * ein(Tt_all, Tt_all, w)
        dofs_all = np.concatenate(
            [np.arange(space.n_loc) + e * space.n_loc for e in elems]
        )
        trip.add_block(dofs_all, dofs_all, blk)
    return trip.matrix(space.n_dofs)


def assemble_reaction_convection(space: DGSpace, problem: ProblemData,
                                 params: SchemeParams, tags) -> sparse.coo_matrix:
    """Lie advection + reaction volume term, weighted facet terms, inflow term."""
    mesh = space.mesh
    d = mesh.dim
    nsc = space.n_scalar
    tau = params.tau
    trip = _Triplets()

    vol_rule = simplex_rule(d, params.qdeg(space))
    # translated elements share the volume block when the coefficients are
    # translation-invariant (constant beta and gamma)
    cacheable = problem.beta_const is not None and problem.gamma_const is not None
    vol_cache: dict[int, np.ndarray] = {}
    for e in range(mesh.n_elements):
        cls_id = int(space._class_of_elem[e])
        M = vol_cache.get(cls_id) if cacheable else None
        if M is None:
            pts, w = map_to_simplex(vol_rule, mesh.element_coords(e))
            tr = _SideTraces(space, e, pts)
            beta = problem.beta(pts)
            Jb = problem.beta_jac(pts)
            gam = problem.gamma(pts)
            nq = pts.shape[0]
            LB = np.zeros((space.n_loc, nq, d))
            bg = np.einsum("iqk,qk->iq", tr.Gq, beta)  # beta . grad(scalar basis)
            for c in range(d):
                blk = slice(c * nsc, (c + 1) * nsc)
                LB[blk, :, c] += bg
                LB[blk] += tr.S[:, :, None] * Jb[None, :, c, :]
            M = _ein_vec(LB, tr.V, w)
            M += _ein_vec(tr.V, tr.V, w * gam)
            if cacheable:
                vol_cache[cls_id] = M
        dofs = np.arange(space.n_loc) + e * space.n_loc
        trip.add_block(dofs, dofs, M)

    f_rule = simplex_rule(d - 1, params.qdeg(space))
    signs = _facet_signs(mesh, problem)
    for f in range(mesh.n_facets):
        cls = tags[f].cls
        pts, w = map_to_simplex(f_rule, mesh.facet_coords(f))
        n = mesh.facet_normal[f]
        if cls is FacetClass.INTERIOR:
            elems = (int(mesh.facet_plus[f]), int(mesh.facet_minus[f]))
            normals = (n, -n)
            a = params.alpha.pair(signs[f])
            ad = params.alpha_d.pair(signs[f])
            jmp_ad = abs((a[0] - ad[0]) - (a[1] - ad[1]))
            beta = problem.beta(pts)
            side = [_SideTraces(space, e, pts) for e in elems]
            Tn_all = np.concatenate([s.V @ ns for ns, s in zip(normals, side)])
            Bv_v = np.concatenate(
                [(1.0 - av) * np.einsum("iqk,qk->iq", s.V, beta)
                 for av, s in zip(a, side)]
            )
            if d == 3:
                Bx = [np.cross(beta[None, :, :], s.V) for s in side]
                TtB_all = np.concatenate(
                    [np.cross(ns, bx) for ns, bx in zip(normals, Bx)]
                )
                Tt_all = np.concatenate(
                    [np.cross(ns, s.V) for ns, s in zip(normals, side)]
                )
                V_v = np.concatenate([(1.0 - av) * s.V for av, s in zip(ad, side)])
                Bx_v = np.concatenate(
                    [(av - adv) * bx for av, adv, bx in zip(a, ad, Bx)]
                )
                blk = _ein_vec(TtB_all, V_v, w)
                blk += _ein_vec(Tt_all, Bx_v, w)
            else:
                rbeta = rot(beta)
                Sb = [np.einsum("iqk,qk->iq", s.V, rbeta) for s in side]
                Jt_all = np.concatenate(
                    [sb[:, :, None] * rot(ns)[None, None, :]
                     for sb, ns in zip(Sb, normals)]
                )
                Tt_all = np.concatenate(
                    [s.V @ rot(ns) for ns, s in zip(normals, side)]
                )
                V_v = np.concatenate([(1.0 - av) * s.V for av, s in zip(ad, side)])
                Sb_v = np.concatenate(
                    [(av - adv) * sb for av, adv, sb in zip(a, ad, Sb)]
                )
                blk = -_ein_vec(Jt_all, V_v, w)
                blk += _ein_sc(Tt_all, Sb_v, w)
            blk -= _ein_sc(Tn_all, Bv_v, w)
            if tau != 0.0 and jmp_ad != 0.0:
                blk += tau * jmp_ad * _ein_sc(Tn_all, Tn_all, w)
            dofs_all = np.concatenate(
                [np.arange(space.n_loc) + e * space.n_loc for e in elems]
            )
            trip.add_block(dofs_all, dofs_all, blk)
        elif cls.is_inflow:
            e = int(mesh.facet_plus[f])
            tr = _SideTraces(space, e, pts)
            bn = problem.beta(pts) @ n
            blk = -_ein_vec(tr.V, tr.V, w * bn)
            dofs = np.arange(space.n_loc) + e * space.n_loc
            trip.add_block(dofs, dofs, blk)
    return trip.matrix(space.n_dofs)


def assemble_rhs(space: DGSpace, problem: ProblemData, params: SchemeParams,
                 tags) -> np.ndarray:
    """Load vector: volume forcing plus weak Dirichlet/Neumann data terms."""
    mesh = space.mesh
    d = mesh.dim
    eps, theta, eta = problem.eps, params.theta, params.eta
    rhs = np.zeros(space.n_dofs)

    vol_rule = simplex_rule(d, params.qdeg(space))
    for e in range(mesh.n_elements):
        pts, w = map_to_simplex(vol_rule, mesh.element_coords(e))
        S, _ = space.scalar_basis(e, pts, cache_key=space.trace_key(e, pts))
        fv = problem.f(pts)
        loc = np.einsum("qc,iq,q->ci", fv, S, w).ravel()
        rhs[space.dof_slice(e)] += loc

    f_rule = simplex_rule(d - 1, params.qdeg(space))
    for f in mesh.boundary_facets:
        f = int(f)
        cls = tags[f].cls
        pts, w = map_to_simplex(f_rule, mesh.facet_coords(f))
        n = mesh.facet_normal[f]
        e = int(mesh.facet_plus[f])
        tr = _SideTraces(space, e, pts)
        dofs = space.dof_slice(e)
        if cls.is_neumann:
            gn = problem.g_n(pts, n, cls.is_inflow)
            rhs[dofs] -= np.einsum("iqk,qk,q->i", tr.V, gn, w)
            continue
        hF = mesh.facet_diameter[f]
        gd = problem.g_d(pts, n, cls.is_inflow)
        if d == 3:
            Tt = np.cross(n, tr.V)
            Ct = tr.C - np.einsum("iqk,k->iq", tr.C, n)[:, :, None] * n
            rhs[dofs] += eps * eta / hF * np.einsum("iqk,qk,q->i", Tt, gd, w)
            rhs[dofs] -= theta * eps * np.einsum("iqk,qk,q->i", Ct, gd, w)
            if cls.is_inflow:
                bn = problem.beta(pts) @ n
                pair = Tt + np.einsum("iqk,k->iq", tr.V, n)[:, :, None] * n
                rhs[dofs] -= np.einsum("iqk,qk,q->i", pair, gd, w * bn)
        else:
            rn = rot(n)
            Tt = np.einsum("iqk,k->iq", tr.V, rn)
            gt = gd @ rn
            rhs[dofs] += eps * eta / hF * np.einsum("iq,q,q->i", Tt, gt, w)
            rhs[dofs] += theta * eps * np.einsum("iq,q,q->i", tr.C, gt, w)
            if cls.is_inflow:
                bn = problem.beta(pts) @ n
                gnrm = gd @ n
                Vn = np.einsum("iqk,k->iq", tr.V, n)
                rhs[dofs] -= np.einsum("iq,q,q->i", Tt, gt, w * bn)
                rhs[dofs] -= np.einsum("iq,q,q->i", Vn, gnrm, w * bn)
    return rhs


def assemble_system(space: DGSpace, problem: ProblemData, params: SchemeParams,
                    tags) -> SparseSystem:
    A = (assemble_diffusion(space, problem, params, tags)
         + assemble_reaction_convection(space, problem, params, tags)).tocsr()
    b = assemble_rhs(space, problem, params, tags)
    return SparseSystem(A, b)


# -- matrix-free evaluation (verification path) ------------------------------


def apply_operator(space: DGSpace, problem: ProblemData, params: SchemeParams,
                   tags, u: DGFunction, v: DGFunction) -> float:
    """a_h(u, v) by direct quadrature on the two fields.

    Independent of the block assembly; used to cross-check assembled
    matrices (a_h(u, v) = v^T A u).
    """
    if u.space is not space or v.space is not space:
        raise ValueError("u and v must live in the given space")
    mesh = space.mesh
    d = mesh.dim
    eps, theta, eta, tau = problem.eps, params.theta, params.eta, params.tau
    total = 0.0

    vol_rule = simplex_rule(d, params.qdeg(space))
    for e in range(mesh.n_elements):
        pts, w = map_to_simplex(vol_rule, mesh.element_coords(e))
        key = space.trace_key(e, pts)
        uv, vv = u.value(e, pts, key), v.value(e, pts, key)
        cu, cv = u.curl(e, pts, key), v.curl(e, pts, key)
        beta = problem.beta(pts)
        Jb = problem.beta_jac(pts)
        gam = problem.gamma(pts)
        lie = traces.lie_advection(uv, u.jacobian(e, pts, key), beta, Jb)
        if d == 3:
            total += eps * float(np.einsum("qk,qk,q->", cu, cv, w))
        else:
            total += eps * float(np.einsum("q,q,q->", cu, cv, w))
        total += float(np.einsum("qk,qk,q->", lie + gam[:, None] * uv, vv, w))

    f_rule = simplex_rule(d - 1, params.qdeg(space))
    signs = _facet_signs(mesh, problem)
    for f in range(mesh.n_facets):
        cls = tags[f].cls
        pts, w = map_to_simplex(f_rule, mesh.facet_coords(f))
        n = mesh.facet_normal[f]
        hF = mesh.facet_diameter[f]
        ep = int(mesh.facet_plus[f])
        kp = space.trace_key(ep, pts)
        up, vp = u.value(ep, pts, kp), v.value(ep, pts, kp)
        cup, cvp = u.curl(ep, pts, kp), v.curl(ep, pts, kp)
        if cls is FacetClass.INTERIOR:
            em = int(mesh.facet_minus[f])
            km = space.trace_key(em, pts)
            um, vm = u.value(em, pts, km), v.value(em, pts, km)
            cum, cvm = u.curl(em, pts, km), v.curl(em, pts, km)
            a = params.alpha.pair(signs[f])
            ad = params.alpha_d.pair(signs[f])
            jmp_ad = abs((a[0] - ad[0]) - (a[1] - ad[1]))
            beta = problem.beta(pts)
            jn_u = traces.normal_jump(up, um, n)
            jn_v = traces.normal_jump(vp, vm, n)
            if d == 3:
                jt_u = traces.tangential_jump(up, um, n)
                jt_v = traces.tangential_jump(vp, vm, n)
                avg_cu = traces.weighted_average(cup, cum, *ad)
                avg_cv = traces.weighted_average(cvp, cvm, *ad)
                bx_up, bx_um = np.cross(beta, up), np.cross(beta, um)
                bx_vp, bx_vm = np.cross(beta, vp), np.cross(beta, vm)
                jt_bu = traces.tangential_jump(bx_up, bx_um, n)
                term = -eps * traces.dot(avg_cu, jt_v) - theta * eps * traces.dot(jt_u, avg_cv)
                term += eps * eta / hF * traces.dot(jt_u, jt_v)
                term += traces.dot(jt_bu, traces.weighted_average(vp, vm, 1 - ad[0], 1 - ad[1]))
                term += traces.dot(
                    jt_u,
                    traces.weighted_average(bx_vp, bx_vm, a[0] - ad[0], a[1] - ad[1]),
                )
            else:
                jt_u = traces.tangential_jump_2d(up, um, n)
                jt_v = traces.tangential_jump_2d(vp, vm, n)
                avg_cu = traces.weighted_average(cup, cum, *ad)
                avg_cv = traces.weighted_average(cvp, cvm, *ad)
                sb_up, sb_um = traces.dot(rot(beta), up), traces.dot(rot(beta), um)
                sb_vp, sb_vm = traces.dot(rot(beta), vp), traces.dot(rot(beta), vm)
                jt_bu = traces.scalar_tangential_jump_2d(sb_up, sb_um, n)
                term = eps * avg_cu * jt_v + theta * eps * jt_u * avg_cv
                term += eps * eta / hF * jt_u * jt_v
                term -= traces.dot(
                    jt_bu, traces.weighted_average(vp, vm, 1 - ad[0], 1 - ad[1])
                )
                term += jt_u * traces.weighted_average(sb_vp, sb_vm, a[0] - ad[0], a[1] - ad[1])
            bv = traces.dot(beta, np.stack([vp, vm]))  # (2, nq)
            term -= jn_u * traces.weighted_average(bv[0], bv[1], 1 - a[0], 1 - a[1])
            term += tau * jmp_ad * jn_u * jn_v
            total += float((term * w).sum())
        else:
            if cls.is_dirichlet and eps != 0.0:
                if d == 3:
                    jt_u = np.cross(n, up)
                    jt_v = np.cross(n, vp)
                    term = -eps * traces.dot(cup, jt_v) - theta * eps * traces.dot(jt_u, cvp)
                    term += eps * eta / hF * traces.dot(jt_u, jt_v)
                else:
                    jt_u = traces.dot(up, rot(n))
                    jt_v = traces.dot(vp, rot(n))
                    term = eps * cup * jt_v + theta * eps * jt_u * cvp
                    term += eps * eta / hF * jt_u * jt_v
                total += float((term * w).sum())
            if cls.is_inflow:
                bn = problem.beta(pts) @ n
                total -= float((bn * traces.dot(up, vp) * w).sum())
    return total
