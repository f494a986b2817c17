"""DG energy norm, errors against exact solutions, and EOC tables.

The energy norm splits as |||v|||^2 = |||v|||_d^2 + |||v|||_rc^2 with

    |||v|||_d^2  = eps ||curl v||^2 + eps sum_{F not in Gamma_N} h_F^-1 ||[[v]]_t||_F^2
    |||v|||_rc^2 = ||(rho_bar + b0)^1/2 v||^2
                   + sum_{F in F_h} || |b.n|^1/2 [[v]]_F ||_F^2
                   + sum_{F interior} |[[alpha - alpha_d]]| ||[v]_n||_F^2

where boundary facets use the boundary trace conventions ([[v]]_F = v).
Fields are anything with element-local value/curl evaluation, so errors are
measured against exact solutions sampled at quadrature points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mesh import FacetClass
from .problems import ProblemData, rho_bar
from .quadrature import map_to_simplex, simplex_rule
from .scheme import SchemeParams, _facet_signs
from .space import DGFunction, DGSpace, rot
from . import traces


class ErrorField:
    """u_exact - u_h as an element-local field (values and curls)."""

    def __init__(self, u_h: DGFunction, exact, exact_curl):
        self.u_h = u_h
        self.exact = exact
        self.exact_curl = exact_curl

    def value(self, e, pts, key=None):
        return self.exact(pts) - self.u_h.value(e, pts, key)

    def curl(self, e, pts, key=None):
        return self.exact_curl(pts) - self.u_h.curl(e, pts, key)


@dataclass
class ErrorReport:
    h: float
    n_dofs: int
    energy: float
    energy_d: float
    energy_rc: float
    l2: float
    linf: float
    pieces: dict = field(default_factory=dict)


def energy_norm(space: DGSpace, problem: ProblemData, params: SchemeParams,
                fld, b0: float = 1.0, rho: Optional[np.ndarray] = None,
                tags=None) -> dict:
    """All pieces of the energy norm of an element-local field.

    Returns a dict with keys energy, energy_d, energy_rc, curl, tjump,
    weighted_l2, fjump, njump (each the squared-sum root).
    """
    if b0 <= 0:
        raise ValueError("b0 must be positive")
    mesh = space.mesh
    d = mesh.dim
    eps = problem.eps
    if rho is None:
        rho = rho_bar(problem, mesh).values
    qdeg = params.qdeg(space)

    curl2 = 0.0
    wl2 = 0.0
    vol_rule = simplex_rule(d, qdeg)
    for e in range(mesh.n_elements):
        pts, w = map_to_simplex(vol_rule, mesh.element_coords(e))
        key = space.trace_key(e, pts)
        v = fld.value(e, pts, key)
        c = fld.curl(e, pts, key)
        if d == 3:
            curl2 += float(np.einsum("qk,qk,q->", c, c, w))
        else:
            curl2 += float((c * c * w).sum())
        wl2 += (max(rho[e], 0.0) + b0) * float(np.einsum("qk,qk,q->", v, v, w))

    tj2 = 0.0
    fj2 = 0.0
    nj2 = 0.0
    f_rule = simplex_rule(d - 1, qdeg)
    signs = _facet_signs(mesh, problem)
    for f in range(mesh.n_facets):
        pts, w = map_to_simplex(f_rule, mesh.facet_coords(f))
        n = mesh.facet_normal[f]
        hF = mesh.facet_diameter[f]
        ep = int(mesh.facet_plus[f])
        kp = space.trace_key(ep, pts)
        vp = fld.value(ep, pts, kp)
        bn = problem.beta(pts) @ n
        interior = mesh.facet_minus[f] >= 0
        neumann = (
            tags is not None
            and tags[f].cls is not FacetClass.INTERIOR
            and tags[f].cls.is_neumann
        )
        if interior:
            em = int(mesh.facet_minus[f])
            vm = fld.value(em, pts, space.trace_key(em, pts))
            jf = traces.oriented_jump(vp, vm)
            jn = traces.normal_jump(vp, vm, n)
            if d == 3:
                jt = traces.tangential_jump(vp, vm, n)
                tj2 += float(np.einsum("qk,qk,q->", jt, jt, w)) / hF
            else:
                jt = traces.tangential_jump_2d(vp, vm, n)
                tj2 += float((jt * jt * w).sum()) / hF
            a = params.alpha.pair(signs[f])
            ad = params.alpha_d.pair(signs[f])
            jmp_ad = abs((a[0] - ad[0]) - (a[1] - ad[1]))
            nj2 += jmp_ad * float((jn * jn * w).sum())
            fj2 += float(np.einsum("qk,qk,q->", jf, jf, w * np.abs(bn)))
        else:
            fj2 += float(np.einsum("qk,qk,q->", vp, vp, w * np.abs(bn)))
            if not neumann:
                if d == 3:
                    jt = np.cross(n, vp)
                    tj2 += float(np.einsum("qk,qk,q->", jt, jt, w)) / hF
                else:
                    jt = traces.dot(vp, rot(n))
                    tj2 += float((jt * jt * w).sum()) / hF

    d2 = eps * (curl2 + tj2)
    rc2 = wl2 + fj2 + nj2
    return {
        "energy": np.sqrt(d2 + rc2),
        "energy_d": np.sqrt(d2),
        "energy_rc": np.sqrt(rc2),
        "curl": np.sqrt(curl2),
        "tjump": np.sqrt(tj2),
        "weighted_l2": np.sqrt(wl2),
        "fjump": np.sqrt(fj2),
        "njump": np.sqrt(nj2),
    }


def l2_error(space: DGSpace, fld, quad_degree: Optional[int] = None) -> float:
    mesh = space.mesh
    rule = simplex_rule(mesh.dim, quad_degree or 2 * space.degree + 2)
    acc = 0.0
    for e in range(mesh.n_elements):
        pts, w = map_to_simplex(rule, mesh.element_coords(e))
        v = fld.value(e, pts, space.trace_key(e, pts))
        acc += float(np.einsum("qk,qk,q->", v, v, w))
    return float(np.sqrt(acc))


def linf_error(space: DGSpace, fld, quad_degree: Optional[int] = None) -> float:
    mesh = space.mesh
    rule = simplex_rule(mesh.dim, quad_degree or 2 * space.degree + 2)
    worst = 0.0
    for e in range(mesh.n_elements):
        pts, _ = map_to_simplex(rule, mesh.element_coords(e))
        pts = np.vstack([pts, mesh.element_coords(e)])
        v = fld.value(e, pts, None)
        worst = max(worst, float(np.abs(v).max()))
    return worst


def eoc(errors) -> list[float]:
    """log2 rates of a mesh-halving error sequence; inf marks exact zeros."""
    errors = list(errors)
    if len(errors) < 2:
        raise ValueError("need at least two mesh levels")
    rates = []
    for a, b in zip(errors, errors[1:]):
        if b == 0.0 or a == 0.0:
            rates.append(float("inf"))
        else:
            rates.append(float(np.log2(a / b)))
    return rates


CSV_HEADER = ["h", "dofs", "energy", "energy_d", "energy_rc", "l2",
              "eoc_energy", "eoc_l2"]


def write_csv(path, reports: list[ErrorReport], meta: Optional[dict] = None):
    """EOC table with the documented stable schema."""
    energies = [r.energy for r in reports]
    l2s = [r.l2 for r in reports]
    r_e = [""] + [f"{r:.3f}" for r in eoc(energies)] if len(reports) > 1 else [""]
    r_l = [""] + [f"{r:.3f}" for r in eoc(l2s)] if len(reports) > 1 else [""]
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in sorted(meta.items())) + "\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for i, r in enumerate(reports):
            writer.writerow(
                [f"{r.h:.6g}", r.n_dofs, f"{r.energy:.10e}", f"{r.energy_d:.10e}",
                 f"{r.energy_rc:.10e}", f"{r.l2:.10e}", r_e[i], r_l[i]]
            )
