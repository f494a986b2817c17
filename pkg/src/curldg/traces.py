"""Facet trace calculus: jumps, weighted averages, and the Lie operators.

All jump operators take plus/minus traces and the fixed facet normal n (the
outward normal of the plus element, so n+ = n and n- = -n).  Inputs are
batched along the leading axis.  The 2D operators follow the rotated
(translational-symmetry) reduction with R = [[0, 1], [-1, 0]]: the vector
curl becomes the scalar div(R v), the tangential jump becomes the scalar
Rn+ . v+ + Rn- . v-, and scalar fluxes jump into vectors along Rn.
"""

from __future__ import annotations

import numpy as np

from .space import rot


def dot(a, b):
    return (a * b).sum(axis=-1)


def weighted_average(vp, vm, ap: float, am: float):
    """alpha+ v+ + alpha- v- for scalar or vector traces."""
    return ap * vp + am * vm


def oriented_jump(vp, vm):
    """[[v]]_F = v+ - v-."""
    return vp - vm


def normal_jump(vp, vm, n):
    """[v]_n = v+ . n+ + v- . n- (scalar)."""
    return dot(vp - vm, n)


def tangential_jump(vp, vm, n):
    """[[v]]_t = n+ x v+ + n- x v- (3D, vector)."""
    return np.cross(n, vp - vm)


def scalar_jump(sp, sm, n):
    """[[s]] = s+ n+ + s- n- (vector from scalar traces)."""
    return (sp - sm)[..., None] * n


def tangential_jump_2d(vp, vm, n):
    """[v]_t = Rn+ . v+ + Rn- . v- (scalar)."""
    return dot(vp - vm, rot(n))


def scalar_tangential_jump_2d(sp, sm, n):
    """[[s]]_t = Rn+ s+ + Rn- s- (vector from scalar traces)."""
    return (sp - sm)[..., None] * rot(n)


def weight_jump(ap: float, am: float, n):
    """[[alpha]] = alpha+ n+ + alpha- n- (vector)."""
    return (ap - am) * n


# -- Lie advection ---------------------------------------------------------


def lie_advection(values, jac, beta, beta_jac):
    """L_b u = (grad u) b + (grad b)^T u; identical in 2D and 3D.

    In 3D this equals -b x (curl u) + grad(b . u); in 2D it equals
    -Rb div(R u) + grad(b . u).  ``values`` (N, d), ``jac`` (N, d, d) with
    jac[q, a, b] = d u_a / d x_b, ``beta`` (N, d), ``beta_jac`` (N, d, d).
    """
    return np.einsum("qab,qb->qa", jac, beta) + np.einsum(
        "qba,qb->qa", beta_jac, values
    )


def lie_advection_dual(values, jac, beta, beta_jac):
    """Formal dual: -(div b) v + (grad b) v - (grad v) b.

    Equals curl(b x v) - b div v in 3D and -R grad(Rb . v) - b div v in 2D.
    """
    div_b = np.einsum("qaa->q", beta_jac)
    return (
        -div_b[:, None] * values
        + np.einsum("qab,qb->qa", beta_jac, values)
        - np.einsum("qab,qb->qa", jac, beta)
    )
