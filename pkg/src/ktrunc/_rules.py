"""Reference quadrature rules: graded Gauss panels and sphere rules."""

from functools import lru_cache
import math

import numpy as np
from scipy import special


@lru_cache(maxsize=None)
def _legendre(order):
    t, w = np.polynomial.legendre.leggauss(order)
    return (t + 1) / 2, w / 2


@lru_cache(maxsize=None)
def _jacobi_left(order, power):
    """Nodes/weights on [0, 1] for weight t**power (power > -1)."""
    x, w = special.roots_jacobi(order, 0.0, power)
    t = (x + 1) / 2
    return t, w / 2 ** (power + 1)


def _panels(levels, ratio):
    # panel edges on [0, 1/2], geometrically refined toward 0
    edges = [0.0] + [0.5 * ratio**j for j in range(levels, -1, -1)]
    return np.array(edges)


@lru_cache(maxsize=None)
def graded_segment(order, levels, ratio, left_power=None, left_levels=None):
    """Rule on [0, 1] graded geometrically toward both endpoints.

    If ``left_power`` is given, the innermost left panel integrates
    ``F(t) = G(t) * t**left_power`` with a Jacobi rule, assuming ``G`` is smooth;
    the returned weights already divide that factor back out, so the rule is
    applied to ``F`` like any other.  ``left_levels`` sets a separate (usually
    shallower) grading depth at the left end.
    """
    t0, w0 = _legendre(order)
    edges = _panels(levels, ratio)
    left_edges = edges if left_levels is None else _panels(left_levels, ratio)
    nodes, weights = [], []
    for a, b in zip(left_edges[:-1], left_edges[1:]):
        if a == 0.0 and left_power is not None:
            tj, wj = _jacobi_left(order, left_power)
            r = b * tj
            nodes.append(r)
            weights.append(wj * b ** (left_power + 1) / r**left_power)
        else:
            nodes.append(a + (b - a) * t0)
            weights.append((b - a) * w0)
    left_n = np.concatenate(nodes)
    left_w = np.concatenate(weights)
    right_n = 1.0 - np.concatenate([a + (b - a) * t0 for a, b in zip(edges[:-1], edges[1:])])
    right_w = np.concatenate([(b - a) * w0 for a, b in zip(edges[:-1], edges[1:])])
    n = np.concatenate([left_n, right_n[::-1]])
    w = np.concatenate([left_w, right_w[::-1]])
    return n, w


@lru_cache(maxsize=None)
def graded_left(order, levels, ratio, left_power):
    """Rule on [0, 1] graded toward 0 only, Jacobi-weighted innermost panel."""
    t0, w0 = _legendre(order)
    edges = np.array([0.0] + [ratio**j for j in range(levels, -1, -1)])
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if a == 0.0:
            tj, wj = _jacobi_left(order, left_power)
            r = b * tj
            nodes.append(r)
            weights.append(wj * b ** (left_power + 1) / r**left_power)
        else:
            nodes.append(a + (b - a) * t0)
            weights.append((b - a) * w0)
    return np.concatenate(nodes), np.concatenate(weights)


@lru_cache(maxsize=None)
def half_sphere(n, m):
    """Directions and weights on S^{n-1} for even integrands.

    ``sum(w * f(d))`` equals half of the full-sphere integral when
    ``f(d) = f(-d)``; the weights sum to omega_n / 2.
    """
    if n == 1:
        return np.ones((1, 1)), np.ones(1)
    if n == 2:
        th = (np.arange(m) + 0.5) * math.pi / m
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(m, math.pi / m)
    if n == 3:
        z, wz = _legendre(m)
        phi = (np.arange(2 * m) + 0.5) * math.pi / m
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        rho = np.sqrt(1 - zz**2)
        d = np.stack([rho * np.cos(pp), rho * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        w = (wz[:, None] * np.full(2 * m, math.pi / m)[None, :]).ravel()
        return d, w
    d, w = full_sphere(n, m)
    return d, w / 2


@lru_cache(maxsize=None)
def full_sphere(n, m):
    """Product Gauss rule on S^{n-1} (weights sum to omega_n)."""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    if n == 2:
        th = (np.arange(2 * m) + 0.5) * math.pi / m
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(2 * m, math.pi / m)
    a = (n - 3) / 2
    t, wt = special.roots_jacobi(m, a, a)
    sub_d, sub_w = full_sphere(n - 1, m)
    rho = np.sqrt(1 - t**2)
    d = np.concatenate([np.column_stack([np.full(len(sub_d), ti), ri * sub_d]) for ti, ri in zip(t, rho)])
    w = np.concatenate([wi * sub_w for wi in wt])
    return d, w
