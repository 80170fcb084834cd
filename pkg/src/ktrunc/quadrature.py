"""Singular ray and subspace integrals.

Both integrals are computed in polar form around ``x``.  Each ray is cut at
the radii where the field stops being smooth, every piece is integrated with
Gauss panels graded toward its ends, and the piece touching the origin uses a
Jacobi rule matched to the ``r**(1-2s)`` behaviour of the symmetrized
integrand.  Beyond the truncation radius the tail is added analytically
(compactly supported fields) or through the substitution ``w = T/r``.
"""

from dataclasses import dataclass, replace
import math

import numpy as np

from . import _rules
from .fields import QuadratureRefusal
from .kernels import check_order, normalizing_constant, sphere_measure

CORE_LEVELS = 0

__all__ = [
    "QuadratureRefusal",
    "QuadratureSpec",
    "IntegralResult",
    "directional_integral",
    "subspace_integral",
    "tail_correction",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts and radii for the polar quadrature.

    ``core_radius`` is only used by ``pv_mode="split"``: inside that radius the
    integrand is built from ``surrogate`` (a C^2 field touching ``u`` at x).
    ``truncation_radius=None`` picks the support radius for compactly
    supported fields and a few length scales otherwise.
    """

    radial_order: int = 10
    radial_levels: int = 10
    grading_ratio: float = 0.25
    angular_nodes: int = 32
    truncation_radius: float = None
    core_radius: float = None
    pv_mode: str = "symmetric"
    surrogate: object = None
    estimate_error: bool = True

    def __post_init__(self):
        if self.radial_order < 4 or self.angular_nodes < 4:
            raise ValueError("node counts must be at least 4")
        if not 0 < self.grading_ratio < 1:
            raise ValueError("grading ratio must lie in (0, 1)")
        if self.pv_mode not in ("symmetric", "split"):
            raise ValueError(f"unknown pv_mode {self.pv_mode!r}")
        if self.pv_mode == "split":
            if self.surrogate is None or self.core_radius is None:
                raise ValueError("split mode needs a surrogate and a core radius")
            if self.truncation_radius is not None and not 0 < self.core_radius < self.truncation_radius:
                raise ValueError("need 0 < core_radius < truncation_radius")

    def coarse(self):
        """Roughly half the nodes in every direction, for error estimates."""
        return replace(
            self,
            radial_order=max(4, self.radial_order // 2),
            angular_nodes=max(4, self.angular_nodes // 2),
            estimate_error=False,
        )


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error_estimate: float
    tail_value: float

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error estimate must be non-negative")


def tail_correction(u_x, T, n, s, bound_info=None):
    """Exact contribution of ``{|z| > T}`` when u vanishes there (no C_{n,s}).

    ``bound_info`` may carry ``(support_center_distance, support_radius)`` to
    check that the field really vanishes beyond T.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if bound_info is not None:
        dist, radius = bound_info
        if T < dist + radius - 1e-12:
            raise ValueError("T is too small: the field does not vanish beyond it")
    return -u_x * sphere_measure(n) * T ** (-2 * s) / (2 * s)


def _value_at(u, x):
    v = float(u(x))
    if not math.isfinite(v):
        raise ValueError("field value at x is not finite")
    return v


def _check_smooth_at(u, x, spec):
    if spec.pv_mode == "split":
        return
    if not u.smooth_interior:
        raise QuadratureRefusal("field is not C^2 near x; supply a surrogate with pv_mode='split'")
    if u.compact() and getattr(u, "profile", None) is not None and u.profile.kink is not None:
        c = u.support_center if u.support_center is not None else np.zeros(len(x))
        if abs(np.linalg.norm(x - c) - u.support_radius) < 1e-12:
            raise QuadratureRefusal("x lies on the non-smooth set of the field")


def _support_reach(u, x):
    c = u.support_center if u.support_center is not None else np.zeros(len(x))
    return float(np.linalg.norm(x - c) + u.support_radius)


def _truncation(u, x, spec, minimum=0.0):
    if u.compact():
        reach = _support_reach(u, x)
        T = reach if spec.truncation_radius is None else max(spec.truncation_radius, reach)
        return max(T, minimum), True
    if spec.truncation_radius is not None:
        return max(spec.truncation_radius, minimum), False
    return max(np.linalg.norm(x) + 2.0 * u.scale, minimum), False


def _scale_breaks(u, T, n_rays):
    """Radii scale * 2^j (j >= -1) below T, so every panel sees at most one length scale."""
    sc = float(getattr(u, "scale", 1.0) or 1.0)
    radii = []
    r = sc / 2
    while r < T and len(radii) < 60:
        radii.append(r)
        r *= 2
    return np.tile(np.array(radii, dtype=float), (n_rays, 1))


def _segments(breaks, T):
    """Sorted segment edges per ray, padded with T: shape (n_rays, m + 2)."""
    b = np.where(np.isfinite(breaks) & (breaks > 0) & (breaks < T), breaks, T)
    b = np.sort(b, axis=1)
    z = np.zeros((len(b), 1))
    t = np.full((len(b), 1), T)
    return np.concatenate([z, b, t], axis=1)


def _radial_nodes(edges, spec, s):
    """Nodes and weights per ray for the segments ``edges``: (n_rays, M)."""
    # no grading at r = 0: the Jacobi panel already absorbs r**(1-2s), and
    # smaller panels only amplify the rounding error of u(x + r d) - u(x)
    first = _rules.graded_segment(
        spec.radial_order, spec.radial_levels, spec.grading_ratio, 1 - 2 * s, CORE_LEVELS
    )
    inner = _rules.graded_segment(spec.radial_order, spec.radial_levels, spec.grading_ratio)
    a, b = edges[:, :-1], edges[:, 1:]
    L = b - a
    r = [a[:, :1] + L[:, :1] * first[0]]
    w = [L[:, :1] * first[1]]
    if edges.shape[1] > 2:
        r.append((a[:, 1:, None] + L[:, 1:, None] * inner[0]).reshape(len(edges), -1))
        w.append((L[:, 1:, None] * inner[1]).reshape(len(edges), -1))
    return np.concatenate(r, axis=1), np.concatenate(w, axis=1)


def _eval_rays(u, x, theta, r):
    """u(x + r * theta) for rays theta (m, N) and radii r (m, M)."""
    pts = x + r[..., None] * theta[:, None, :]
    vals = np.asarray(u(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("field returned non-finite values")
    return vals


def _symmetric_rays(u, x, theta, s, spec):
    """Per-direction integrals of (u(x+r d)+u(x-r d)-2u(x)) r^{-1-2s} over (0, inf)."""
    ux = _value_at(u, x)
    T, exact_tail = _truncation(u, x, spec)
    split = spec.pv_mode == "split"
    breaks = np.concatenate(
        [u.ray_breaks(x, theta), u.ray_breaks(x, -theta), _scale_breaks(u, T, len(theta))], axis=1
    )
    if split:
        rho = min(spec.core_radius, T)
        breaks = np.concatenate([breaks, np.full((len(theta), 1), rho)], axis=1)
    edges = _segments(breaks, T)
    r, w = _radial_nodes(edges, spec, s)
    G = _eval_rays(u, x, theta, r) + _eval_rays(u, x, -theta, r) - 2 * ux
    if split:
        phi = spec.surrogate
        px = _value_at(phi, x)
        Gs = _eval_rays(phi, x, theta, r) + _eval_rays(phi, x, -theta, r) - 2 * px
        G = np.where(r < rho, Gs, G)
    body = np.sum(w * G * r ** (-1 - 2 * s), axis=1)
    if exact_tail:
        tail = np.full(len(theta), -2 * ux * T ** (-2 * s) / (2 * s))
    else:
        tail = _numeric_tail(u, x, theta, T, s, spec, lambda th, rr: (
            _eval_rays(u, x, th, rr) + _eval_rays(u, x, -th, rr) - 2 * ux))
    return body, tail


def _numeric_tail(u, x, theta, T, s, spec, G):
    """int_T^inf G(r) r^{-1-2s} dr = T^{-2s} int_0^1 G(T/w) w^{2s-1} dw per ray."""
    wn, ww = _rules.graded_left(spec.radial_order, spec.radial_levels, spec.grading_ratio, 2 * s - 1)
    rr = np.broadcast_to(T / wn, (len(theta), len(wn)))
    # the rule integrates F = G w^{2s-1}; its weights already divide w^{2s-1} out
    return T ** (-2 * s) * np.sum(ww * wn ** (2 * s - 1) * G(theta, rr), axis=1)


def subspace_integral(u, x, V, s, spec=None, constant=None):
    """C_{n,s} P.V. int_V (u(x+z) - u(x)) |z|^{-n-2s} dz for the block V (rows).

    ``constant`` overrides C_{n,s} (``constant=1`` gives the unnormalized value).
    """
    check_order(s)
    spec = spec or QuadratureSpec()
    x = np.asarray(x, dtype=float)
    V = np.atleast_2d(np.asarray(V, dtype=float))
    n = len(V)
    C = normalizing_constant(n, s) if constant is None else float(constant)
    if u.discontinuous:
        if not u.has_analytic_integral():
            raise QuadratureRefusal("generic quadrature is refused on discontinuous fields")
        return IntegralResult(C * u.analytic_subspace_integral(x, V, s), 0.0, 0.0)
    _check_smooth_at(u, x, spec)

    def run(sp):
        dirs, wd = _rules.half_sphere(n, sp.angular_nodes)
        body, tail = _symmetric_rays(u, x, dirs @ V, s, sp)
        return C * float(wd @ body), C * float(wd @ tail)

    body, tail = run(spec)
    value = body + tail
    err = 0.0
    if spec.estimate_error:
        cb, ct = run(spec.coarse())
        err = abs(value - (cb + ct))
    return IntegralResult(value, err, tail)


def directional_integral(u, x, xi, s, spec=None, constant=None):
    """C_{1,s} int_0^inf (u(x + t xi) - u(x)) t^{-1-2s} dt along one ray.

    The first-order term ``t * grad u(x).xi`` is subtracted on ``t < 1``.  For
    ``s < 1/2`` it is added back in closed form, so the value is the plain
    one-sided integral; for ``s >= 1/2`` the one-sided integral diverges when
    ``grad u(x).xi != 0`` and the compensated (first-order-free) value is
    returned.  In both cases the values for ``xi`` and ``-xi`` add up to the
    one-dimensional subspace integral.
    """
    check_order(s)
    spec = spec or QuadratureSpec()
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    C = normalizing_constant(1, s) if constant is None else float(constant)
    if u.discontinuous:
        raise QuadratureRefusal("one-sided integrals of discontinuous fields are not decomposed")
    _check_smooth_at(u, x, spec)
    ux = _value_at(u, x)
    probe = spec.surrogate if spec.pv_mode == "split" else u
    slope = float(probe.gradient(x) @ xi)

    def run(sp):
        T, exact_tail = _truncation(u, x, sp, minimum=1.0)
        theta = xi[None, :]
        extra = [[1.0]]
        if sp.pv_mode == "split":
            extra[0].append(min(sp.core_radius, T))
        breaks = np.concatenate([u.ray_breaks(x, theta), np.array(extra), _scale_breaks(u, T, 1)], axis=1)
        edges = _segments(breaks, T)
        r, w = _radial_nodes(edges, sp, s)
        vals = _eval_rays(u, x, theta, r) - ux
        if sp.pv_mode == "split":
            phi = sp.surrogate
            sv = _eval_rays(phi, x, theta, r) - _value_at(phi, x)
            vals = np.where(r < sp.core_radius, sv, vals)
        G = vals - np.where(r < 1.0, r * slope, 0.0)
        body = float(np.sum(w * G * r ** (-1 - 2 * s)))
        if exact_tail:
            tail = -ux * T ** (-2 * s) / (2 * s)
        else:
            tail = float(_numeric_tail(u, x, theta, T, s, sp, lambda th, rr: _eval_rays(u, x, th, rr) - ux)[0])
        if s < 0.5:
            body += slope / (1 - 2 * s)
        return C * body, C * tail

    body, tail = run(spec)
    value = body + tail
    err = 0.0
    if spec.estimate_error:
        cb, ct = run(spec.coarse())
        err = abs(value - (cb + ct))
    return IntegralResult(value, err, tail)
