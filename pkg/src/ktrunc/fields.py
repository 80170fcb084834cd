"""Bounded scalar fields on R^N.

Catalog fields are analytic and expose what the quadrature needs: values,
derivatives when available, the radii along a ray where the field stops being
smooth, and (for the discontinuous fixtures) an exact per-region value of the
subspace integral.  Grid fields carry lattice values with a zero exterior.
"""

import json
import math

import numpy as np
from scipy import integrate, special

from . import _rules


class QuadratureRefusal(ValueError):
    """The field cannot be integrated reliably by the generic quadrature."""


class ScalarField:
    bound = math.inf
    dim = None
    smooth_interior = True
    discontinuous = False
    convex_profile = False
    # compact support: the field vanishes outside B(support_center, support_radius)
    support_center = None
    support_radius = math.inf
    scale = 1.0

    def __call__(self, x):
        raise NotImplementedError

    def gradient(self, x):
        return _fd_gradient(self, np.asarray(x, dtype=float))

    def hessian(self, x):
        return _fd_hessian(self, np.asarray(x, dtype=float))

    def ray_breaks(self, x, dirs):
        """Radii r > 0 where ``r -> u(x + r d)`` is not smooth, shape (n_dirs, m)."""
        return np.zeros((len(dirs), 0))

    def analytic_subspace_integral(self, x, V, s):
        """Unnormalized subspace integral (no C_{n,s}) if known in closed form."""
        return None

    def has_analytic_integral(self):
        return False

    def __neg__(self):
        return ScaledField(-1.0, self)

    def __mul__(self, a):
        return ScaledField(float(a), self)

    __rmul__ = __mul__

    def __add__(self, other):
        return SumField([self, other])

    def compact(self):
        return self.support_center is not None and math.isfinite(self.support_radius)


def _fd_gradient(u, x, h=1e-5):
    g = np.empty(len(x))
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        g[i] = (u(x + e) - u(x - e)) / (2 * h)
    return g


def _fd_hessian(u, x, h=1e-4):
    n = len(x)
    H = np.empty((n, n))
    u0 = u(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        H[i, i] = (u(x + ei) - 2 * u0 + u(x - ei)) / h**2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h
            H[i, j] = H[j, i] = (u(x + ei + ej) - u(x + ei - ej) - u(x - ei + ej) + u(x - ei - ej)) / (4 * h**2)
    return H


def sphere_crossings(x, dirs, center, R):
    """Positive radii at which x + r d crosses the sphere |y - center| = R."""
    y = np.asarray(x, dtype=float) - center
    b = dirs @ y
    disc = b**2 - (y @ y - R * R)
    root = np.sqrt(np.maximum(disc, 0.0))
    r1, r2 = -b - root, -b + root
    r1 = np.where((disc > 0) & (r1 > 0), r1, np.nan)
    r2 = np.where((disc > 0) & (r2 > 0), r2, np.nan)
    return np.stack([r1, r2], axis=1)


# --- radial profiles g(t), t = |x - center|^2 -------------------------------------

class Profile:
    """One-variable profile with its first two derivatives."""

    convex = False
    kink = None  # t at which the profile stops being smooth
    bound = 1.0
    scale = 1.0

    def g(self, t):
        raise NotImplementedError

    def dg(self, t):
        raise NotImplementedError

    def d2g(self, t):
        raise NotImplementedError


class ExpProfile(Profile):
    """a * exp(-alpha t)."""

    convex = True

    def __init__(self, alpha=1.0, a=1.0):
        if alpha <= 0 or a <= 0:
            raise ValueError("exp profile needs alpha > 0 and a > 0")
        self.alpha, self.a = float(alpha), float(a)
        self.bound = self.a
        self.scale = 1.0 / math.sqrt(self.alpha)

    def g(self, t):
        return self.a * np.exp(-self.alpha * t)

    def dg(self, t):
        return -self.alpha * self.g(t)

    def d2g(self, t):
        return self.alpha**2 * self.g(t)


class LiouvilleProfile(Profile):
    """alpha * (a^2 + t)^(-q); q = s/(p-1) for the power nonlinearity u^p, p > 1."""

    convex = True

    def __init__(self, q, a=1.0, alpha=1.0):
        if q <= 0 or a == 0 or alpha <= 0:
            raise ValueError("Liouville profile needs q > 0, a != 0, alpha > 0")
        self.q, self.a2, self.alpha = float(q), float(a) ** 2, float(alpha)
        self.bound = self.alpha * self.a2 ** (-self.q)
        self.scale = abs(float(a))

    def g(self, t):
        return self.alpha * (self.a2 + t) ** (-self.q)

    def dg(self, t):
        return -self.q * self.alpha * (self.a2 + t) ** (-self.q - 1)

    def d2g(self, t):
        return self.q * (self.q + 1) * self.alpha * (self.a2 + t) ** (-self.q - 2)


class PowerProfile(Profile):
    """alpha * (R^2 - t)_+^m; m = s/(1-p) for p in (0,1), m = s for the barrier."""

    def __init__(self, m, R=1.0, alpha=1.0):
        if m <= 0 or R <= 0 or alpha <= 0:
            raise ValueError("power profile needs m > 0, R > 0, alpha > 0")
        self.m, self.R2, self.alpha = float(m), float(R) ** 2, float(alpha)
        self.kink = self.R2
        self.convex = self.m >= 1.0
        self.bound = self.alpha * self.R2**self.m
        self.scale = float(R)

    def g(self, t):
        return self.alpha * np.maximum(self.R2 - t, 0.0) ** self.m

    def dg(self, t):
        q = np.maximum(self.R2 - t, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(q > 0, -self.m * self.alpha * q ** (self.m - 1), 0.0)

    def d2g(self, t):
        q = np.maximum(self.R2 - t, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(q > 0, self.m * (self.m - 1) * self.alpha * q ** (self.m - 2), 0.0)


class BumpProfile(Profile):
    """exp(-1/(1 - t)) for t < 1, else 0; smooth, flat at the unit sphere."""

    def __init__(self):
        self.kink = 1.0
        self.bound = math.exp(-1.0)

    def g(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(t < 1, np.exp(-1.0 / np.maximum(1 - t, 1e-300)), 0.0)

    def dg(self, t):
        q = 1 - np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.where(q > 0, -self.g(t) / np.maximum(q, 1e-300) ** 2, 0.0)

    def d2g(self, t):
        q = 1 - np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            qq = np.maximum(q, 1e-300)
            return np.where(q > 0, self.g(t) * (1 / qq**4 - 2 / qq**3), 0.0)


PROFILES = {
    "exp": ExpProfile,
    "liouville": LiouvilleProfile,
    "power": PowerProfile,
    "bump": BumpProfile,
}


class RadialField(ScalarField):
    """u(x) = g(|x - center|^2)."""

    def __init__(self, profile, center=None, dim=None):
        self.profile = profile
        self.center = None if center is None else np.asarray(center, dtype=float)
        self.dim = dim if center is None else len(self.center)
        self.bound = profile.bound
        self.scale = profile.scale
        self.convex_profile = profile.convex
        if profile.kink is not None:
            self.support_radius = math.sqrt(profile.kink)
            self.support_center = self.center

    def _c(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[-1]) if self.center is None else self.center

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = x - self._c(x)
        return self.profile.g(np.sum(y * y, axis=-1))

    def gradient(self, x):
        y = np.asarray(x, dtype=float) - self._c(x)
        return 2 * float(self.profile.dg(y @ y)) * y

    def hessian(self, x):
        y = np.asarray(x, dtype=float) - self._c(x)
        t = y @ y
        return 2 * float(self.profile.dg(t)) * np.eye(len(y)) + 4 * float(self.profile.d2g(t)) * np.outer(y, y)

    def ray_breaks(self, x, dirs):
        if self.profile.kink is None:
            return np.zeros((len(dirs), 0))
        return sphere_crossings(x, dirs, self._c(x), math.sqrt(self.profile.kink))

    def compact(self):
        return self.profile.kink is not None


class BarrierField(RadialField):
    """(R^2 - |x - center|^2)_+^s."""

    def __init__(self, R, s, center):
        super().__init__(PowerProfile(s, R), center=center)
        self.R, self.s = float(R), float(s)


def barrier_field(R, s, center):
    if R <= 0:
        raise ValueError("barrier radius must be positive")
    return BarrierField(R, s, center)


def radial_field(tag, center=None, dim=None, **params):
    """Catalog radial field by profile tag: exp, liouville, power, bump."""
    try:
        cls = PROFILES[tag]
    except KeyError:
        raise ValueError(f"unknown radial profile {tag!r}; known: {sorted(PROFILES)}") from None
    return RadialField(cls(**params), center=center, dim=dim)


class AnisotropicGaussian(ScalarField):
    """exp(-(x-c)^T A (x-c)) for symmetric positive definite A."""

    def __init__(self, A, center=None):
        self.A = np.asarray(A, dtype=float)
        self.dim = len(self.A)
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        self.bound = 1.0
        self.scale = 1.0 / math.sqrt(float(np.min(np.linalg.eigvalsh(self.A))))

    def __call__(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return np.exp(-np.einsum("...i,ij,...j->...", y, self.A, y))

    def gradient(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return -2 * float(self(x)) * (self.A @ y)

    def hessian(self, x):
        y = np.asarray(x, dtype=float) - self.center
        Ay = self.A @ y
        return float(self(x)) * (4 * np.outer(Ay, Ay) - 2 * self.A)


class SmpPhiField(ScalarField):
    """phi(x_N) with phi(t) = t^2/(1 + t^2): bounded, minimal along x_N = 0."""

    bound = 1.0

    def __init__(self, dim):
        self.dim = int(dim)

    def __call__(self, x):
        t = np.asarray(x, dtype=float)[..., -1]
        return t * t / (1 + t * t)

    def gradient(self, x):
        g = np.zeros(self.dim)
        t = float(np.asarray(x)[-1])
        g[-1] = 2 * t / (1 + t * t) ** 2
        return g

    def hessian(self, x):
        H = np.zeros((self.dim, self.dim))
        t = float(np.asarray(x)[-1])
        H[-1, -1] = (2 - 6 * t * t) / (1 + t * t) ** 3
        return H


class ConstantField(ScalarField):
    """u(x) = value everywhere."""

    def __init__(self, value, dim=None):
        self.value = float(value)
        self.dim = dim
        self.bound = abs(self.value)

    def __call__(self, x):
        return np.full(np.asarray(x).shape[:-1], self.value)

    def gradient(self, x):
        return np.zeros(len(x))

    def hessian(self, x):
        return np.zeros((len(x), len(x)))


class ScaledField(ScalarField):
    def __init__(self, a, base):
        self.a, self.base = float(a), base
        for attr in ("dim", "smooth_interior", "discontinuous", "support_center", "support_radius", "scale"):
            setattr(self, attr, getattr(base, attr))
        self.bound = abs(self.a) * base.bound
        self.convex_profile = base.convex_profile and self.a > 0

    def __call__(self, x):
        return self.a * self.base(x)

    def gradient(self, x):
        return self.a * self.base.gradient(x)

    def hessian(self, x):
        return self.a * self.base.hessian(x)

    def ray_breaks(self, x, dirs):
        return self.base.ray_breaks(x, dirs)

    def compact(self):
        return self.base.compact()

    def has_analytic_integral(self):
        return self.base.has_analytic_integral()

    def analytic_subspace_integral(self, x, V, s):
        v = self.base.analytic_subspace_integral(x, V, s)
        return None if v is None else self.a * v


class SumField(ScalarField):
    def __init__(self, parts):
        self.parts = list(parts)
        self.dim = next((p.dim for p in self.parts if p.dim is not None), None)
        self.bound = sum(p.bound for p in self.parts)
        self.discontinuous = any(p.discontinuous for p in self.parts)
        self.scale = max(p.scale for p in self.parts)
        if all(p.compact() for p in self.parts):
            c0 = self.parts[0].support_center
            self.support_center = c0
            self.support_radius = max(np.linalg.norm(p.support_center - c0) + p.support_radius for p in self.parts)

    def compact(self):
        return all(p.compact() for p in self.parts)

    def __call__(self, x):
        return sum(p(x) for p in self.parts)

    def gradient(self, x):
        return sum(p.gradient(x) for p in self.parts)

    def hessian(self, x):
        return sum(p.hessian(x) for p in self.parts)

    def ray_breaks(self, x, dirs):
        return np.concatenate([p.ray_breaks(x, dirs) for p in self.parts], axis=1)


class PullbackField(ScalarField):
    """x -> base(Q^T (x - shift)): the base field rotated by Q and translated."""

    def __init__(self, base, Q=None, shift=None):
        self.base = base
        n = base.dim
        self.Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
        self.shift = np.zeros(len(self.Q)) if shift is None else np.asarray(shift, dtype=float)
        self.dim = len(self.Q)
        for attr in ("bound", "smooth_interior", "discontinuous", "support_radius", "scale", "convex_profile"):
            setattr(self, attr, getattr(base, attr))
        if base.compact():
            self.support_center = self.Q @ base.support_center + self.shift

    def _pull(self, x):
        return (np.asarray(x, dtype=float) - self.shift) @ self.Q

    def compact(self):
        return self.base.compact()

    def __call__(self, x):
        return self.base(self._pull(x))

    def gradient(self, x):
        return self.Q @ self.base.gradient(self._pull(x))

    def hessian(self, x):
        return self.Q @ self.base.hessian(self._pull(x)) @ self.Q.T

    def ray_breaks(self, x, dirs):
        return self.base.ray_breaks(self._pull(x), dirs @ self.Q)


# --- discontinuous fixtures ---------------------------------------------------------

CONTAIN_TOL = 1e-12


def _in_coordinate_span(vectors, coords, N):
    """True if all ``vectors`` have (numerically) zero entries off ``coords``."""
    mask = np.ones(N, dtype=bool)
    mask[list(coords)] = False
    v = np.atleast_2d(vectors)
    return bool(np.all(np.abs(v[:, mask]) <= CONTAIN_TOL))


class BlockIndicatorField(ScalarField):
    """0 on the unit ball and on the coordinate block subspaces, ``off_value`` elsewhere."""

    discontinuous = True
    smooth_interior = True

    def __init__(self, partition, off_value, closed_ball):
        self.partition = partition
        self.dim = partition.ambient_dim
        self.off_value = float(off_value)
        self.closed_ball = closed_ball
        self.bound = abs(self.off_value)
        self._spans = [[j - 1 for j in A] for A in partition.block_sets()]

    def _on_zero_set(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r2 = np.sum(x * x, axis=-1)
        inside = r2 <= 1.0 if self.closed_ball else r2 < 1.0
        on_span = np.zeros(len(x), dtype=bool)
        for coords in self._spans:
            mask = np.ones(self.dim, dtype=bool)
            mask[coords] = False
            on_span |= np.all(x[:, mask] == 0.0, axis=-1)
        return inside | on_span

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(self._on_zero_set(x.reshape(-1, self.dim)), 0.0, self.off_value)
        return out.reshape(x.shape[:-1]) if x.ndim > 1 else float(out[0])

    def gradient(self, x):
        return np.zeros(self.dim)

    def hessian(self, x):
        if np.dot(x, x) >= 1.0:
            raise QuadratureRefusal("indicator fixture is only smooth inside the unit ball")
        return np.zeros((self.dim, self.dim))

    def has_analytic_integral(self):
        return True

    def analytic_subspace_integral(self, x, V, s, angular_nodes=64):
        x = np.asarray(x, dtype=float)
        V = np.atleast_2d(V)
        if x @ x >= 1.0:
            raise QuadratureRefusal("analytic decomposition needs x inside the unit ball")
        for coords in self._spans:
            if _in_coordinate_span(np.vstack([x, V]), coords, self.dim):
                return 0.0
        # the plane x + V meets the off-set in {|x + z| > 1} up to a null set
        n = len(V)
        dirs, w = _rules.half_sphere(n, angular_nodes)
        theta = dirs @ V
        rp = sphere_crossings(x, theta, np.zeros(self.dim), 1.0)[:, 1]
        rm = sphere_crossings(x, -theta, np.zeros(self.dim), 1.0)[:, 1]
        val = np.sum(w * (rp ** (-2 * s) + rm ** (-2 * s))) / (2 * s)
        return self.off_value * val


def discontinuity_example(partition):
    if partition.n_blocks == 1 and partition.ks[0] == partition.ambient_dim:
        raise ValueError("single full block reduces to the fractional Laplacian")
    return BlockIndicatorField(partition, off_value=-1.0, closed_ball=False)


def exp_integral_e(p, z):
    """E_p(z) = int_1^inf exp(-z r) r^(-p) dr for 1 < p < 3, z >= 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    zero = z <= 0
    out[zero] = 1.0 / (p - 1)
    zz = z[~zero]

    def e_low(q, zv):
        # 0 < q <= 1
        if abs(q - 1.0) < 1e-14:
            return special.exp1(zv)
        return zv ** (q - 1) * special.gammaincc(1 - q, zv) * special.gamma(1 - q)

    if min(abs(p - 1), abs(p - 2)) < 1e-2 and p != 2:
        # the recurrences below divide by p - 1 or p - 2; integrate directly
        f = lambda r, zv: math.exp(-zv * r) * r ** (-p)
        val = np.array([integrate.quad(f, 1, np.inf, args=(zv,), epsabs=0, epsrel=1e-13, limit=200)[0] for zv in zz])
    elif p <= 2:
        val = (np.exp(-zz) - zz * e_low(p - 1, zz)) / (p - 1)
    else:
        e1 = (np.exp(-zz) - zz * e_low(p - 2, zz)) / (p - 2)
        val = (np.exp(-zz) - zz * e1) / (p - 1)
    out[~zero] = val
    return out


class NonattainField(ScalarField):
    """exp(-x_N) on {x_N > 0, |x| > 1} (restricted to a coordinate subspace when l >= 2)."""

    discontinuous = True

    def __init__(self, partition):
        self.partition = partition
        N = self.dim = partition.ambient_dim
        self.bound = math.exp(-0.0)
        if partition.n_blocks == 1:
            self._zero_coords = []
        else:
            self._zero_coords = list(range(N - partition.ks[0] - 1))
        self._support = [j for j in range(N) if j not in self._zero_coords]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xn = x[..., -1]
        ok = (xn > 0) & (np.sum(x * x, axis=-1) > 1.0)
        if self._zero_coords:
            ok &= np.all(x[..., self._zero_coords] == 0.0, axis=-1)
        out = np.where(ok, np.exp(-np.where(ok, xn, 0.0)), 0.0)
        return out if out.ndim else float(out)

    def gradient(self, x):
        return np.zeros(self.dim)

    def hessian(self, x):
        return np.zeros((self.dim, self.dim))

    def has_analytic_integral(self):
        return True

    def analytic_subspace_integral(self, x, V, s, angular_nodes=256):
        x = np.asarray(x, dtype=float)
        if np.any(x != 0.0):
            raise QuadratureRefusal("the non-attainment fixture is decomposed at the origin only")
        V = np.atleast_2d(V)
        if not _in_coordinate_span(V, self._support, self.dim):
            return 0.0
        c = float(np.linalg.norm(V[:, -1]))
        if c <= CONTAIN_TOL:
            return 0.0
        return half_space_exp_integral(len(V), c, s, angular_nodes)


def half_space_exp_integral(n, c, s, m=256):
    """int over {|t| > 1, t_1 > 0} in R^n of exp(-c t_1) |t|^(-n-2s) dt."""
    p = 1 + 2 * s
    if n == 1:
        return float(exp_integral_e(p, np.array([c]))[0])
    # t_1 = r cos(phi): weight omega_{n-1} sin^{n-2}(phi) on phi in (0, pi/2)
    a, b = _rules._legendre(m)
    phi = 0.5 * math.pi * a
    wphi = 0.5 * math.pi * b
    from .kernels import sphere_measure
    ang = sphere_measure(n - 1) * np.sin(phi) ** (n - 2)
    return float(np.sum(wphi * ang * exp_integral_e(p, c * np.cos(phi))))


def nonattain_example(partition):
    return NonattainField(partition)


def smp_counterexamples(partition, kind):
    """Fixtures where the strong minimum principle (or its global form) fails.

    ``kind="i"``: phi(x_N), needs k < N.  ``kind="iv"``: the block indicator
    that vanishes on the closed unit ball, needs k = N and more than one block.
    """
    if kind == "i":
        if partition.k >= partition.ambient_dim:
            raise ValueError("the phi(x_N) fixture needs k < N")
        return SmpPhiField(partition.ambient_dim)
    if kind == "iv":
        if not (partition.k == partition.ambient_dim and partition.n_blocks > 1):
            raise ValueError("the indicator fixture needs k = N with more than one block")
        return BlockIndicatorField(partition, off_value=1.0, closed_ball=True)
    raise ValueError(f"unknown counterexample kind {kind!r}")


# --- domains and grid fields -------------------------------------------------------

BOUNDARY_SLACK = 1e-9


def _ball_exit(x, d, center, R):
    y = np.asarray(x, dtype=float) - center
    b = y @ d
    return -b + np.sqrt(np.maximum(b * b - (np.sum(y * y, axis=-1) - R * R), 0.0))


class Ball:
    kind = "ball"

    def __init__(self, center, R):
        self.center = np.asarray(center, dtype=float)
        self.R = float(R)
        if self.R <= 0:
            raise ValueError("ball radius must be positive")
        self.dim = len(self.center)

    @property
    def centers(self):
        return self.center[None, :]

    def contains(self, x):
        # points within rounding of the sphere count as boundary points
        return self.distance_to_boundary(x) > BOUNDARY_SLACK * self.R

    def distance_to_boundary(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return self.R - np.sqrt(np.sum(y * y, axis=-1))

    def bbox(self):
        return self.center - self.R, self.center + self.R

    def exit_distance(self, x, d):
        """Distance from interior points x along unit directions d to the boundary."""
        return _ball_exit(x, d, self.center, self.R)

    def diameter(self):
        return 2 * self.R

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "R": self.R}


class BallIntersection:
    """Uniformly convex domain: the intersection of the balls B_R(y), y in Y."""

    kind = "intersection"

    def __init__(self, Y, R):
        self.Y = np.atleast_2d(np.asarray(Y, dtype=float))
        self.R = float(R)
        if self.R <= 0 or len(self.Y) == 0:
            raise ValueError("intersection needs R > 0 and at least one center")
        self.dim = self.Y.shape[1]
        if np.max(np.linalg.norm(self.Y - self.Y[0], axis=1)) >= 2 * self.R:
            raise ValueError("balls do not overlap: empty intersection")

    @property
    def centers(self):
        return self.Y

    def contains(self, x):
        return self.distance_to_boundary(x) > BOUNDARY_SLACK * self.R

    def distance_to_boundary(self, x):
        x = np.asarray(x, dtype=float)
        d = np.sqrt(np.sum((x[..., None, :] - self.Y) ** 2, axis=-1))
        return np.min(self.R - d, axis=-1)

    def exit_distance(self, x, d):
        return np.min([_ball_exit(x, d, y, self.R) for y in self.Y], axis=0)

    def bbox(self):
        lo = np.max(self.Y - self.R, axis=0)
        hi = np.min(self.Y + self.R, axis=0)
        return lo, hi

    def diameter(self):
        lo, hi = self.bbox()
        return float(min(2 * self.R, np.linalg.norm(hi - lo)))

    def to_dict(self):
        return {"type": "intersection", "Y": self.Y.tolist(), "R": self.R}


class Box:
    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if np.any(self.hi <= self.lo):
            raise ValueError("box needs hi > lo")
        self.dim = len(self.lo)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all((x > self.lo) & (x < self.hi), axis=-1)

    def distance_to_boundary(self, x):
        x = np.asarray(x, dtype=float)
        return np.min(np.minimum(x - self.lo, self.hi - x), axis=-1)

    def bbox(self):
        return self.lo, self.hi

    def exit_distance(self, x, d):
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(d > 0, (self.hi - x) / d, np.where(d < 0, (self.lo - x) / d, np.inf))
        return np.min(t, axis=-1)

    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def to_dict(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


def domain_from_dict(d):
    kind = d.get("type")
    if kind == "ball":
        return Ball(d["center"], d["R"])
    if kind == "intersection":
        return BallIntersection(d["Y"], d["R"])
    if kind == "box":
        return Box(d["lo"], d["hi"])
    raise ValueError(f"unknown domain type {kind!r}")


class GridField(ScalarField):
    """Lattice values ``origin + h * index`` with the zero exterior rule."""

    smooth_interior = False

    def __init__(self, domain, h, origin, values):
        if not h > 0:
            raise ValueError("grid spacing must be positive")
        self.domain = domain
        self.h = float(h)
        self.origin = np.asarray(origin, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.dim = self.values.ndim
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")
        self.mask = domain.contains(self.nodes())
        if np.any(self.values[~self.mask] != 0.0):
            raise ValueError("exterior nodes must carry the value 0")
        self.bound = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        lo, hi = domain.bbox()
        self.support_center = (lo + hi) / 2
        self.support_radius = float(np.linalg.norm(hi - lo) / 2)

    @property
    def shape(self):
        return self.values.shape

    def nodes(self):
        axes = [self.origin[i] + self.h * np.arange(n) for i, n in enumerate(self.values.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def __call__(self, x):
        return grid_eval(self, x)

    def compact(self):
        return True

    def to_dict(self):
        return {"N": self.dim, "h": self.h, "origin": self.origin.tolist(),
                "shape": list(self.values.shape), "domain": self.domain.to_dict()}


def lattice_for(domain, h):
    """Origin and shape of the lattice covering the domain's bounding box."""
    lo, hi = domain.bbox()
    center = (lo + hi) / 2
    n = np.ceil((hi - lo) / (2 * h) - 1e-9).astype(int) + 1
    origin = center - h * n
    return origin, tuple(2 * n + 1)


def grid_sample(u, domain, h):
    if not h > 0:
        raise ValueError("grid spacing must be positive")
    origin, shape = lattice_for(domain, h)
    probe = GridField(domain, h, origin, np.zeros(shape))
    nodes = probe.nodes()
    vals = np.where(probe.mask, u(nodes), 0.0)
    return GridField(domain, h, origin, vals)


def grid_eval(g, x):
    """Multilinear interpolation inside the domain, exactly 0 outside."""
    x = np.asarray(x, dtype=float)
    pts = x.reshape(-1, g.dim)
    inside = g.domain.contains(pts)
    out = np.zeros(len(pts))
    if np.any(inside):
        p = pts[inside]
        f = (p - g.origin) / g.h
        i0 = np.floor(f).astype(int)
        shape = np.array(g.values.shape)
        i0 = np.clip(i0, 0, shape - 2)
        t = f - i0
        # snap to nodes so lattice points return stored values bit-exactly
        r = np.round(f)
        on_node = np.abs(f - r) <= 1e-12
        t = np.where(on_node, r - i0, t)
        acc = np.zeros(len(p))
        for corner in range(2 ** g.dim):
            bits = [(corner >> d) & 1 for d in range(g.dim)]
            w = np.ones(len(p))
            idx = []
            for d, b in enumerate(bits):
                w = w * (t[:, d] if b else 1 - t[:, d])
                idx.append(i0[:, d] + b)
            acc = acc + np.where(w != 0.0, w * g.values[tuple(idx)], 0.0)
        out[inside] = acc
    return out.reshape(x.shape[:-1]) if x.ndim > 1 else float(out[0])


def grid_csv_text(g):
    """CSV lattice dump: index columns and the value written with repr."""
    lines = [f"# N={g.dim}", f"# h={g.h!r}", f"# domain={json.dumps(g.domain.to_dict())}"]
    lines.append(",".join([f"i{d}" for d in range(g.dim)] + ["value"]))
    for idx in np.ndindex(*g.values.shape):
        lines.append(",".join([str(i) for i in idx] + [repr(float(g.values[idx]))]))
    return "\n".join(lines) + "\n"


def grid_json_text(g):
    return json.dumps(g.to_dict(), indent=2, sort_keys=True)


def save_grid(g, csv_path, json_path):
    """CSV lattice dump plus JSON metadata sidecar."""
    with open(csv_path, "w") as fh:
        fh.write(grid_csv_text(g))
    with open(json_path, "w") as fh:
        fh.write(grid_json_text(g))


def load_grid(csv_path, json_path):
    with open(json_path) as fh:
        meta = json.load(fh)
    values = np.zeros(meta["shape"])
    with open(csv_path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("i0"):
                continue
            parts = line.strip().split(",")
            idx = tuple(int(p) for p in parts[:-1])
            values[idx] = float(parts[-1])
    return GridField(domain_from_dict(meta["domain"]), meta["h"], meta["origin"], values)
