"""Zero-exterior Dirichlet problems, barrier envelopes, Hopf and eigenvalue bounds.

The discrete operator is the monotone lattice scheme of ``_lattice``: every
frame operator has positive off-diagonal weights, so the explicit Jacobi
update ``u <- u + dt (K u + c u - f)`` with ``dt (diag + |c^-|) <= 1`` is
monotone and nonexpansive, and its sup-norm residual never increases.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from scipy.special import gamma

from ._lattice import LatticeOperator
from .fields import (
    Ball,
    BallIntersection,
    ConstantField,
    ExpProfile,
    GridField,
    RadialField,
    ScalarField,
    barrier_field,
    lattice_for,
)
from .kernels import barrier_constant, normalizing_constant, sphere_measure
from .operators import OperatorSpec, representation_K_minus_radial
from .quadrature import QuadratureSpec, directional_integral, subspace_integral

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class RegimeError(ValueError):
    """The requested bound does not hold in this parameter regime."""


@dataclass
class SolverSettings:
    dt_safety: float = 0.9
    tol: float = 1e-8
    max_iter: int = 50000
    max_coord: int = 2

    def __post_init__(self):
        if not 0 < self.dt_safety <= 1:
            raise ValueError("dt_safety must lie in (0, 1]")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("need tol > 0 and max_iter >= 1")


def _as_field(v):
    if v is None or isinstance(v, ScalarField):
        return v
    if callable(v):
        return v
    return ConstantField(v)


def diameter(domain):
    return domain.diameter()


def smallness_bound(partition, s, domain):
    """sum_i C_{k_i,s} (1/2s) diam^{-2s}: the admissible size of c^+."""
    return sum(normalizing_constant(k, s) for k in partition.ks) / (2 * s) * diameter(domain) ** (-2 * s)


@dataclass
class DirichletProblem:
    domain: object
    spec: OperatorSpec
    f: object
    h: float
    c: object = None
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if not isinstance(self.domain, (Ball, BallIntersection)):
            raise ValueError("domain must be a ball or an intersection of balls")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if self.domain.dim != self.spec.partition.ambient_dim:
            raise ValueError("domain and partition live in different dimensions")
        if self.domain.diameter() / self.h < 16:
            raise ValueError("grid too coarse: need at least 17 nodes per diameter")
        self.f = _as_field(self.f)
        self.c = _as_field(self.c)
        if self.c is not None:
            nodes = self.nodes()[self.mask]
            cplus = float(np.max(np.maximum(self.c(nodes), 0.0), initial=0.0))
            bound = smallness_bound(self.spec.partition, self.spec.s, self.domain)
            if not cplus < bound:
                raise ValueError(f"sup c^+ = {cplus:.6g} violates the smallness bound {bound:.6g}")

    def lattice(self):
        return lattice_for(self.domain, self.h)

    def nodes(self):
        origin, shape = self.lattice()
        return GridField(self.domain, self.h, origin, np.zeros(shape)).nodes()

    @property
    def mask(self):
        return self.domain.contains(self.nodes())

    def f_values(self):
        return np.asarray(self.f(self.nodes()[self.mask]), dtype=float)

    def c_values(self):
        if self.c is None:
            return np.zeros(int(self.mask.sum()))
        return np.asarray(self.c(self.nodes()[self.mask]), dtype=float)

    def operator(self):
        p = self.spec
        return LatticeOperator(self.nodes(), self.domain, self.h, p.partition, p.s, p.sign, self.solver.max_coord)


@dataclass
class SolveReport:
    solution: GridField
    iterations: int
    residual_sup: float
    envelope_violations: int
    hopf_constant: float = None
    residual_history: list = field(default_factory=list)
    converged: bool = True
    envelope_scale: float = 0.0
    envelope_radius: float = 0.0

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "residual_sup": self.residual_sup,
            "envelope_violations": self.envelope_violations,
            "hopf_constant": self.hopf_constant,
            "converged": self.converged,
            "envelope_scale": self.envelope_scale,
            "envelope_radius": self.envelope_radius,
            "residual_history": list(self.residual_history),
        }


def _centers(domain):
    return domain.centers


def _barrier_min(domain, s, x, R=None):
    R = domain.R if R is None else R
    vals = [barrier_field(R, s, y)(x) for y in _centers(domain)]
    return np.min(vals, axis=0)


def envelope_scale(problem):
    """Scale M of the barrier envelope as given by the continuous identity."""
    fmax = float(np.max(np.abs(problem.f_values()), initial=0.0))
    p = problem.spec
    return fmax / (-barrier_constant(p.partition.ks, p.s))


ENLARGEMENTS = (0.0, 0.5, 1.0, 2.0, 4.0)


def discrete_envelope(problem, op=None):
    """(M_h, R_h): a barrier envelope certified on the lattice scheme.

    The scheme only approximates the barrier identity, and next to the
    boundary the sharp (R^2 - |x|^2)^s profile can even give a positive
    discrete value.  The barrier on the slightly larger balls B_{R_h}(y),
    R_h = R + kappa h, satisfies the same identity; the smallest listed kappa
    for which the discrete plus operator is strictly negative on every
    interior node is used, with M_h = sup|f| / min(-K_h b).  By discrete
    comparison the solution then lies between -M_h b and M_h b.
    """
    fmax = float(np.max(np.abs(problem.f_values()), initial=0.0))
    R = problem.domain.R
    if fmax == 0.0:
        return 0.0, R
    op = op or problem.operator()
    nodes = problem.nodes()[problem.mask]
    cplus = np.maximum(problem.c_values(), 0.0)
    s = problem.spec.s
    for kappa in ENLARGEMENTS:
        Rh = R + kappa * problem.h
        b = _barrier_min(problem.domain, s, nodes, Rh)
        # both envelopes need the plus operator: K^-(-v) = -K^+(v); the min
        # over centres keeps the plus operator below each single barrier's
        val = np.max([op.extremal(barrier_field(Rh, s, y)(nodes), "plus") for y in _centers(problem.domain)], axis=0)
        val = val + cplus * b
        margin = float(-np.max(val))
        if margin > 0:
            return fmax / margin, Rh
    raise ValueError("no enlarged barrier is a strict discrete supersolution on this grid")


def barrier_envelope(problem, discrete=False):
    """(sub, super) with super = inf_y M (R^2 - |x - y|^2)^s_+ and sub = -super.

    ``discrete=True`` returns the lattice-certified envelope instead.
    """
    M, R = envelope_scale(problem), problem.domain.R
    if discrete:
        M, R = discrete_envelope(problem)
    dom, s = problem.domain, problem.spec.s

    def sup(x):
        x = np.asarray(x, dtype=float)
        return np.where(dom.contains(x), M * _barrier_min(dom, s, x, R), 0.0)

    def sub(x):
        return -sup(x)

    return sub, sup


def solve_dirichlet(problem, op=None, init=None):
    """Explicit pseudo-time iteration to the discrete fixed point K u + c u = f."""
    op = op or problem.operator()
    settings = problem.solver
    f = problem.f_values()
    c = problem.c_values()
    cminus = float(np.max(np.maximum(-c, 0.0), initial=0.0))
    lam = op.diagonal + cminus
    dt = settings.dt_safety / lam
    nodes = problem.nodes()
    inner = nodes[problem.mask]
    M, Rh = discrete_envelope(problem, op)
    sup_env = M * _barrier_min(problem.domain, problem.spec.s, inner, Rh)
    u = -sup_env.copy() if init is None else np.array(init, dtype=float)
    history = []
    res = np.inf
    it = 0
    scale = max(1.0, float(np.max(np.abs(f), initial=0.0)))
    for it in range(1, settings.max_iter + 1):
        r = op.apply(u) + c * u - f
        res = float(np.max(np.abs(r), initial=0.0))
        history.append(res)
        if res <= settings.tol * scale:
            break
        u = u + dt * r
    converged = res <= settings.tol * scale
    values = np.zeros(problem.mask.shape)
    values[problem.mask] = u
    origin, _ = problem.lattice()
    grid = GridField(problem.domain, problem.h, origin, values)
    env_tol = 1e-6 * max(1.0, M)
    viol = int(np.sum((u > sup_env + env_tol) | (u < -sup_env - env_tol)))
    report = SolveReport(grid, it, res, viol, None, history, converged, M, Rh)
    log.info("solve: %d iterations, residual %.3e, %d envelope violations", it, res, viol)
    if not converged:
        raise NonConvergence(f"no convergence in {settings.max_iter} iterations (residual {res:.3e})", report)
    return report


def hopf_fit(report, problem):
    """min over interior nodes of u(x) / d(x)^s for a solve with f <= 0, f != 0."""
    p = problem.spec
    if p.sign == "minus" and p.partition.k < p.partition.ambient_dim:
        raise RegimeError("the boundary growth bound fails for the minus operator with k < N")
    f = problem.f_values()
    if np.any(f > 0) or not np.any(f < 0):
        raise ValueError("the boundary growth bound needs f <= 0 and f != 0")
    nodes = report.solution.nodes()[problem.mask]
    u = report.solution.values[problem.mask]
    d = problem.domain.distance_to_boundary(nodes)
    c_hat = float(np.min(u / d**p.s))
    report.hopf_constant = c_hat
    return c_hat


# eigenvalue bounds ----------------------------------------------------------------

@dataclass
class EigenEstimate:
    mu_upper: float
    mu_lower: float
    witness: dict = field(default_factory=dict)

    def __post_init__(self):
        if math.isfinite(self.mu_upper) and math.isfinite(self.mu_lower) and self.mu_lower > self.mu_upper:
            raise ValueError("lower eigenvalue bound exceeds the upper bound")


def _inradius_center(domain):
    if isinstance(domain, Ball):
        return domain.center, domain.R
    lo, hi = domain.bbox()
    c = (lo + hi) / 2
    return c, float(domain.distance_to_boundary(c))


def eigen_bump(domain):
    """1 on B_{R/2}, cosine ramp to 0 on B_{3R/4} around the domain centre."""
    c, R = _inradius_center(domain)

    def h(x):
        r = np.linalg.norm(np.asarray(x, dtype=float) - c, axis=-1) / R
        ramp = 0.5 * (1 + np.cos(math.pi * (r - 0.5) / 0.25))
        return np.where(r <= 0.5, 1.0, np.where(r < 0.75, ramp, 0.0))

    return h


def eigen_upper_bound(domain, spec, h=None, solver=None, scale=1.0):
    """rho_0 = max over supp(bump) of bump / v where K v = -bump, v = 0 outside."""
    p = spec.partition
    if spec.sign == "minus" and p.k < p.ambient_dim:
        raise RegimeError("the upper bound construction needs k = N for the minus operator")
    _, R = _inradius_center(domain)
    h = h if h is not None else 2 * R / 32
    bump = eigen_bump(domain)
    f = lambda x: -scale * bump(x)
    prob = DirichletProblem(domain, spec, f, h, solver=solver or SolverSettings())
    rep = solve_dirichlet(prob)
    nodes = rep.solution.nodes()[prob.mask]
    v = rep.solution.values[prob.mask]
    hv = scale * bump(nodes)
    supp = hv > 0
    if np.any(v[supp] <= 0):
        raise ValueError("solution is not positive on the bump support")
    return float(np.max(hv[supp] / v[supp])), rep


def gaussian_threshold(partition, s, mu):
    """Smallest alpha with K^- w + mu w <= 0 for w = exp(-alpha |x|^2) (frames orthogonal to x)."""
    weight = sum(normalizing_constant(k, s) * sphere_measure(k) for k in partition.ks)
    J = gamma(1 - s) / (2 * s)
    return (mu / (weight * J)) ** (1 / s) if mu > 0 else 0.0


def eigen_lower_scan(domain, spec, mu, alphas=None, n_samples=9, quad=None):
    """First alpha on a geometric grid such that the sampled sup of K^- w + mu w is <= 0.

    ``w = exp(-alpha |x - x0|^2)``; K^- w is bounded above by the frame with
    every block orthogonal to ``x - x0``, evaluated through one ray integral.
    Returns ``None`` if no alpha on the grid works.
    """
    p = spec.partition
    if spec.sign != "minus" or p.k >= p.ambient_dim:
        raise RegimeError("the lower scan applies to the minus operator with k < N")
    alphas = alphas if alphas is not None else [2.0**j for j in range(-4, 25)]
    x0, R = _inradius_center(domain)
    lo, hi = domain.bbox()
    axes = [np.linspace(lo[i], hi[i], n_samples) for i in range(domain.dim)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    samples = grid[domain.contains(grid)]
    quad = quad or QuadratureSpec(estimate_error=False)
    N = p.ambient_dim
    for alpha in alphas:
        w = RadialField(ExpProfile(alpha), center=x0)
        worst = -np.inf
        for x in samples:
            y = x - x0
            if np.linalg.norm(y) > 1e-12:
                K = representation_K_minus_radial(w, x, p, spec.s, quad)
            else:
                # every direction is orthogonal to y = 0; use any one
                xi = np.eye(N)[0]
                ray = directional_integral(w, x, xi, spec.s, quad).value
                weight = sum(normalizing_constant(k, spec.s) * sphere_measure(k) for k in p.ks)
                K = weight / normalizing_constant(1, spec.s) * ray
            worst = max(worst, K + mu * float(w(x)))
        if worst <= 0:
            return {"alpha": float(alpha), "sup_value": float(worst), "samples": int(len(samples))}
    return None


def spherical_chain_check(w, samples, s, k, n_dirs=64, n_frames=8, seed=0, quad=None):
    """Assemble block inequalities from ray inequalities.

    Let ``mu = min_x -sup_xi I_xi w(x) / w(x)`` over the samples, so that
    ``sup_xi I_xi w + mu w <= 0`` there.  Integrating over the sphere of a
    k-dimensional block V gives ``J_V w + (C_{k,s}/C_{1,s}) omega_k mu w <= 0``.
    Returns the measured ``mu`` and the largest value of the assembled left
    side over sampled (x, V); it should be <= 0 up to quadrature error.
    """
    rng = np.random.default_rng(seed)
    quad = quad or QuadratureSpec(estimate_error=False)
    N = len(samples[0])
    xis = rng.standard_normal((n_dirs, N))
    xis /= np.linalg.norm(xis, axis=1, keepdims=True)
    mu = np.inf
    for x in samples:
        ray_sup = max(directional_integral(w, x, xi, s, quad).value for xi in xis)
        mu = min(mu, -ray_sup / float(w(x)))
    factor = normalizing_constant(k, s) / normalizing_constant(1, s) * sphere_measure(k)
    worst = -np.inf
    for x in samples:
        for _ in range(n_frames):
            q, _ = np.linalg.qr(rng.standard_normal((N, N)))
            V = q.T[:k]
            val = subspace_integral(w, x, V, s, quad).value + factor * mu * float(w(x))
            worst = max(worst, val)
    return {"mu": float(mu), "max_assembled": float(worst), "factor": float(factor)}
