import math

import numpy as np
import pytest

from ktrunc.dirichlet import (
    DirichletProblem,
    EigenEstimate,
    NonConvergence,
    RegimeError,
    SolverSettings,
    barrier_envelope,
    eigen_lower_scan,
    eigen_upper_bound,
    gaussian_threshold,
    hopf_fit,
    smallness_bound,
    solve_dirichlet,
    spherical_chain_check,
)
from ktrunc.fields import Ball, BallIntersection, Box, radial_field, smp_counterexamples
from ktrunc.frames import make_partition
from ktrunc.kernels import barrier_constant
from ktrunc.operators import OperatorSpec, eval_K

H = 1 / 10
B1 = Ball(np.zeros(2), 1.0)
LENS = BallIntersection([[0.0, 0.0], [0.5, 0.2]], 1.0)


def problem(ks=(1,), sign="plus", f=None, dom=B1, h=H, s=0.5, **kw):
    ks = list(ks)
    p = make_partition(ks, dom.dim)
    f = barrier_constant(ks, s) if f is None else f
    return DirichletProblem(dom, OperatorSpec(p, sign, s), f, h, **kw)


def interior(rep, prob):
    nodes = rep.solution.nodes()[prob.mask]
    return nodes, rep.solution.values[prob.mask]


def barrier_error(rep, prob, s=0.5):
    nodes, u = interior(rep, prob)
    exact = (1 - np.sum(nodes**2, axis=-1)) ** s
    far = prob.domain.distance_to_boundary(nodes) >= 0.1
    return float(np.max(np.abs(u - exact)[far]))


@pytest.fixture(scope="module")
def barrier_solves():
    out = {}
    for ks in ([1], [2]):
        for sign in ("plus", "minus"):
            prob = problem(ks, sign)
            out[tuple(ks), sign] = (prob, solve_dirichlet(prob))
    return out


# --- problem validation -------------------------------------------------------------------

def test_problem_validation():
    with pytest.raises(ValueError, match="coarse"):
        problem(h=0.2)
    with pytest.raises(ValueError):
        problem(h=-1.0)
    with pytest.raises(ValueError):
        problem(dom=Box([-1, -1], [1, 1]))
    with pytest.raises(ValueError):
        DirichletProblem(B1, OperatorSpec(make_partition([1], 3), "plus", 0.5), 0.0, H)


def test_smallness_condition_is_enforced():
    bound = smallness_bound(make_partition([1], 2), 0.5, B1)
    assert bound == pytest.approx(1 / math.pi / 1 * 0.5, rel=1e-12)
    with pytest.raises(ValueError, match="smallness"):
        problem(c=1.01 * bound)
    problem(c=0.5 * bound)


def test_solver_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(dt_safety=1.5)
    with pytest.raises(ValueError):
        SolverSettings(tol=0.0)


# --- envelopes --------------------------------------------------------------------------------

def test_envelope_zero_data():
    prob = problem(f=0.0)
    sub, sup = barrier_envelope(prob)
    x = np.array([[0.1, 0.2], [0.5, -0.5]])
    assert np.all(sub(x) == 0) and np.all(sup(x) == 0)
    rep = solve_dirichlet(prob)
    assert np.all(rep.solution.values == 0)


def test_envelope_is_the_barrier_for_its_own_constant():
    prob = problem([1, 1], dom=Ball(np.zeros(3), 1.0), h=1 / 8.5)
    _, sup = barrier_envelope(prob)
    x = np.array([[0.1, 0.2, 0.0], [0.0, 0.5, -0.5]])
    assert sup(x) == pytest.approx((1 - np.sum(x**2, axis=1)) ** 0.5, rel=1e-12)


@pytest.mark.parametrize("dom", [B1, LENS], ids=["ball", "lens"])
def test_envelope_signs_and_support(dom):
    prob = problem(f=lambda x: np.sin(3 * x[..., 0]), dom=dom)
    for discrete in (False, True):
        sub, sup = barrier_envelope(prob, discrete=discrete)
        x = np.random.default_rng(0).uniform(-1.5, 1.5, (200, 2))
        assert np.all(sup(x) >= 0) and np.all(sub(x) <= 0)
        out = ~dom.contains(x)
        assert np.all(sup(x)[out] == 0) and np.all(sub(x)[out] == 0)


# --- exact solutions ---------------------------------------------------------------------------

@pytest.mark.parametrize("ks", [(1,), (2,)])
@pytest.mark.parametrize("sign", ["plus", "minus"])
def test_barrier_is_recovered(barrier_solves, ks, sign):
    prob, rep = barrier_solves[ks, sign]
    assert rep.converged and rep.envelope_violations == 0
    assert barrier_error(rep, prob) <= 0.02


def test_barrier_error_decreases_with_h():
    coarse = problem([1], "minus", h=1 / 8)
    fine = problem([1], "minus", h=1 / 16)
    assert barrier_error(solve_dirichlet(fine), fine) < barrier_error(solve_dirichlet(coarse), coarse)


@pytest.mark.slow
def test_barrier_in_three_dimensions():
    prob = problem([1, 1], "minus", dom=Ball(np.zeros(3), 1.0), h=1 / 10)
    assert barrier_error(solve_dirichlet(prob), prob) <= 0.02


def test_residual_history_is_non_increasing(barrier_solves):
    for _, rep in barrier_solves.values():
        hist = np.array(rep.residual_history)
        assert np.all(np.diff(hist) <= 1e-12 * hist[:-1])


# --- structure -----------------------------------------------------------------------------------

def bumpy(x):
    return -1.0 - 0.5 * np.cos(4 * x[..., 0]) * np.sin(3 * x[..., 1])


@pytest.mark.parametrize("ks", [(1,), (1, 1)])
def test_duality_of_solutions(ks):
    plus = solve_dirichlet(problem(ks, "plus", f=bumpy, dom=LENS))
    minus = solve_dirichlet(problem(ks, "minus", f=lambda x: -bumpy(x), dom=LENS))
    assert np.allclose(minus.solution.values, -plus.solution.values, atol=1e-7)


@pytest.mark.parametrize("sign", ["plus", "minus"])
def test_discrete_comparison(sign):
    f1 = lambda x: bumpy(x) - 0.3
    r1 = solve_dirichlet(problem((1,), sign, f=f1))
    r2 = solve_dirichlet(problem((1,), sign, f=bumpy))
    assert np.all(r1.solution.values >= r2.solution.values - 1e-7)
    assert r1.envelope_violations == 0 and r2.envelope_violations == 0


def test_zero_order_term():
    rep = solve_dirichlet(problem((1,), "plus", f=bumpy, c=-2.0))
    base = solve_dirichlet(problem((1,), "plus", f=bumpy))
    # absorbing c u = -2u only helps: the solution moves toward zero
    assert np.all(rep.solution.values <= base.solution.values + 1e-7)
    assert rep.envelope_violations == 0


@pytest.mark.parametrize("ks, sign", [((1,), "plus"), ((2,), "minus"), ((1, 1), "minus")])
def test_strong_minimum_principle(ks, sign):
    prob = problem(ks, sign, f=lambda x: np.where(x[..., 0] > 0.3, -1.0, 0.0))
    _, u = interior(solve_dirichlet(prob), prob)
    assert np.all(u > 0)


def test_minimum_principle_fails_for_minus_with_k_below_N():
    # phi(x_N) touches zero along x_N = 0 and still has K^- phi <= 0 there
    p = make_partition([1], 2)
    u = smp_counterexamples(p, "i")
    x = np.array([0.3, 0.0])
    assert u(x) == 0
    assert eval_K(u, x, OperatorSpec(p, "minus", 0.5, multistarts=2)).value <= 1e-10


def test_non_convergence_carries_report():
    prob = problem(solver=SolverSettings(max_iter=5))
    with pytest.raises(NonConvergence) as info:
        solve_dirichlet(prob)
    rep = info.value.report
    assert not rep.converged and rep.iterations == 5


# --- Hopf ---------------------------------------------------------------------------------------

def test_hopf_on_barrier(barrier_solves):
    prob, rep = barrier_solves[(1,), "plus"]
    prob = problem((1,), "plus", f=-abs(barrier_constant([1], 0.5)))
    rep = solve_dirichlet(prob)
    assert hopf_fit(rep, prob) >= 0.9
    assert rep.hopf_constant == hopf_fit(rep, prob)


def test_hopf_scales_with_data():
    one = problem((1, 1), "plus", f=bumpy)
    two = problem((1, 1), "plus", f=lambda x: 2 * bumpy(x))
    c1 = hopf_fit(solve_dirichlet(one), one)
    c2 = hopf_fit(solve_dirichlet(two), two)
    assert c1 > 0
    assert c2 == pytest.approx(2 * c1, rel=1e-6)


def test_hopf_refusals():
    prob = problem((1,), "minus", f=-1.0)
    with pytest.raises(RegimeError):
        hopf_fit(solve_dirichlet(prob), prob)
    pos = problem((1,), "plus", f=1.0)
    with pytest.raises(ValueError):
        hopf_fit(solve_dirichlet(pos), pos)


# --- eigenvalue bounds ----------------------------------------------------------------------------

@pytest.mark.parametrize("ks, sign", [((1,), "plus"), ((2,), "minus")])
def test_eigen_upper_scaling(ks, sign):
    spec = OperatorSpec(make_partition(list(ks), 2), sign, 0.5)
    r1, _ = eigen_upper_bound(Ball(np.zeros(2), 1.0), spec, h=1 / 10)
    r2, _ = eigen_upper_bound(Ball(np.zeros(2), 2.0), spec, h=2 / 10)
    assert 0 < r1 < math.inf
    assert r2 == pytest.approx(r1 / 2 ** (2 * 0.5), rel=1e-6)


def test_eigen_upper_data_scaling():
    spec = OperatorSpec(make_partition([1], 2), "plus", 0.4)
    a, _ = eigen_upper_bound(B1, spec, h=1 / 10)
    b, _ = eigen_upper_bound(B1, spec, h=1 / 10, scale=2.0)
    assert b == pytest.approx(a, rel=1e-6)


def test_eigen_upper_refuses_minus_with_k_below_N():
    with pytest.raises(RegimeError):
        eigen_upper_bound(B1, OperatorSpec(make_partition([1], 2), "minus", 0.5))


@pytest.mark.slow
def test_eigen_upper_three_single_blocks():
    spec = OperatorSpec(make_partition([1, 1, 1], 3), "minus", 0.5)
    rho, _ = eigen_upper_bound(Ball(np.zeros(3), 1.0), spec, h=1 / 8.5)
    assert 0 < rho < math.inf


@pytest.mark.parametrize("mu", [0.0, 1.0, 100.0])
def test_eigen_lower_scan(mu):
    spec = OperatorSpec(make_partition([1], 2), "minus", 0.5)
    w = eigen_lower_scan(B1, spec, mu)
    assert w is not None and w["sup_value"] <= 0
    if mu == 0:
        assert w["alpha"] == 2.0**-4
    else:
        # the scan stops at the first grid alpha past the closed-form threshold
        assert w["alpha"] >= gaussian_threshold(spec.partition, 0.5, mu) * (1 - 1e-9)
        assert w["alpha"] < 2 * gaussian_threshold(spec.partition, 0.5, mu) + 1e-9


def test_eigen_lower_scan_grows_with_mu():
    spec = OperatorSpec(make_partition([1], 3), "minus", 0.3)
    dom = Ball(np.zeros(3), 1.0)
    a = eigen_lower_scan(dom, spec, 1.0, n_samples=5)["alpha"]
    b = eigen_lower_scan(dom, spec, 100.0, n_samples=5)["alpha"]
    assert b > a


def test_eigen_lower_scan_regime():
    with pytest.raises(RegimeError):
        eigen_lower_scan(B1, OperatorSpec(make_partition([1], 2), "plus", 0.5), 1.0)
    with pytest.raises(RegimeError):
        eigen_lower_scan(B1, OperatorSpec(make_partition([2], 2), "minus", 0.5), 1.0)


def test_eigen_lower_scan_no_witness():
    spec = OperatorSpec(make_partition([1], 2), "minus", 0.5)
    assert eigen_lower_scan(B1, spec, 1e6, alphas=[0.1, 1.0]) is None


def test_spherical_chain_check():
    w = radial_field("exp", dim=3, alpha=2.0)
    samples = np.array([[0.2, 0.1, 0.0], [0.0, 0.4, 0.3], [0.5, 0.0, 0.0]])
    for k in (1, 2):
        out = spherical_chain_check(w, samples, 0.5, k, n_dirs=32, n_frames=4)
        assert out["mu"] > 0
        assert out["max_assembled"] <= 1e-2 * out["mu"]


def test_eigen_estimate_ordering():
    EigenEstimate(2.0, 1.0)
    EigenEstimate(math.inf, 5.0)
    with pytest.raises(ValueError):
        EigenEstimate(1.0, 2.0)
