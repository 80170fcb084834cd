import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from ktrunc.fields import (
    AnisotropicGaussian,
    Ball,
    BallIntersection,
    Box,
    ExpProfile,
    LiouvilleProfile,
    PowerProfile,
    barrier_field,
    discontinuity_example,
    domain_from_dict,
    exp_integral_e,
    grid_eval,
    grid_sample,
    half_space_exp_integral,
    load_grid,
    nonattain_example,
    radial_field,
    save_grid,
    smp_counterexamples,
)
from ktrunc.frames import make_partition


def test_barrier_examples():
    u = barrier_field(1.0, 0.5, np.zeros(2))
    assert u(np.zeros(2)) == 1.0
    assert u(np.array([1.0, 0.0])) == 0.0
    assert u(np.array([3.0, 4.0])) == 0.0
    v = barrier_field(2.0, 0.5, np.zeros(3))
    assert v(np.array([1.0, 0.0, 0.0])) == pytest.approx(math.sqrt(3), rel=1e-15)
    assert v.bound == pytest.approx(2.0)
    assert v.support_radius == 2.0


def test_barrier_rejects_radius():
    with pytest.raises(ValueError):
        barrier_field(0.0, 0.5, np.zeros(2))


def test_radial_catalog_examples():
    u = radial_field("exp", dim=3)
    assert u(np.zeros(3)) == 1.0
    assert u.convex_profile
    w = radial_field("liouville", dim=2, q=0.5, a=1.0, alpha=1.0)
    assert w(np.zeros(2)) == 1.0
    with pytest.raises(ValueError):
        radial_field("nope", dim=2)


@pytest.mark.parametrize("m, convex", [(0.5, False), (1.0, True), (2.0, True)])
def test_power_profile_convexity_flag(m, convex):
    assert PowerProfile(m).convex is convex


@pytest.mark.parametrize("profile", [ExpProfile(1.3), LiouvilleProfile(0.7, a=0.5), PowerProfile(1.5, R=2.0)])
def test_convex_profiles_midpoint(profile, rng):
    hi = 3.9 if isinstance(profile, PowerProfile) else 10.0
    a, b = rng.uniform(0, hi, (2, 200))
    mid = profile.g((a + b) / 2)
    assert np.all(mid <= (profile.g(a) + profile.g(b)) / 2 + 1e-14)


@pytest.mark.parametrize(
    "u",
    [
        radial_field("exp", dim=3, alpha=0.5),
        radial_field("liouville", dim=3, q=0.25, a=0.5),
        radial_field("power", dim=3, m=0.3, R=1.5),
        radial_field("bump", dim=3),
        barrier_field(1.2, 0.4, np.ones(3)),
        AnisotropicGaussian(np.diag([1.0, 2.0, 3.0])),
    ],
)
def test_catalog_bounds(u, rng):
    x = rng.uniform(-3, 3, (100000, 3))
    assert np.max(np.abs(u(x))) <= u.bound * (1 + 1e-12)


@pytest.mark.parametrize(
    "u",
    [
        radial_field("exp", dim=3, alpha=0.7),
        radial_field("liouville", dim=3, q=1.5, a=0.8),
        radial_field("power", dim=3, m=2.5, R=1.5),
        AnisotropicGaussian(np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 0.5]]), center=[0.1, 0, 0]),
    ],
)
def test_analytic_derivatives_match_finite_differences(u, rng):
    x = rng.uniform(-0.7, 0.7, 3)
    g = u.gradient(x)
    H = u.hessian(x)
    e = np.eye(3)
    h = 1e-5
    g_fd = np.array([(u(x + h * d) - u(x - h * d)) / (2 * h) for d in e])
    H_fd = np.array([(u.gradient(x + h * d) - u.gradient(x - h * d)) / (2 * h) for d in e])
    assert np.allclose(g, g_fd, atol=1e-8)
    assert np.allclose(H, H_fd, atol=1e-7)


def test_discontinuity_example_values():
    p = make_partition([1, 1], 3)
    u = discontinuity_example(p)
    assert u(np.zeros(3)) == 0.0
    assert u(np.array([2.0, 0, 0])) == 0.0
    assert u(np.array([2.0, 2.0, 2.0])) == -1.0
    with pytest.raises(ValueError):
        discontinuity_example(make_partition([3], 3))


def test_discontinuity_example_sign(rng):
    u = discontinuity_example(make_partition([1, 1], 3))
    x = rng.uniform(-3, 3, (20000, 3))
    vals = u(x)
    assert np.all(vals <= 0)
    assert np.all(vals[np.linalg.norm(x, axis=1) < 1] == 0)


def test_nonattain_examples():
    u = nonattain_example(make_partition([2], 3))
    assert u(np.array([0, 0, 3.0])) == pytest.approx(math.exp(-3))
    assert u(np.array([0, 0, 0.5])) == 0.0
    v = nonattain_example(make_partition([1, 1], 3))
    assert v(np.array([1.0, 0, 3.0])) == 0.0
    assert v(np.array([0.0, 1.0, 3.0])) == pytest.approx(math.exp(-3))


def test_smp_counterexamples():
    p = make_partition([1, 1], 3)
    u = smp_counterexamples(p, "i")
    assert u(np.zeros(3)) == 0.0
    assert np.all(u(np.random.default_rng(0).normal(size=(100, 3))) >= 0)
    q = make_partition([1, 2], 3)
    v = smp_counterexamples(q, "iv")
    assert v(np.array([0.5, 0, 0])) == 0.0
    assert v(np.array([2.0, 2.0, 2.0])) == 1.0
    with pytest.raises(ValueError):
        smp_counterexamples(q, "i")
    with pytest.raises(ValueError):
        smp_counterexamples(p, "iv")
    with pytest.raises(ValueError):
        smp_counterexamples(p, "x")


@given(p=st.floats(1.05, 2.95), z=st.floats(0, 30))
def test_exp_integral_e_matches_mpmath(p, z):
    ref = float(mp.expint(p, z)) if z > 0 else 1 / (p - 1)
    assert exp_integral_e(p, np.array([z]))[0] == pytest.approx(ref, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("n, c, s", [(2, 1.0, 0.5), (3, 0.5, 0.3), (2, 0.2, 0.75)])
def test_half_space_exp_integral_against_mpmath(n, c, s):
    # polar form: int_{S^{n-1}, t1 > 0} int_1^inf exp(-c r t1) r^{-1-2s} dr
    if n == 2:
        f = lambda phi: mp.expint(1 + 2 * s, c * mp.cos(phi))
        ref = mp.quad(f, [-mp.pi / 2, 0, mp.pi / 2])
    else:
        f = lambda phi: 2 * mp.pi * mp.sin(phi) * mp.expint(1 + 2 * s, c * mp.cos(phi))
        ref = mp.quad(f, [0, mp.pi / 2])
    # the angular integrand has a z^(2s) endpoint singularity at phi = pi/2,
    # so the fixed Gauss rule converges algebraically
    assert half_space_exp_integral(n, c, s) == pytest.approx(float(ref), rel=1e-7)


@pytest.mark.parametrize(
    "domain",
    [Ball([0.0, 0.0], 1.0), BallIntersection([[0.0, 0.2], [0.0, -0.2]], 1.0), Box([-1.0, -0.5], [1.0, 0.5])],
)
def test_domain_round_trip_and_exit(domain, rng):
    again = domain_from_dict(domain.to_dict())
    x = rng.uniform(-0.3, 0.3, (50, 2))
    assert np.array_equal(domain.contains(x), again.contains(x))
    d = rng.standard_normal(2)
    d /= np.linalg.norm(d)
    t = domain.exit_distance(x, d)
    assert np.all(t >= domain.distance_to_boundary(x) - 1e-12)
    assert np.allclose(domain.distance_to_boundary(x + t[:, None] * d), 0, atol=1e-10)


def test_domain_errors():
    with pytest.raises(ValueError):
        Ball([0.0], -1.0)
    with pytest.raises(ValueError):
        BallIntersection([[0.0, 0.0], [3.0, 0.0]], 1.0)
    with pytest.raises(ValueError):
        Box([0.0], [0.0])
    with pytest.raises(ValueError):
        domain_from_dict({"type": "torus"})


def test_grid_eval_nodes_and_exterior():
    dom = Ball([0.0, 0.0], 1.0)
    u = barrier_field(1.0, 0.5, np.zeros(2))
    g = grid_sample(u, dom, 0.125)
    nodes = g.nodes()[g.mask]
    assert np.array_equal(g(nodes), u(nodes))
    assert grid_eval(g, np.array([1.5, 0.0])) == 0.0
    with pytest.raises(ValueError):
        grid_sample(u, dom, 0.0)


def test_grid_interpolation_error_rates():
    dom = Ball([0.0, 0.0], 1.0)
    u = barrier_field(1.0, 0.5, np.zeros(2))
    errs = []
    for h in (1 / 16, 1 / 32):
        g = grid_sample(u, dom, h)
        nodes = g.nodes()[g.mask]
        mid = nodes + h / 2
        inner = np.linalg.norm(mid, axis=1) < 0.5
        errs.append(np.max(np.abs(g(mid[inner]) - u(mid[inner]))))
    # O(h^2) in the interior
    assert errs[1] < errs[0] / 3


def test_grid_round_trip_bit_exact(tmp_path, rng):
    dom = Ball([0.1, -0.2], 0.9)
    g = grid_sample(lambda x: np.sin(7 * x[..., 0]) * np.exp(x[..., 1]) / 3, dom, 0.1)
    save_grid(g, tmp_path / "g.csv", tmp_path / "g.json")
    h = load_grid(tmp_path / "g.csv", tmp_path / "g.json")
    assert np.array_equal(g.values, h.values)
    assert h.h == g.h and np.array_equal(h.origin, g.origin)


def test_grid_rejects_nonzero_exterior():
    from ktrunc.fields import GridField, lattice_for

    dom = Ball([0.0, 0.0], 1.0)
    origin, shape = lattice_for(dom, 0.25)
    with pytest.raises(ValueError):
        GridField(dom, 0.25, origin, np.ones(shape))
