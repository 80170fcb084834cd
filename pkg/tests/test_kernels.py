import math

import mpmath as mp
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from ktrunc.kernels import (
    SpectralParams,
    asymptotic_ratio,
    barrier_constant,
    beta_1ms_s,
    normalizing_constant,
    sphere_measure,
)

orders = st.floats(min_value=0.01, max_value=0.99)


def mp_constant(n, s):
    s = mp.mpf(s)
    return s * 4**s * mp.gamma(mp.mpf(n) / 2 + s) / (mp.pi ** (mp.mpf(n) / 2) * mp.gamma(1 - s))


@pytest.mark.parametrize("n, s, expected", [(1, 0.5, 1 / math.pi), (2, 0.5, 1 / (2 * math.pi))])
def test_normalizing_constant_examples(n, s, expected):
    assert normalizing_constant(n, s) == pytest.approx(expected, rel=1e-14)


@given(n=st.integers(1, 8), s=orders)
def test_normalizing_constant_matches_mpmath(n, s):
    ref = float(mp_constant(n, s))
    assert normalizing_constant(n, s) == pytest.approx(ref, rel=1e-12)
    assert normalizing_constant(n, s) > 0


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.5])
def test_order_outside_range_rejected(s):
    with pytest.raises(ValueError):
        normalizing_constant(1, s)
    with pytest.raises(ValueError):
        beta_1ms_s(s)


def test_spectral_params_validation():
    SpectralParams(0.3, 2)
    with pytest.raises(ValueError):
        SpectralParams(0.3, 0)


@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
def test_beta_matches_defining_integral(s):
    f = lambda t: t ** (-s) * (1 - t) ** (s - 1)
    ref = integrate.quad(f, 0, 0.5, limit=200)[0] + integrate.quad(f, 0.5, 1, limit=200)[0]
    assert beta_1ms_s(s) == pytest.approx(ref, rel=1e-9)
    assert beta_1ms_s(s) == pytest.approx(float(mp.beta(1 - s, s)), rel=1e-12)


def test_beta_examples():
    assert beta_1ms_s(0.5) == pytest.approx(math.pi, rel=1e-14)
    assert beta_1ms_s(0.25) == pytest.approx(beta_1ms_s(0.75), rel=1e-14)


@pytest.mark.parametrize("k, expected", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi), (4, 2 * math.pi**2)])
def test_sphere_measure(k, expected):
    assert sphere_measure(k) == pytest.approx(expected, rel=1e-14)


def test_sphere_measure_rejects_zero():
    with pytest.raises(ValueError):
        sphere_measure(0)


@pytest.mark.parametrize("k, s, tol", [(1, 0.99, 0.02), (2, 0.999, 0.005), (3, 0.999, 0.01)])
def test_asymptotic_ratio_near_one(k, s, tol):
    assert abs(asymptotic_ratio(k, s) - 1) <= tol


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_asymptotic_ratio_monotone_approach(k):
    gaps = [abs(asymptotic_ratio(k, s) - 1) for s in (0.9, 0.99, 0.999)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert 0 < asymptotic_ratio(4, 0.5) < math.inf


@pytest.mark.parametrize("k, expected", [(1, -1.0), (2, -math.pi / 2), (3, -2.0)])
def test_barrier_constant_anchors(k, expected):
    assert barrier_constant([k], 0.5) == pytest.approx(expected, rel=1e-13)


@given(s=orders)
def test_barrier_constant_additive(s):
    assert barrier_constant([1, 2], s) == pytest.approx(barrier_constant([1], s) + barrier_constant([2], s))


@given(s=orders, n=st.integers(1, 5))
def test_barrier_constant_equals_laplacian_of_barrier(s, n):
    # (-Laplace)^s (1-|x|^2)^s_+ = 4^s Gamma(1+s) Gamma(n/2+s) / Gamma(n/2)
    ref = 4**s * math.gamma(1 + s) * math.gamma(n / 2 + s) / math.gamma(n / 2)
    assert barrier_constant([n], s) == pytest.approx(-ref, rel=1e-12)
