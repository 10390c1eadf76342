import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from driftmv import (DegenerateVarianceError, ModelParams, MomentEstimates,
                     compute_c1_c2, exact_posterior, log_rho_increment,
                     truncated_diffusion)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(a=0.2, b=0.2)
    with pytest.raises(ValueError):
        ModelParams(a=0.1, b=0.2)
    with pytest.raises(ValueError):
        ModelParams(a=0.8, b=0.2, pi0=1.5)
    with pytest.raises(ValueError):
        ModelParams(a=0.8, b=0.2, y0=0.0)
    with pytest.raises(ValueError):
        ModelParams(a=0.8, b=0.2, T=-1.0)
    p = ModelParams(a=0.8, b=0.2)
    assert p.gamma == pytest.approx(0.6)


def test_truncated_diffusion_values():
    # hand value: 0.008 * 0.5 * 0.5
    assert truncated_diffusion(0.5, 0.008) == pytest.approx(0.002, rel=1e-15)
    assert truncated_diffusion(0.0, 0.6) == 0.0
    assert truncated_diffusion(1.0, 0.6) == 0.0
    assert truncated_diffusion(-0.01, 0.6) == 0.0
    assert truncated_diffusion(1.01, 0.6) == 0.0
    assert isinstance(truncated_diffusion(0.3, 0.6), float)
    xs = np.linspace(-1.0, 2.0, 301)
    vals = truncated_diffusion(xs, 0.6)
    assert vals.shape == xs.shape
    assert np.all(vals >= 0.0)
    # global bound gamma/4, attained at x = 1/2
    assert np.max(vals) <= 0.15 + 1e-15
    assert truncated_diffusion(0.5, 0.6) == pytest.approx(0.15, rel=1e-15)
    assert np.all(vals[(xs < 0.0) | (xs > 1.0)] == 0.0)


def test_log_rho_increment_hand_value():
    p = ModelParams(a=0.8, b=0.2, r=0.05)
    # theta = 0.2 - 0.05 + 0.6*0.5 = 0.45
    # inc = -(0.45*0.1 + 0.01*(0.05 + 0.5*0.45^2)) = -0.0465125
    inc = log_rho_increment(0.5, 0.1, 0.01, p)
    assert inc == pytest.approx(-0.0465125, rel=1e-14)
    # vectorized over pi
    incs = log_rho_increment(np.array([0.5, 0.5]), np.array([0.1, 0.1]), 0.01, p)
    assert np.all(incs == inc)


def test_exact_posterior_basics():
    p = ModelParams(a=0.8, b=0.2, r=0.05)
    assert exact_posterior(0.3, 0.0, 0.0, p) == pytest.approx(0.3, rel=1e-15)
    assert exact_posterior(0.0, 5.0, 1.0, p) == 0.0
    assert exact_posterior(1.0, -5.0, 1.0, p) == 1.0
    # extreme observations saturate without overflow
    assert exact_posterior(0.5, 1e6, 1.0, p) == 1.0
    assert exact_posterior(0.5, -1e6, 1.0, p) == 0.0
    with pytest.raises(ValueError):
        exact_posterior(1.2, 0.0, 0.0, p)


def test_exact_posterior_mirror_symmetry():
    # inverting the likelihood ratio must flip the posterior around 1/2
    p = ModelParams(a=0.8, b=0.2, r=0.05)
    t = 0.7
    for L in (-2.0, -0.3, 0.0, 0.4, 1.9):
        L_mirror = -L + (p.a + p.b - 1.0) * t
        s = exact_posterior(0.5, L, t, p) + exact_posterior(0.5, L_mirror, t, p)
        assert s == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60, deadline=None, derandomize=True)
@given(
    L1=st.floats(-20.0, 20.0),
    dL=st.floats(0.0, 10.0),
    pi0=st.floats(0.01, 0.99),
    t=st.floats(0.0, 2.0),
)
def test_exact_posterior_monotone_in_observation(L1, dL, pi0, t):
    p = ModelParams(a=0.8, b=0.2, r=0.05)
    lo = exact_posterior(pi0, L1, t, p)
    hi = exact_posterior(pi0, L1 + dL, t, p)
    assert hi >= lo - 1e-15
    assert 0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0


def test_moment_estimates_validation():
    with pytest.raises(ValueError):
        MomentEstimates(e_rho=0.0, e_rho2=1.0)
    with pytest.raises(ValueError):
        MomentEstimates(e_rho=1.0, e_rho2=0.5)  # violates Cauchy-Schwarz
    m = MomentEstimates(e_rho=0.95, e_rho2=1.02)
    assert m.var_rho == pytest.approx(1.02 - 0.95**2, rel=1e-14)


@settings(max_examples=80, deadline=None, derandomize=True)
@given(
    e_rho=st.floats(0.2, 5.0),
    var=st.floats(1e-6, 10.0),
    y0=st.floats(0.5, 50.0),
    z=st.floats(0.0, 60.0),
)
def test_c1_c2_solve_budget_system(e_rho, var, y0, z):
    moments = MomentEstimates(e_rho=e_rho, e_rho2=e_rho * e_rho + var)
    params = ModelParams(a=0.8, b=0.2, r=0.05, y0=y0, z=z)
    c1, c2 = compute_c1_c2(moments, params)
    scale = 1.0 + abs(c1) + abs(c2) * max(moments.e_rho, moments.e_rho2)
    assert abs(c1 + c2 * moments.e_rho - z) <= 1e-9 * scale
    assert abs(c1 * moments.e_rho + c2 * moments.e_rho2 - y0) <= 1e-9 * scale


def test_c1_c2_degenerate_variance_raises():
    moments = MomentEstimates(e_rho=1.0, e_rho2=1.0)  # Var = 0
    params = ModelParams(a=0.8, b=0.2)
    with pytest.raises(DegenerateVarianceError):
        compute_c1_c2(moments, params)
