import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from tweedie import (
    FunctionalSpec as F, HeteroJointSpec, NoiseSpec, NoMass, PriorSpec,
    SeriesDivergence, Unsupported, evaluate, exact_density, gauss_cdf,
    gauss_functional, gauss_hinge_abs, gauss_multivariate, hetero_condition,
    oracle_posterior,
)
from tweedie.densities import gaussian_mixture_density
from tweedie.gaussian import hermite_moment_poly

# a smooth prior for the series rows: component variance near the noise variance
SMOOTH = PriorSpec.gaussian_mixture([[-1.0], [0.0], [2.0]], [[[1.0]], [[0.8]], [[1.2]]], [0.3, 0.4, 0.3])
TEST_PRIORS = {
    "atoms": PriorSpec.atomic([-1.0, 0.0, 2.0], [0.3, 0.4, 0.3]),
    "mixture": SMOOTH,
    "normal": PriorSpec.normal(0.5, 2.0),
}
GRID = np.linspace(-3, 4, 21)


def model_for(prior, s2=1.0):
    return gaussian_mixture_density(prior, s2)


def test_hermite_moment_polynomial_is_normal_moment():
    # E[(a + s Z)^4] = a^4 + 6 a^2 s^2 + 3 s^4
    assert hermite_moment_poly(4, 0.7, 2.0) == pytest.approx(0.7 ** 4 + 6 * 0.49 * 2 + 12)


def test_point_mass_mean():
    m = model_for(PriorSpec.point_mass(2.0))
    for y in (-1.0, 2.0, 5.0):
        assert gauss_functional(1.0, m, y, F.mean()).value == pytest.approx(2.0, abs=1e-12)


def test_conjugate_variance(std_normal_prior):
    m = model_for(std_normal_prior)
    for y in GRID:
        assert gauss_functional(1.0, m, y, F.variance()).value == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("fs", [
    F.mean(), F.second_moment(), F.variance(), F.mgf(0.3), F.mgf(-1.1),
    F.raw_moment(1), F.raw_moment(4), F.raw_moment(7), F.centered_moment(3),
    F.centered_moment(4), F.even_risk(0.5, 1), F.even_risk(-0.2, 3),
])
@pytest.mark.parametrize("y", [-1.2, 0.4, 2.5])
def test_rows_against_oracle(fs, y):
    prior = PriorSpec.atomic([-1.0, 1.0], [0.5, 0.5])
    noise = NoiseSpec.gaussian(1.0)
    got = gauss_functional(1.0, model_for(prior), y, fs).value
    assert got == pytest.approx(oracle_posterior(prior, noise, fs, y), rel=1e-9, abs=1e-10)


def test_mgf_at_zero_is_one():
    for prior in TEST_PRIORS.values():
        assert gauss_functional(1.0, model_for(prior), 0.3, F.mgf(0.0)).value == 1.0


@pytest.mark.parametrize("name", sorted(TEST_PRIORS))
def test_variance_nonnegative_and_coherent(name):
    m = model_for(TEST_PRIORS[name])
    for y in GRID:
        var = gauss_functional(1.0, m, y, F.variance()).value
        mean = gauss_functional(1.0, m, y, F.mean()).value
        second = gauss_functional(1.0, m, y, F.second_moment()).value
        assert var >= -1e-9
        assert var == pytest.approx(second - mean ** 2, abs=1e-8)


@pytest.mark.parametrize("name", sorted(TEST_PRIORS))
def test_mgf_derivative_is_mean(name):
    m = model_for(TEST_PRIORS[name])
    h = 1e-4
    for y in (-1.0, 0.5, 2.0):
        fd = (gauss_functional(1.0, m, y, F.mgf(h)).value - gauss_functional(1.0, m, y, F.mgf(-h)).value) / (2 * h)
        assert fd == pytest.approx(gauss_functional(1.0, m, y, F.mean()).value, abs=1e-7)


def test_order_ceilings():
    m = model_for(SMOOTH)
    with pytest.raises(Unsupported):
        gauss_functional(1.0, m, 0.0, F.raw_moment(11))
    with pytest.raises(Unsupported):
        gauss_cdf(1.0, m, 0.0, 0.0, K=81)


# --------------------------------------------------------------------------
# posterior CDF and hinge series


@pytest.mark.parametrize("m, tau2", [(0.0, 1.0), (1.0, 0.8), (-0.5, 1.5)])
@pytest.mark.parametrize("y", [-1.0, 0.5])
@pytest.mark.parametrize("a", [-0.5, 0.3, 1.2])
def test_cdf_matches_normal_posterior(m, tau2, y, a):
    s2 = 1.0
    model = model_for(PriorSpec.normal(m, tau2), s2)
    post_mean = (s2 * m + tau2 * y) / (s2 + tau2)
    post_sd = math.sqrt(s2 * tau2 / (s2 + tau2))
    res = gauss_cdf(s2, model, y, a)
    assert res.value == pytest.approx(float(ndtr((a - post_mean) / post_sd)), abs=1e-4)
    assert res.converged
    assert res.series_terms_used == 61


def test_cdf_far_right_is_one():
    m = model_for(SMOOTH)
    for y in (-1.0, 0.5):
        assert gauss_cdf(1.0, m, y, y + 12.0).value == pytest.approx(1.0, abs=1e-6)


def test_cdf_monotone_and_in_range():
    m = model_for(SMOOTH)
    vals = [gauss_cdf(1.0, m, 0.4, a).value for a in np.linspace(-3, 4, 11)]
    assert np.all(np.diff(vals) >= -1e-6)
    assert min(vals) >= -1e-6 and max(vals) <= 1 + 1e-6


@pytest.mark.parametrize("y, a", [(0.0, 0.0), (1.0, -0.5), (-0.8, 1.0)])
def test_series_rows_against_oracle(y, a):
    noise = NoiseSpec.gaussian(1.0)
    m = model_for(SMOOTH)
    for fs in (F.cdf(a), F.hinge(a), F.absolute_risk(a)):
        got = evaluate(noise, m, y, fs).value
        assert got == pytest.approx(oracle_posterior(SMOOTH, noise, fs, y), abs=1e-4)


def test_point_mass_cdf_series_diverges():
    # the point-mass marginal is as rough as the noise itself; the truncated series
    # does not settle, and the routine says so instead of returning a number
    m = model_for(PriorSpec.point_mass(0.0))
    with pytest.raises(SeriesDivergence):
        gauss_cdf(1.0, m, 0.5, 0.0)


def test_point_mass_cdf_finite_level_value():
    # at n = 2 the smoothed indicator has a closed form: Phi(n^{-1/2} * n) = Phi(sqrt 2)
    m = model_for(PriorSpec.point_mass(0.0))
    res = gauss_cdf(1.0, m, 0.5, 0.0, K=80, n_schedule=(2.0,), tol=1.0)
    assert res.details["per_level"][0] == pytest.approx(float(ndtr(math.sqrt(2))), abs=1e-6)


def test_hinge_far_below_support():
    x0 = 0.7
    m = model_for(PriorSpec.point_mass(x0))
    y = 0.2
    a = y - 12.0
    assert gauss_hinge_abs(1.0, m, y, a, "hinge").value == pytest.approx(x0 - a, abs=1e-6)


def test_absolute_risk_folded_normal(std_normal_prior):
    m = model_for(std_normal_prior)
    res = gauss_hinge_abs(1.0, m, 0.0, 0.0, "absolute")
    assert res.value == pytest.approx(math.sqrt(2 / math.pi) * math.sqrt(0.5), abs=1e-4)


def test_leading_terms_match_limit_for_flat_prior():
    # with a very diffuse prior the correction series vanishes
    m = model_for(PriorSpec.normal(0.0, 1e4))
    res = gauss_hinge_abs(1.0, m, 0.3, 0.1, "hinge")
    assert res.details["leading"] == pytest.approx(res.value, abs=1e-3)


def test_pinball_from_hinge_and_absolute():
    tau, a, y = 0.3, 0.2, 0.5
    m = model_for(SMOOTH)
    hinge = gauss_hinge_abs(1.0, m, y, a, "hinge").value
    absolute = gauss_hinge_abs(1.0, m, y, a, "absolute").value
    reverse = absolute - hinge
    want = oracle_posterior(SMOOTH, NoiseSpec.gaussian(1.0), F.pinball(a, tau), y)
    assert tau * hinge + (1 - tau) * reverse == pytest.approx(want, abs=1e-4)


# --------------------------------------------------------------------------
# heteroskedastic conditioning


def test_condition_single_matching_atom():
    joint = HeteroJointSpec.from_triples([(0.0, 1.0, 0.5), (3.0, 4.0, 0.5)])
    model, prior = hetero_condition(joint, 1.0)
    np.testing.assert_allclose(prior.locations[:, 0], [0.0])
    y = np.linspace(-2, 2, 5)
    np.testing.assert_allclose(model.eval(y), np.exp(-y * y / 2) / math.sqrt(2 * math.pi), rtol=1e-14)


def test_condition_renormalises():
    joint = HeteroJointSpec.from_triples([(0.0, 1.0, 0.2), (2.0, 1.0, 0.2), (3.0, 4.0, 0.6)])
    _, prior = hetero_condition(joint, 1.0)
    np.testing.assert_allclose(prior.weights, [0.5, 0.5])


def test_condition_without_mass():
    joint = HeteroJointSpec.from_triples([(0.0, 1.0, 1.0)])
    with pytest.raises(NoMass):
        hetero_condition(joint, 2.0)


@settings(max_examples=25, deadline=None)
@given(y=st.floats(-3, 4), s2=st.floats(0.2, 4.0))
def test_single_variance_joint_is_homoskedastic(y, s2):
    joint = HeteroJointSpec.from_triples([(-1.0, s2, 0.3), (0.0, s2, 0.4), (2.0, s2, 0.3)])
    model, prior = hetero_condition(joint, s2)
    homo = gaussian_mixture_density(PriorSpec.atomic([-1.0, 0.0, 2.0], [0.3, 0.4, 0.3]), s2)
    for fs in (F.mean(), F.variance(), F.raw_moment(3)):
        assert gauss_functional(s2, model, y, fs).value == gauss_functional(s2, homo, y, fs).value


# --------------------------------------------------------------------------
# multivariate


def test_multivariate_point_mass():
    m = gaussian_mixture_density(PriorSpec.atomic([[1.0, 2.0]], [1.0]), np.eye(2))
    y = np.array([0.3, -0.4])
    np.testing.assert_allclose(gauss_multivariate(np.eye(2), m, y, "mean").value, [1.0, 2.0], atol=1e-8)
    np.testing.assert_allclose(gauss_multivariate(np.eye(2), m, y, "cov").value, np.zeros((2, 2)), atol=1e-8)
    assert gauss_multivariate(np.eye(2), m, y, "mgf", t=[0.0, 0.0]).value == 1.0


def test_multivariate_conjugate():
    T = np.array([[1.0, 0.3], [0.3, 0.5]])
    S = np.array([[0.8, -0.1], [-0.1, 1.2]])
    m = gaussian_mixture_density(PriorSpec.gaussian_mixture([[0.0, 0.0]], [T], [1.0]), S)
    y = np.array([0.7, -0.4])
    post_cov = np.linalg.inv(np.linalg.inv(S) + np.linalg.inv(T))
    post_mean = post_cov @ np.linalg.solve(S, y)
    np.testing.assert_allclose(gauss_multivariate(S, m, y, "mean").value, post_mean, atol=1e-12)
    cov = gauss_multivariate(S, m, y, "cov").value
    np.testing.assert_allclose(cov, post_cov, atol=1e-12)
    t = np.array([0.2, -0.3])
    want = math.exp(t @ post_mean + 0.5 * t @ post_cov @ t)
    assert gauss_multivariate(S, m, y, "mgf", t=t).value == pytest.approx(want, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(y1=st.floats(-3, 3), y2=st.floats(-3, 3))
def test_multivariate_cov_symmetric_psd(y1, y2):
    prior = PriorSpec.atomic([[0.0, 0.0], [1.0, -1.0], [2.0, 1.0]], [0.3, 0.3, 0.4])
    m = gaussian_mixture_density(prior, np.eye(2))
    cov = gauss_multivariate(np.eye(2), m, [y1, y2], "cov").value
    np.testing.assert_array_equal(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() >= -1e-8


def test_multivariate_matches_oracle_through_evaluate():
    prior = PriorSpec.atomic([[0.0, 0.0], [1.0, 0.5]], [0.5, 0.5])
    noise = NoiseSpec.gaussian(0.9)
    y = [0.2, 0.4]
    for fs in (F.mean(), F.variance(), F.mgf((0.3, -0.2))):
        np.testing.assert_allclose(evaluate(noise, prior, y, fs).value, oracle_posterior(prior, noise, fs, y),
                                   atol=1e-12)


def test_nonzero_noise_location():
    prior = SMOOTH
    noise = NoiseSpec.gaussian(1.0, mu=0.5)
    for fs in (F.mean(), F.variance(), F.mgf(0.4), F.cdf(0.2)):
        want = oracle_posterior(prior, noise, fs, 0.8)
        assert evaluate(noise, exact_density(prior, noise), 0.8, fs).value == pytest.approx(want, abs=1e-4)
