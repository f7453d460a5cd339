import math

import numpy as np
import pytest
from scipy.stats import norm

from tweedie import (
    DimensionMismatch, NoiseSpec, PriorSpec, TooFewSamples, density_deriv,
    exact_density, kde_fit, right_deriv,
)
from tweedie.densities import GaussianMixtureDensity, integrate_kernel, silverman_bandwidth
from tweedie.oracle import sample_joint
from tweedie.suites import MEAN_RULE_NOISES


def mean_rule_noise(family):
    return NoiseSpec(family, MEAN_RULE_NOISES[family][0])

SMOOTH_CASES = [
    ("gaussian", {"sigma": 1.0}),
    ("logistic", {"s": 0.7}),
    ("hyperbolic_secant", {"s": 0.7}),
    ("cauchy", {"gamma": 1.0}),
    ("gumbel", {"beta": 1.0}),
]


def test_gaussian_mixture_matches_scipy(three_atoms):
    m = exact_density(three_atoms, NoiseSpec.gaussian(1.3))
    y = np.linspace(-4, 5, 19)
    want = sum(w * norm.pdf(y, x, 1.3) for x, w in zip([-1, 0, 2], [0.3, 0.4, 0.3]))
    np.testing.assert_allclose(m.eval(y), want, rtol=1e-13)


def test_normal_prior_marginal(std_normal_prior):
    m = exact_density(std_normal_prior, NoiseSpec.gaussian(1.0))
    y = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(m.eval(y), norm.pdf(y, 0, math.sqrt(2)), rtol=1e-13)
    # second derivative of the N(0, 2) density
    np.testing.assert_allclose(m.eval(y, 2), norm.pdf(y, 0, math.sqrt(2)) * (y * y / 4 - 0.5), rtol=1e-12)


@pytest.mark.parametrize("family, params", SMOOTH_CASES)
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_derivative_consistency(three_atoms, family, params, k):
    m = exact_density(three_atoms, NoiseSpec(family, params))
    y = np.linspace(-3, 4, 21)
    h = 1e-5
    fd = (density_deriv(m, y + h, k - 1) - density_deriv(m, y - h, k - 1)) / (2 * h)
    np.testing.assert_allclose(density_deriv(m, y, k), fd, atol=1e-5)


def test_laplace_right_derivative_at_kink(two_atoms):
    m = exact_density(two_atoms, NoiseSpec.laplace(1.0))
    h = 1e-7
    for a in (0.0, 1.0, 0.4):
        fd = (m.eval(a + h) - m.eval(a)) / h
        assert right_deriv(m, a) == pytest.approx(fd, abs=1e-6)


@pytest.mark.parametrize("family", ["gaussian", "laplace", "gamma", "cauchy", "inverse_gaussian"])
def test_nonnegative(three_atoms, family, rng):
    m = exact_density(three_atoms, mean_rule_noise(family))
    assert np.all(m.eval(rng.uniform(-10, 10, 1000)) >= 0)


def test_mixture_linearity_under_atom_split():
    noise = NoiseSpec.laplace(0.8)
    a = exact_density(PriorSpec.atomic([0.0, 1.0], [0.5, 0.5]), noise)
    y = np.linspace(-2, 3, 11)
    half = 0.5 * exact_density(PriorSpec.point_mass(0.0), noise).eval(y) \
        + 0.5 * exact_density(PriorSpec.point_mass(1.0), noise).eval(y)
    np.testing.assert_allclose(a.eval(y), half, rtol=1e-14)


@pytest.mark.parametrize("family", ["laplace", "logistic", "gamma"])
def test_translation_equivariance(three_atoms, family):
    noise = mean_rule_noise(family)
    c = 0.75
    m = exact_density(three_atoms, noise)
    ms = exact_density(three_atoms.shifted(c), noise)
    y = np.linspace(-2, 5, 15)
    np.testing.assert_allclose(ms.eval(y + c), m.eval(y), rtol=1e-12, atol=1e-300)


def test_density_integrates_to_one(three_atoms):
    for family in ("gaussian", "inverse_gaussian", "noncentral_chisq"):
        m = exact_density(three_atoms, mean_rule_noise(family))
        assert integrate_kernel(m, lambda z: np.ones_like(z), tol=1e-10).value == pytest.approx(1.0, abs=1e-8)


def test_mixture_prior_under_laplace_noise():
    prior = PriorSpec.normal(0.5, 0.3)
    m = exact_density(prior, NoiseSpec.laplace(1.0))
    assert integrate_kernel(m, lambda z: z, tol=1e-9).value == pytest.approx(0.5, abs=1e-7)


def test_multivariate_gaussian_gradient_and_hessian():
    prior = PriorSpec.atomic([[0.0, 0.0], [1.0, -1.0]], [0.4, 0.6])
    m = exact_density(prior, NoiseSpec.gaussian(0.8))
    y = np.array([0.3, -0.2])
    h = 1e-5
    g_fd = np.array([(m.eval(y + h * e) - m.eval(y - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(m.grad(y), g_fd, atol=1e-8)
    H_fd = np.array([(m.grad(y + h * e) - m.grad(y - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(m.hessian(y), H_fd, atol=1e-8)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        exact_density(PriorSpec.atomic([[0.0, 0.0]], [1.0]), NoiseSpec.laplace(1.0))


def test_kde_requires_ten_samples():
    with pytest.raises(TooFewSamples):
        kde_fit(np.arange(9.0))


def test_silverman_rule():
    x = np.random.default_rng(0).standard_normal(1000)
    sd = x.std(ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    assert silverman_bandwidth(x) == pytest.approx(0.9 * min(sd, iqr / 1.34) * 1000 ** -0.2)


def test_kde_is_a_gaussian_mixture_with_derivatives(std_normal_prior):
    _, y = sample_joint(std_normal_prior, NoiseSpec.gaussian(1.0), 5000, seed=7)
    m = kde_fit(y, 0.3)
    assert isinstance(m, GaussianMixtureDensity)
    assert m.max_derivative_order == 80
    assert integrate_kernel(m, lambda z: np.ones_like(z)).value == pytest.approx(1.0, abs=1e-9)
    assert m.eval(0.0) == pytest.approx(norm.pdf(0, 0, math.sqrt(2 + 0.09)), rel=0.05)
