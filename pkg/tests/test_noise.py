import math

import numpy as np
import pytest
from scipy import stats

from tweedie import NoiseSpec, noise_pdf
from tweedie.noise import make_rng, noise_law
from tweedie.numerics import adaptive_integrate
from tweedie.suites import MEAN_RULE_NOISES

FAMILIES = sorted(MEAN_RULE_NOISES)


def spec(family):
    return NoiseSpec(family, MEAN_RULE_NOISES[family][0])


@pytest.mark.parametrize("family", FAMILIES)
def test_density_integrates_to_one(family):
    law = noise_law(spec(family))
    lo, hi = law.support
    total = adaptive_integrate(law.pdf, lo, hi, abs_tol=1e-10, rel_tol=1e-12, points=[*law.kinks, 0.0, 1.0])
    assert total.value == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("family", FAMILIES)
def test_positive_at_mode_region(family):
    v = 1.0 if family in ("gamma", "noncentral_chisq", "inverse_gaussian") else 0.0
    assert noise_pdf(spec(family), v) > 0


@pytest.mark.parametrize("family, ref", [
    ("gaussian", stats.norm()),
    ("laplace", stats.laplace()),
    ("logistic", stats.logistic(scale=0.7)),
    ("gumbel", stats.gumbel_r()),
    ("cauchy", stats.cauchy()),
    ("hyperbolic_secant", stats.hypsecant(scale=0.7 * 2 / math.pi)),
    ("gamma", stats.gamma(2.0)),
    ("noncentral_chisq", stats.ncx2(4.0, 1.5)),
    ("inverse_gaussian", stats.invgauss(0.5, scale=2.0)),
])
def test_density_against_reference(family, ref):
    v = np.linspace(0.05, 6, 25) if family in ("gamma", "noncentral_chisq", "inverse_gaussian") \
        else np.linspace(-5, 5, 25)
    np.testing.assert_allclose(noise_pdf(spec(family), v), ref.pdf(v), rtol=1e-9, atol=1e-14)


def test_generalized_laplace_reduces_to_laplace():
    v = np.linspace(-4, 4, 17)
    gl = noise_pdf(NoiseSpec("generalized_laplace", {"b": 1.3, "lam": 1.0}), v)
    np.testing.assert_allclose(gl, np.exp(-np.abs(v) / 1.3) / 2.6, atol=1e-8)


def test_noncentral_chisq_reduces_to_central():
    v = np.linspace(0.1, 10, 20)
    np.testing.assert_allclose(noise_pdf(NoiseSpec("noncentral_chisq", {"nu": 4.0, "delta": 0.0}), v),
                               stats.chi2(4).pdf(v), rtol=1e-12)


def test_gaussian_peak():
    assert noise_pdf(NoiseSpec.gaussian(2.0), 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi * 4))


def test_product_laplace_factorises():
    v = np.array([[0.3, -1.2], [2.0, 0.1]])
    lap = noise_pdf(NoiseSpec.laplace(0.7), v)
    np.testing.assert_allclose(noise_pdf(NoiseSpec.product_laplace(0.7, d=2), v), lap.prod(axis=1))


@pytest.mark.parametrize("family", FAMILIES)
def test_sampler_matches_density(family):
    law = noise_law(spec(family))
    draws = np.sort(law.sample(make_rng(99), 100_000))
    lo = law.support[0]
    # CDF by integrating the density at a few quantiles of the draws
    qs = np.quantile(draws, [0.05, 0.25, 0.5, 0.75, 0.95])
    start = lo if math.isfinite(lo) else draws[0] - 50
    cdf = np.array([adaptive_integrate(law.pdf, start, q, abs_tol=1e-9, points=law.kinks).value for q in qs])
    if not math.isfinite(lo):
        cdf += np.mean(draws <= start)
    emp = np.searchsorted(draws, qs, side="right") / draws.size
    assert np.max(np.abs(cdf - emp)) < 0.01


def test_rng_determinism():
    a = make_rng(5).standard_normal(10)
    b = make_rng(5).standard_normal(10)
    np.testing.assert_array_equal(a, b)
    assert isinstance(make_rng(5).bit_generator, np.random.Philox)


def test_gumbel_variance():
    draws = noise_law(NoiseSpec("gumbel", {"beta": 1.0})).sample(make_rng(3), 10**6)
    assert draws.var() == pytest.approx(math.pi ** 2 / 6, rel=0.02)
