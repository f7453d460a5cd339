import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tweedie import (
    DimensionMismatch, FunctionalSpec as F, MgfDomain, NoiseSpec, PriorSpec,
    evaluate, exact_density, lm_cov, lm_functional_1d, lm_mean_vec, lm_mgf,
    oracle_posterior,
)
from tweedie.laplace_mech import pinball_with_level

B = 1.0
NOISE = NoiseSpec.product_laplace(B)
TWO = PriorSpec.atomic([0.0, 1.0], [0.5, 0.5])
ROWS = [F.mean(), F.second_moment(), F.variance(), F.mgf(0.4), F.mgf(-0.9), F.cdf(0.5), F.cdf(1.0),
        F.squared_risk(0.3), F.hinge(0.5), F.hinge(-1.0), F.pinball(0.5, 0.3), F.pinball(2.0, 0.8),
        F.absolute_risk(0.5), F.absolute_risk(1.0)]


@pytest.fixture(scope="module")
def model():
    return exact_density(TWO, NOISE)


@pytest.mark.parametrize("fs", ROWS, ids=lambda f: f.label)
@pytest.mark.parametrize("y", [-0.5, 0.3, 1.4])
def test_rows_against_oracle(model, fs, y):
    got = lm_functional_1d(B, model, y, fs).value
    assert got == pytest.approx(oracle_posterior(TWO, NOISE, fs, y), abs=1e-9)


@pytest.mark.parametrize("fs", [F.mean(), F.variance(), F.cdf(0.4), F.hinge(0.2), F.absolute_risk(0.6)],
                         ids=lambda f: f.label)
def test_mixture_prior_rows(fs):
    prior = PriorSpec.gaussian_mixture([[0.0], [1.5]], [[[0.5]], [[0.3]]], [0.6, 0.4])
    m = exact_density(prior, NOISE)
    y = 0.7
    assert lm_functional_1d(B, m, y, fs).value == pytest.approx(oracle_posterior(prior, NOISE, fs, y), abs=1e-6)


def test_cdf_two_atom_arithmetic(model):
    y = 0.3
    f0, f1 = math.exp(-0.3) / 2, math.exp(-0.7) / 2
    assert lm_functional_1d(B, model, y, F.cdf(0.5)).value == pytest.approx(f0 / (f0 + f1), abs=1e-12)


@pytest.mark.parametrize("a", [-0.4, 0.0, 0.6])
def test_cdf_single_atom_is_indicator(a):
    m = exact_density(PriorSpec.point_mass(0.0), NOISE)
    for y in (-0.5, 0.3, 1.4):
        assert lm_functional_1d(B, m, y, F.cdf(a)).value == pytest.approx(float(a >= 0), abs=1e-12)


def test_pinball_limits(model):
    # tau = 1 is the hinge, tau = 1/2 is half the absolute risk
    for y in (-0.5, 0.3, 1.4):
        hinge = lm_functional_1d(B, model, y, F.hinge(0.5)).value
        assert pinball_with_level(B, model, y, 0.5, 1.0) == pytest.approx(hinge, abs=1e-12)
        half_abs = 0.5 * lm_functional_1d(B, model, y, F.absolute_risk(0.5)).value
        assert lm_functional_1d(B, model, y, F.pinball(0.5, 0.5)).value == pytest.approx(half_abs, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(y=st.floats(-3, 4), a=st.floats(-3, 4))
def test_squared_risk_minimised_at_mean(model, y, a):
    mean = lm_functional_1d(B, model, y, F.mean()).value
    at_mean = lm_functional_1d(B, model, y, F.squared_risk(mean)).value
    elsewhere = lm_functional_1d(B, model, y, F.squared_risk(a)).value
    assert at_mean <= elsewhere + 1e-10
    assert elsewhere - at_mean == pytest.approx((a - mean) ** 2, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(y=st.floats(-4, 5))
def test_variance_nonnegative_and_mgf_zero(model, y):
    assert lm_functional_1d(B, model, y, F.variance()).value >= -1e-9
    assert lm_functional_1d(B, model, y, F.mgf(0.0)).value == 1.0


def test_mgf_domain(model):
    with pytest.raises(MgfDomain):
        lm_functional_1d(B, model, 0.0, F.mgf(1.0))


# --------------------------------------------------------------------------
# multivariate


MV = PriorSpec.atomic([[0.0, 0.0], [1.0, 0.5]], [0.5, 0.5])
MV_NOISE = NoiseSpec.product_laplace(B, d=2)


@pytest.fixture(scope="module")
def mv_model():
    return exact_density(MV, MV_NOISE)


@pytest.mark.parametrize("y", [[0.2, -0.3], [0.9, 0.6]])
def test_multivariate_against_oracle(mv_model, y):
    np.testing.assert_allclose(lm_mean_vec(B, mv_model, y).value, oracle_posterior(MV, MV_NOISE, F.mean(), y),
                               atol=1e-8)
    cov = lm_cov(B, mv_model, y).value
    np.testing.assert_allclose(cov, oracle_posterior(MV, MV_NOISE, F.variance(), y), atol=1e-8)
    np.testing.assert_array_equal(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() >= -1e-8
    t = (0.3, -0.2)
    assert lm_mgf(B, mv_model, y, t).value == pytest.approx(oracle_posterior(MV, MV_NOISE, F.mgf(t), y), abs=1e-8)


def test_multivariate_mgf_at_zero(mv_model):
    res = lm_mgf(B, mv_model, [0.1, 0.2], (0.0, 0.0))
    assert res.value == 1.0 and res.series_terms_used == 1


def test_multivariate_dispatch(mv_model):
    got = evaluate(MV_NOISE, mv_model, [0.2, -0.3], F.mean()).value
    np.testing.assert_allclose(got, lm_mean_vec(B, mv_model, [0.2, -0.3]).value)


def test_dimension_limits():
    prior = PriorSpec.atomic([[0.0] * 4], [1.0])
    m = exact_density(prior, NoiseSpec.product_laplace(B, d=4))
    with pytest.raises(DimensionMismatch):
        lm_cov(B, m, [0.0] * 4)
    with pytest.raises(DimensionMismatch):
        lm_functional_1d(B, m, 0.0, F.mean())
