import numpy as np
import pytest

from tweedie import (
    DimensionMismatch, FunctionalSpec, InvalidPrior, MgfDomain, NoiseSpec,
    ParamOutOfRange, PriorSpec, Unsupported, validate_functional, validate_noise,
)
from tweedie.core import check_density, DensityTooSmall


@pytest.mark.parametrize("family, params", [
    ("gaussian", {"sigma": 0.0}),
    ("laplace", {"b": -1.0}),
    ("generalized_laplace", {"b": 1.0, "lam": 0.5}),
    ("gamma", {"alpha": 1.0, "theta": 1.0}),
    ("noncentral_chisq", {"nu": 2.0, "delta": 0.0}),
    ("noncentral_chisq", {"nu": 4.0, "delta": -0.1}),
    ("inverse_gaussian", {"mu": 0.0, "lam": 1.0}),
    ("cauchy", {"gamma": float("nan")}),
])
def test_boundary_and_invalid_parameters_rejected(family, params):
    with pytest.raises(ParamOutOfRange):
        validate_noise(NoiseSpec(family, params))


def test_noise_spec_defaults_and_aliases():
    n = NoiseSpec("Normal", {"sigma": 2})
    assert n.family == "gaussian" and n.mu == 0.0 and n.sigma == 2.0
    assert NoiseSpec("sech", {"s": 1}).family == "hyperbolic_secant"
    assert NoiseSpec.product_laplace(0.5, d=3).dim == 3
    with pytest.raises(ValueError):
        NoiseSpec("laplace", {"b": 1, "sigma": 2})
    with pytest.raises(ValueError):
        NoiseSpec("gumbel", {})


def test_noise_spec_hashable_and_equal():
    a = NoiseSpec.laplace(1.0)
    b = NoiseSpec("laplace", {"b": 1})
    assert a == b and hash(a) == hash(b)


def test_weights_renormalised_within_tolerance():
    p = PriorSpec.atomic([0.0, 1.0], [0.5, 0.5 + 5e-13])
    np.testing.assert_allclose(p.weights.sum(), 1.0, rtol=0, atol=1e-15)
    with pytest.raises(InvalidPrior):
        PriorSpec.atomic([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(InvalidPrior):
        PriorSpec.atomic([0.0, 0.0], [0.5, 0.5])


def test_prior_shift_and_shapes():
    p = PriorSpec.atomic([[0.0, 1.0], [2.0, 3.0]], [0.25, 0.75])
    assert p.dim == 2 and p.size == 2
    np.testing.assert_allclose(p.shifted(1.5).locations, p.locations + 1.5)


@pytest.mark.parametrize("text, target", [
    ("mean", "mean"), ("mgf:0.5", "mgf"), ("pinball:0,0.3", "pinball"),
    ("even_risk:0.5,2", "even_risk"), ("raw_moment:3", "raw_moment"),
])
def test_functional_parse_round_trip(text, target):
    f = FunctionalSpec.parse(text)
    assert f.target == target
    assert FunctionalSpec.parse(f.label) == f


def test_functional_parse_vector_mgf():
    f = FunctionalSpec.parse("mgf:0.3;-0.2")
    assert f.t == (0.3, -0.2)


def test_pinball_level_must_be_interior():
    with pytest.raises(ValueError):
        FunctionalSpec.pinball(0.0, 1.0)


def test_support_matrix():
    lap = NoiseSpec.laplace(1.0)
    validate_functional(FunctionalSpec.mean(), lap)
    with pytest.raises(Unsupported):
        validate_functional(FunctionalSpec.variance(), lap)
    pl = NoiseSpec.product_laplace(1.0)
    with pytest.raises(MgfDomain):
        validate_functional(FunctionalSpec.mgf(1.0), pl)
    with pytest.raises(Unsupported):
        validate_functional(FunctionalSpec.cdf(0.0), NoiseSpec.product_laplace(1.0, d=2))
    with pytest.raises(DimensionMismatch):
        validate_functional(FunctionalSpec.mgf((0.1,)), NoiseSpec.product_laplace(1.0, d=2))
    g = NoiseSpec.gaussian(1.0)
    with pytest.raises(Unsupported):
        validate_functional(FunctionalSpec.raw_moment(11), g)
    with pytest.raises(Unsupported):
        validate_functional(FunctionalSpec.even_risk(0.0, 6), g)
    with pytest.raises(Unsupported):
        validate_functional(FunctionalSpec.pinball(0.0, 0.3), g)


def test_validate_functional_idempotent():
    f = FunctionalSpec.hinge(0.2)
    n = NoiseSpec.product_laplace(1.0)
    assert validate_functional(validate_functional(f, n), n) is f


def test_density_floor():
    assert check_density(1e-200) == 1e-200
    with pytest.raises(DensityTooSmall):
        check_density(1e-320)
