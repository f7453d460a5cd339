"""Built-in validation suites: formula rules against direct Bayes."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .core import FunctionalSpec as F, NoiseSpec, PriorSpec
from .densities import exact_density
from .gaussian import HeteroJointSpec, gauss_cdf, gauss_functional, hetero_condition
from .laplace_mech import lm_cov, lm_mean_vec, lm_mgf
from .oracle import ValidationCase, oracle_posterior, sample_joint

SUITE_SEED = 20251019

THREE_ATOMS = PriorSpec.atomic([-1.0, 0.0, 2.0], [0.3, 0.4, 0.3])
TWO_ATOMS = PriorSpec.atomic([0.0, 1.0], [0.5, 0.5])

# family -> (parameters, tolerance)
MEAN_RULE_NOISES = {
    "gaussian": ({"sigma": 1.0}, 1e-6),
    "laplace": ({"b": 1.0}, 1e-6),
    "asymmetric_laplace": ({"b_minus": 1.0, "b_plus": 2.0}, 1e-6),
    "logistic": ({"s": 0.7}, 1e-6),
    "gumbel": ({"beta": 1.0}, 1e-6),
    "cauchy": ({"gamma": 1.0}, 1e-6),
    "hyperbolic_secant": ({"s": 0.7}, 1e-6),
    "gamma": ({"alpha": 2.0, "theta": 1.0}, 1e-6),
    "generalized_laplace": ({"b": 1.0, "lam": 1.5}, 1e-4),
    "noncentral_chisq": ({"nu": 4.0, "delta": 1.5}, 1e-4),
    "inverse_gaussian": ({"mu": 1.0, "lam": 2.0}, 1e-4),
}


def central_grid(prior, noise, n_points=21, coverage=0.99, n_draws=200_000, seed=SUITE_SEED):
    """``n_points`` evenly spaced between the central-``coverage`` sample quantiles of Y."""
    _, y = sample_joint(prior, noise, n_draws, seed)
    lo, hi = np.quantile(y, [(1 - coverage) / 2, (1 + coverage) / 2])
    return np.linspace(lo, hi, n_points)


def posterior_mean_suite(seed=SUITE_SEED):
    cases = []
    for fam, (params, tol) in MEAN_RULE_NOISES.items():
        noise = NoiseSpec(fam, params)
        ys = central_grid(THREE_ATOMS, noise, seed=seed)
        cases.append(ValidationCase(THREE_ATOMS, noise, F.mean(), list(ys), tol))
    return cases


LAPLACE_FUNCTIONALS = [
    (F.mean(), 1e-6),
    (F.second_moment(), 1e-6),
    (F.variance(), 1e-6),
    (F.mgf(0.4), 1e-6),
    (F.mgf(-0.7), 1e-6),
    (F.cdf(0.5), 1e-6),
    (F.cdf(-0.2), 1e-6),
    (F.squared_risk(0.5), 1e-6),
    (F.hinge(0.5), 1e-5),
    (F.pinball(0.5, 0.3), 1e-5),
    (F.absolute_risk(0.5), 1e-5),
    (F.absolute_risk(1.2), 1e-5),
]
LAPLACE_YS = [-0.5, 0.3, 1.4]


def laplace_mechanism_suite():
    noise = NoiseSpec.product_laplace(1.0)
    cases = [ValidationCase(TWO_ATOMS, noise, fs, LAPLACE_YS, tol) for fs, tol in LAPLACE_FUNCTIONALS]
    # one atom: the CDF is an exact indicator
    one = PriorSpec.point_mass(0.0)
    for a in (-0.4, 0.0, 0.6):
        cases.append(ValidationCase(one, noise, F.cdf(a), LAPLACE_YS, 1e-12,
                                    oracle=lambda y, a=a: float(0.0 <= a)))
    return cases


MV_PRIOR = PriorSpec.atomic([[0.0, 0.0], [1.0, 0.5]], [0.5, 0.5])
MV_YS = [[0.2, -0.3], [0.9, 0.6], [-0.5, 1.1]]


def multivariate_suite():
    noise = NoiseSpec.product_laplace(1.0, d=2)
    model = exact_density(MV_PRIOR, noise)
    t = (0.3, -0.2)
    return [
        ValidationCase(MV_PRIOR, noise, F.mean(), MV_YS, 1e-5,
                       formula=lambda y: lm_mean_vec(1.0, model, y).value),
        ValidationCase(MV_PRIOR, noise, F.variance(), MV_YS, 1e-5,
                       formula=lambda y: lm_cov(1.0, model, y).value),
        ValidationCase(MV_PRIOR, noise, F.mgf(t), MV_YS, 1e-5,
                       formula=lambda y: lm_mgf(1.0, model, y, t).value),
    ]


HETERO_JOINT = HeteroJointSpec.from_triples([(0.0, 0.25, 0.25), (1.0, 1.0, 0.5), (3.0, 4.0, 0.25)])
HETERO_FUNCTIONALS = [F.mean(), F.variance(), F.mgf(0.4), F.raw_moment(3), F.even_risk(0.5, 1)]
HETERO_YS = list(np.linspace(-2.0, 4.0, 11))


def joint_oracle(joint: HeteroJointSpec, sigma2, fspec: F):
    """Conditional posterior functional straight from the joint atom table."""
    x = joint.locations[:, 0]
    keep = np.isclose(joint.variances, sigma2, rtol=1e-12, atol=0)

    def run(y):
        w = joint.weights[keep] * np.exp(-(y - x[keep]) ** 2 / (2 * sigma2)) / math.sqrt(2 * math.pi * sigma2)
        w = w / w.sum()
        xs = x[keep]
        mean = float(w @ xs)
        t = fspec.target
        if t == "mean":
            return mean
        if t == "variance":
            return float(w @ (xs - mean) ** 2)
        if t == "mgf":
            return float(w @ np.exp(fspec.t * xs))
        if t == "raw_moment":
            return float(w @ xs ** fspec.k)
        if t == "even_risk":
            return float(w @ (xs - fspec.a) ** (2 * fspec.m))
        raise ValueError(t)

    return run


def heteroskedastic_suite(joint: HeteroJointSpec = HETERO_JOINT):
    cases = []
    for s2 in joint.distinct_variances():
        s2 = float(s2)
        model, prior = hetero_condition(joint, s2)
        noise = NoiseSpec.gaussian(math.sqrt(s2))
        for fs in HETERO_FUNCTIONALS:
            cases.append(ValidationCase(
                prior, noise, fs, HETERO_YS, 1e-6, family=f"hetero(sigma2={s2:g})",
                formula=lambda y, m=model, s=s2, f=fs: gauss_functional(s, m, y, f).value,
                oracle=joint_oracle(joint, s2, fs)))
    return cases


def conjugate_suite():
    """N(0,1) prior, unit Gaussian noise: the posterior is N(y/2, 1/2)."""
    prior = PriorSpec.normal(0.0, 1.0)
    noise = NoiseSpec.gaussian(1.0)
    model = exact_density(prior, noise)
    ys = [-2.0, 0.0, 2.0]
    sd = math.sqrt(0.5)
    cases = [
        ValidationCase(prior, noise, F.mean(), ys, 1e-8, oracle=lambda y: y / 2),
        ValidationCase(prior, noise, F.variance(), ys, 1e-8, oracle=lambda y: 0.5),
        ValidationCase(prior, noise, F.mgf(0.5), ys, 1e-8,
                       oracle=lambda y: math.exp(0.5 * y / 2 + 0.25 * 0.5 / 2)),
    ]
    for a in (-1.0, 0.0, 1.0):
        cases.append(ValidationCase(
            prior, noise, F.cdf(a), ys, 1e-4,
            formula=lambda y, a=a: gauss_cdf(1.0, model, y, a, K=60, n_schedule=(1e2, 1e3, 1e4)).value,
            oracle=lambda y, a=a: float(ndtr((a - y / 2) / sd))))
    return cases


SUITES = {
    "table1": posterior_mean_suite,
    "table2": laplace_mechanism_suite,
    "table3": heteroskedastic_suite,
    "conjugate": conjugate_suite,
    "laplace_multivariate": multivariate_suite,
}


def builtin_suite(name: str):
    try:
        return SUITES[name]()
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}") from None
