"""Posterior means read off the marginal density, one rule per noise family.

Every rule has the shape ``E[X | Y=y] = (shift) + T[f_Y](y) / f_Y(y)`` where
``T`` is a linear functional of the marginal: a derivative, a one-sided
exponentially weighted integral, a compensated kernel integral or a
principal-value transform.  The expectation-form representer for standard
Gaussian noise lives here too.
"""

from __future__ import annotations

import math

import numpy as np

from .core import (
    DimensionMismatch, DomainError, EvalResult, NoiseSpec, check_density,
    validate_noise,
)
from .densities import DensityModel, GaussianMixtureDensity
from .noise import make_rng
from .numerics import adaptive_integrate, hilbert_transform

EULER_GAMMA = 0.57721566490153286061
SMALL_T = 1e-6


def _slope(model: DensityModel, y: float) -> float:
    if model.max_derivative_order >= 1:
        return float(model.eval(y, 1))
    h = 1e-6
    return float((model.eval(y + h) - model.eval(y - h)) / (2 * h))


def _points(model, y, sign=1.0):
    """Landmarks expressed as offsets ``t = sign * (z - y) > 0``."""
    return [sign * (z - y) for z in model.landmarks() if sign * (z - y) > 0]


def _one_sided(model, y, weight, side, tol):
    """``∫ weight(|z - y|) f(z) dz`` over z > y (side=+1) or z < y (side=-1)."""
    lo, hi = model.support()
    if side > 0:
        upper = hi - y
    else:
        upper = y - lo
    if upper <= 0:
        return 0.0, 0.0

    def integrand(t):
        return weight(t) * model.eval(y + side * t)

    res = adaptive_integrate(integrand, 0.0, upper, abs_tol=tol, rel_tol=1e-13,
                             points=_points(model, y, side))
    return res.value, res.error_estimate


def _laplace_type(model, y, b_right, b_left, tol):
    right, e1 = _one_sided(model, y, lambda t: np.exp(-t / b_right), +1, tol)
    left, e2 = _one_sided(model, y, lambda t: np.exp(-t / b_left), -1, tol)
    return right - left, e1 + e2


def _tail_cutoff(decay_scale, bound, tol):
    """Smallest T with ``bound * exp(-T / decay_scale) < tol / 10`` (conservatively)."""
    return decay_scale * (math.log1p(20.0 * bound / tol) + 1.0)


def _symmetric_kernel(model, y, kernel, small_t_coef, decay_scale, tol):
    """``∫_0^∞ (f(y+t) - f(y-t)) k(t) dt`` with an analytic small-t piece."""
    slope = _slope(model, y)
    head = small_t_coef * slope * SMALL_T
    T = _tail_cutoff(decay_scale, model.l1_bound, tol)
    pts = sorted({*_points(model, y, 1), *_points(model, y, -1)})

    def integrand(t):
        return (model.eval(y + t) - model.eval(y - t)) * kernel(t)

    res = adaptive_integrate(integrand, SMALL_T, T, abs_tol=tol / 2, rel_tol=1e-13, points=pts)
    return head + res.value, res.error_estimate + tol / 10


def posterior_mean(noise: NoiseSpec, model: DensityModel, y: float, tol: float = 1e-9) -> EvalResult:
    """Posterior mean ``E[X | Y = y]`` from the marginal density.

    Parameters
    ----------
    noise : NoiseSpec
        One of the scalar families (product-Laplace with d=1 is treated as
        Laplace(0, b)).
    model : DensityModel
        Marginal density of Y; exact or estimated.
    y : float
    tol : float
        Target absolute accuracy of the returned mean.

    Raises
    ------
    DensityTooSmall
        When ``f_Y(y) < 1e-300``.
    """
    validate_noise(noise)
    if model.dim != 1 or noise.dim != 1:
        raise DimensionMismatch("posterior_mean works in one dimension")
    y = float(y)
    f = check_density(float(model.eval(y)))
    fam, p = noise.family, noise.params
    qtol = 0.25 * tol * f  # absolute tolerance on numerator integrals
    err = 0.0

    if fam == "gaussian":
        value = y - p["mu"] + p["sigma"] ** 2 * float(model.eval(y, 1)) / f
    elif fam in ("laplace", "generalized_laplace", "product_laplace"):
        b = p["b"]
        lam = p.get("lam", 1.0)
        num, err = _laplace_type(model, y, b, b, qtol / lam)
        value = y - noise.location + lam * num / f
        err *= lam
    elif fam == "asymmetric_laplace":
        num, err = _laplace_type(model, y, p["b_minus"], p["b_plus"], qtol)
        value = y - p["mu"] + num / f
    elif fam == "logistic":
        s = p["s"]
        num, err = _symmetric_kernel(model, y, lambda t: 1.0 / np.expm1(t / s), 2 * s, s, qtol)
        value = y - p["mu"] + num / f
    elif fam == "hyperbolic_secant":
        s = p["s"]
        c = math.pi / (2 * s)
        num, err = _symmetric_kernel(model, y, lambda t: 0.5 / np.sinh(c * t), 2 * s / math.pi, 1 / c, qtol)
        value = y - p["mu"] + num / f
    elif fam == "gumbel":
        beta = p["beta"]
        head = beta * _slope(model, y) * SMALL_T
        T = _tail_cutoff(beta, model.l1_bound + beta * f, qtol)

        def integrand(u):
            return (f - model.eval(y - u)) / np.expm1(u / beta)

        res = adaptive_integrate(integrand, SMALL_T, T, abs_tol=qtol / 2, rel_tol=1e-13,
                                 points=_points(model, y, -1))
        num, err = head + res.value, res.error_estimate + qtol / 10
        value = y - p["mu"] - beta * EULER_GAMMA + num / f
    elif fam == "cauchy":
        res = hilbert_transform(
            model.eval, y, abs_tol=qtol, l1_bound=model.l1_bound,
            fprime=lambda z: _slope(model, z),
            points=sorted({*_points(model, y, 1), *_points(model, y, -1)}))
        err = p["gamma"] * res.error_estimate
        value = y - p["mu"] - p["gamma"] * res.value / f
    elif fam == "gamma":
        theta = p["theta"]
        num, err = _one_sided(model, y, lambda t: np.exp(-t / theta), -1, qtol / p["alpha"])
        value = y - p["alpha"] * num / f
        err *= p["alpha"]
    elif fam == "noncentral_chisq":
        nu, delta = p["nu"], p["delta"]
        num, err = _one_sided(model, y, lambda t: (nu / 2 + delta / 4 * t) * np.exp(-t / 2), -1, qtol)
        value = y - num / f
    elif fam == "inverse_gaussian":
        mu, lam = p["mu"], p["lam"]
        c = lam / (2 * mu * mu)
        lo = model.support()[0]
        upper = math.sqrt(y - lo) if math.isfinite(lo) else math.inf
        # z = y - u^2 removes the inverse square-root singularity at z = y
        pts = [math.sqrt(y - z) for z in model.landmarks() if z < y]
        pref = math.sqrt(lam / (2 * math.pi))
        if upper > 0:
            res = adaptive_integrate(lambda u: 2 * np.exp(-c * u * u) * model.eval(y - u * u),
                                     0.0, upper, abs_tol=qtol / pref, rel_tol=1e-13, points=pts)
            num, err = res.value, res.error_estimate
        else:
            num = 0.0
        value = y - pref * num / f
        err *= pref
    else:  # pragma: no cover - families are closed
        raise AssertionError(fam)

    return EvalResult(float(value), f, quadrature_error_estimate=float(err) / f,
                      details={"family": fam})


# --------------------------------------------------------------------------
# expectation-form representer


def expectation_form_estimand(a: float):
    """The estimand ``g`` whose representer is the Gaussian kernel below."""
    def g(x):
        x = np.asarray(x, dtype=float)
        return np.exp((a * a - 1) * x * x / (2 * a * a)) / a

    return g


def expectation_form_kernel(y: float, a: float):
    """``Q(z)``: a density-free weight with ``E[Q(x + V)] = g(x) phi(y - x)``."""
    if not a > 1:
        raise DomainError("the expectation-form representer needs a > 1")
    s2 = a * a - 1

    def q(z):
        z = np.asarray(z, dtype=float)
        return np.exp(s2 * y * y / 2 - (z - a * a * y) ** 2 / (2 * s2) - 0.5 * math.log(2 * math.pi * s2))

    return q


def _mixture_samples(model: GaussianMixtureDensity, n: int, seed: int) -> np.ndarray:
    rng = make_rng(seed)
    comp = rng.choice(model.weights.size, size=n, p=model.weights)
    return model.means[comp, 0] + np.sqrt(model.covariances[comp, 0, 0]) * rng.standard_normal(n)


def unbiased_mean_functional(
    model: DensityModel,
    y: float,
    a: float,
    mode: str = "quad",
    samples=None,
    n: int = 10**6,
    seed: int = 11,
    tol: float = 1e-12,
) -> EvalResult:
    """``∫ Q(z) f_Y(z) dz`` for standard Gaussian noise, by quadrature or Monte Carlo.

    The value is the numerator ``∫ g(x) phi(y - x) dP(x)``; divide by
    ``density_at_point`` for the posterior expectation of ``g(X)``.

    Parameters
    ----------
    mode : {"quad", "mc"}
    samples : array_like, optional
        Observations of Y for the Monte Carlo average.  When omitted they
        are drawn from ``model`` (which must then be a Gaussian mixture).
    """
    q = expectation_form_kernel(y, a)
    f = float(model.eval(y))
    if mode == "quad":
        centre = a * a * y
        sd = math.sqrt(a * a - 1)
        pts = [*model.landmarks(), centre - 6 * sd, centre, centre + 6 * sd]
        res = adaptive_integrate(lambda z: q(z) * model.eval(z), -math.inf, math.inf,
                                 abs_tol=tol, rel_tol=1e-13, points=pts)
        value, err, used = res.value, res.error_estimate, res.evaluations
    elif mode == "mc":
        if samples is None:
            if not isinstance(model, GaussianMixtureDensity):
                raise ValueError("Monte Carlo mode needs samples or a Gaussian-mixture model")
            samples = _mixture_samples(model, n, seed)
        vals = q(np.asarray(samples, dtype=float))
        value = float(vals.mean())
        err = float(vals.std(ddof=1) / math.sqrt(vals.size))
        used = vals.size
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return EvalResult(value, f, quadrature_error_estimate=err, series_terms_used=0,
                      details={"mode": mode, "evaluations": used, "a": a,
                               "posterior_value": value / f if f > 0 else math.nan})
