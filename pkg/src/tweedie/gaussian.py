"""Gaussian-noise functionals, homoskedastic and heteroskedastic.

Moments, even risks and the MGF are finite combinations of marginal-density
derivatives.  The CDF, hinge and absolute risk use a Hermite series in the
derivatives, evaluated along a schedule of smoothing levels ``n`` and
extrapolated to ``n = ∞`` in the variable ``h = n^{-1/2}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .core import (
    MAX_MOMENT_ORDER, MAX_RISK_ORDER, DimensionMismatch, EvalResult,
    FunctionalSpec, InvalidPrior, NoMass, PriorSpec, SeriesDivergence,
    Unsupported, check_density,
)
from .densities import DensityModel, gaussian_mixture_density
from .numerics import K_MAX, neville_at_zero, norm_pdf, phi_deriv_all

DEFAULT_K = 60
DEFAULT_SCHEDULE = (1e2, 1e3, 1e4)
_SERIES_TAIL = 5


# --------------------------------------------------------------------------
# heteroskedastic joint


@dataclass(frozen=True, eq=False)
class HeteroJointSpec:
    """Atomic joint law of (X, Sigma).

    ``variances`` is ``(m,)`` for scalar noise variances or ``(m, d, d)``.
    """

    locations: np.ndarray
    variances: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_triples(cls, triples) -> "HeteroJointSpec":
        """Build from ``[(x, sigma2, weight), ...]``."""
        xs, vs, ws = zip(*triples)
        return cls.from_arrays(xs, vs, ws)

    @classmethod
    def from_arrays(cls, xs, variances, weights) -> "HeteroJointSpec":
        x = np.asarray(xs, dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        v = np.asarray(variances, dtype=float)
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
            raise InvalidPrior("joint weights must be positive and sum to 1")
        if v.ndim == 1:
            if np.any(v <= 0):
                raise InvalidPrior("noise variances must be positive")
        else:
            for s in v:
                if not np.allclose(s, s.T) or np.linalg.eigvalsh(s).min() <= 0:
                    raise InvalidPrior("noise covariances must be symmetric positive definite")
        if not (x.shape[0] == v.shape[0] == w.shape[0]):
            raise InvalidPrior("joint arrays differ in length")
        return cls(x, v, w / w.sum())

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    def distinct_variances(self) -> list:
        out = []
        for v in self.variances:
            if not any(np.allclose(v, u, rtol=1e-12, atol=0) for u in out):
                out.append(v)
        return out


def hetero_condition(joint: HeteroJointSpec, sigma0_sq):
    """Condition the joint on ``Sigma = sigma0_sq``.

    Returns
    -------
    model : DensityModel
        Exact conditional marginal of Y given the noise level.
    prior : PriorSpec
        Conditional latent law (re-normalised atoms).

    Raises
    ------
    NoMass
        When no atom carries the requested noise level.
    """
    s0 = np.asarray(sigma0_sq, dtype=float)
    match = np.array([np.allclose(v, s0, rtol=1e-12, atol=0) for v in joint.variances])
    if not match.any():
        raise NoMass(f"noise level {sigma0_sq!r} has zero probability under the joint")
    locs = joint.locations[match]
    w = joint.weights[match]
    # atoms sharing a location merge their mass
    uniq, inv = np.unique(locs, axis=0, return_inverse=True)
    merged = np.zeros(uniq.shape[0])
    np.add.at(merged, inv.ravel(), w)
    prior = PriorSpec.atomic(uniq, merged / merged.sum())
    return gaussian_mixture_density(prior, s0), prior


# --------------------------------------------------------------------------
# derivative-based rules


def _derivatives(model: DensityModel, y: float, kmax: int) -> np.ndarray:
    if kmax > model.max_derivative_order:
        raise Unsupported(model.describe(), f"derivative of order {kmax}")
    stack = getattr(model, "derivative_stack", None)
    if stack is not None:
        return np.asarray(stack(y, kmax), dtype=float)
    return np.array([float(model.eval(y, k)) for k in range(kmax + 1)])


def hermite_moment_poly(n: int, a: float, s2: float) -> float:
    """``H_n(a, s2) = E[(a + sqrt(s2) Z)^n]`` written as the finite sum."""
    return sum(math.factorial(n) / (2 ** j * math.factorial(j) * math.factorial(n - 2 * j))
               * s2 ** j * a ** (n - 2 * j) for j in range(n // 2 + 1))


def _polynomial_rule(k: int, centre_offset: float, s2: float, ratios: np.ndarray) -> float:
    """``sum_r C(k,r) s2^r H_{k-r}(offset, s2) f^(r)/f``."""
    return sum(math.comb(k, r) * s2 ** r * hermite_moment_poly(k - r, centre_offset, s2) * ratios[r]
               for r in range(k + 1))


def gauss_functional(sigma2: float, model: DensityModel, y: float, fspec: FunctionalSpec,
                     **series_kw) -> EvalResult:
    """Posterior functional under N(0, sigma2) noise.

    Parameters
    ----------
    sigma2 : float
        Noise variance.
    model : DensityModel
        Marginal (or conditional marginal) density of Y.
    y : float
    fspec : FunctionalSpec
        Mean, second_moment, variance, mgf, raw_moment, centered_moment,
        even_risk; cdf/hinge/absolute_risk are forwarded to the series
        routines with ``series_kw``.
    """
    if model.dim != 1:
        raise DimensionMismatch("gauss_functional works in one dimension; see gauss_multivariate")
    t = fspec.target
    if t == "cdf":
        return gauss_cdf(sigma2, model, y, fspec.a, **series_kw)
    if t in ("hinge", "absolute_risk"):
        kind = "hinge" if t == "hinge" else "absolute"
        return gauss_hinge_abs(sigma2, model, y, fspec.a, kind, **series_kw)
    y = float(y)
    s2 = float(sigma2)
    if t == "mgf":
        f = check_density(float(model.eval(y)))
        tv = float(np.atleast_1d(fspec.t)[0])
        value = math.exp(tv * y + s2 * tv * tv / 2) * float(model.eval(y + s2 * tv)) / f
        return EvalResult(value, f, details={"target": t})

    if t in ("raw_moment", "centered_moment") and fspec.k > MAX_MOMENT_ORDER:
        raise Unsupported("gaussian", t, f"k <= {MAX_MOMENT_ORDER}")
    if t == "even_risk" and fspec.m > MAX_RISK_ORDER:
        raise Unsupported("gaussian", t, f"m <= {MAX_RISK_ORDER}")
    order = {"mean": 1, "second_moment": 2, "variance": 2}.get(t)
    if order is None:
        if t in ("raw_moment", "centered_moment"):
            order = max(fspec.k, 1)
        elif t == "even_risk":
            order = 2 * fspec.m
        else:
            raise Unsupported("gaussian", t)
    d = _derivatives(model, y, max(order, 1))
    f = check_density(float(d[0]))
    r = d / f

    if t == "mean":
        value = y + s2 * r[1]
    elif t == "second_moment":
        value = y * y + s2 + 2 * y * s2 * r[1] + s2 * s2 * r[2]
    elif t == "variance":
        value = s2 + s2 * s2 * (r[2] - r[1] ** 2)
    elif t == "raw_moment":
        value = _polynomial_rule(fspec.k, y, s2, r)
    elif t == "centered_moment":
        centre = y + s2 * r[1]
        value = _polynomial_rule(fspec.k, y - centre, s2, r)
    elif t == "even_risk":
        value = _polynomial_rule(2 * fspec.m, y - fspec.a, s2, r)
    else:
        raise Unsupported("gaussian", t)
    return EvalResult(float(value), f, series_terms_used=order + 1, details={"target": t})


# --------------------------------------------------------------------------
# Hermite series for CDF, hinge and absolute risk


def _series_terms(s2: float, n: float, y: float, a: float, derivs: np.ndarray, integrated: bool):
    """Per-order terms of the smoothed-indicator series at level ``n``.

    With ``integrated`` the indicator is replaced by its running integral,
    giving the series for ``E[(a - X)_+]``.
    """
    K = derivs.size - 1
    s = math.sqrt(s2 + n ** -2)
    q = (a + n ** -0.5 - y) / s
    k = np.arange(K + 1)
    # (s2/s)^k / k! in log form to avoid overflow at large k
    logc = k * math.log(s2 / s) - gammaln(k + 1)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    if not integrated:
        phis = phi_deriv_all(K, q)
        return sign * np.exp(logc) * phis * derivs
    phis = phi_deriv_all(max(K - 1, 0), q)
    base = np.empty(K + 1)
    base[0] = s * (q * phis[0] + norm_pdf(q))
    base[1:] = s * phis[:K]
    return sign * np.exp(logc) * base * derivs


def _extrapolate(values: Sequence[float], schedule: Sequence[float]):
    """Limit in ``h = n^{-1/2}`` and a disagreement diagnostic."""
    h = [n ** -0.5 for n in schedule]
    if len(values) == 1:
        return values[0], math.inf
    limit = neville_at_zero(h, values)
    if len(values) == 2:
        return limit, abs(values[1] - values[0])
    reduced = neville_at_zero(h[1:], values[1:])
    return limit, abs(limit - reduced)


def _run_series(sigma2, model, y, a, K, n_schedule, tol, integrated):
    if K > K_MAX:
        raise Unsupported("gaussian", f"series truncation K={K}", f"K <= {K_MAX}")
    y = float(y)
    derivs = _derivatives(model, y, K)
    f = check_density(float(derivs[0]))
    schedule = sorted(float(n) for n in n_schedule)
    raw = []
    for n in schedule:
        terms = _series_terms(float(sigma2), n, y, float(a), derivs, integrated) / f
        raw.append(float(math.fsum(terms)))
    tail = float(np.max(np.abs(terms[-_SERIES_TAIL:])))
    if not tail <= tol:
        raise SeriesDivergence(
            f"series terms near K={K} are still {tail:.3g} at n={schedule[-1]:g} (tolerance {tol:g})")
    return derivs, f, schedule, raw, tail


def gauss_cdf(sigma2: float, model: DensityModel, y: float, a: float, K: int = DEFAULT_K,
              n_schedule: Sequence[float] = DEFAULT_SCHEDULE, tol: float = 1e-4) -> EvalResult:
    """Posterior CDF ``P(X <= a | Y = y)`` under N(0, sigma2) noise.

    The series is evaluated at each smoothing level in ``n_schedule`` and
    extrapolated to the limit.  ``converged`` is False when the full
    extrapolation and the one dropping the coarsest level differ by more
    than ``10 * tol``.

    Raises
    ------
    SeriesDivergence
        When the last terms of the truncated series exceed ``tol`` at the
        finest level.
    """
    derivs, f, schedule, raw, tail = _run_series(sigma2, model, y, a, K, n_schedule, tol, False)
    value, spread = _extrapolate(raw, schedule)
    return EvalResult(value, f, quadrature_error_estimate=spread, series_terms_used=K + 1,
                      converged=bool(spread <= 10 * tol),
                      details={"schedule": schedule, "per_level": raw, "tail_term": tail})


def gauss_hinge_abs(sigma2: float, model: DensityModel, y: float, a: float, kind: str = "hinge",
                    K: int = DEFAULT_K, n_schedule: Sequence[float] = DEFAULT_SCHEDULE,
                    tol: float = 1e-4) -> EvalResult:
    """Posterior hinge ``E[(X - a)_+ | y]`` or absolute risk ``E|X - a|``.

    The closed leading terms (in ``q = (a - y)/sigma``) are reported in
    ``details["leading"]``; the value adds the higher-order series and is
    extrapolated along ``n_schedule`` exactly as in :func:`gauss_cdf`.
    """
    if kind not in ("hinge", "absolute"):
        raise ValueError("kind must be 'hinge' or 'absolute'")
    derivs, f, schedule, raw, tail = _run_series(sigma2, model, y, a, K, n_schedule, tol, True)
    s2 = float(sigma2)
    mean = float(y) + s2 * derivs[1] / f
    # raw[i] approximates E[(a - X)_+ | y] at level n_i
    if kind == "hinge":
        per_level = [mean - a + v for v in raw]
    else:
        per_level = [mean - a + 2 * v for v in raw]
    value, spread = _extrapolate(per_level, schedule)

    sd = math.sqrt(s2)
    q = (a - y) / sd
    Phi = float(phi_deriv_all(0, q)[0])
    phi = float(norm_pdf(q))
    ratio = derivs[1] / f
    if kind == "hinge":
        leading = sd * phi + (y - a) * (1 - Phi) + s2 * (1 - Phi) * ratio
    else:
        leading = 2 * sd * phi + (a - y) * (2 * Phi - 1) + s2 * (1 - 2 * Phi) * ratio
    return EvalResult(value, f, quadrature_error_estimate=spread, series_terms_used=K + 1,
                      converged=bool(spread <= 10 * tol),
                      details={"leading": leading, "schedule": schedule, "per_level": per_level,
                               "tail_term": tail})


# --------------------------------------------------------------------------
# multivariate


def gauss_multivariate(Sigma0, model: DensityModel, y, which: str = "mean", t=None) -> EvalResult:
    """Posterior mean, covariance or MGF under N(0, Sigma0) noise in d dimensions.

    ``model`` must expose closed-form ``grad`` and ``hessian`` (Gaussian
    mixtures do).
    """
    S = np.atleast_2d(np.asarray(Sigma0, dtype=float))
    d = S.shape[0]
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != d or model.dim != d:
        raise DimensionMismatch(f"Sigma0 is {d}x{d}, y has {y.size} entries, model has d={model.dim}")
    if d > 5:
        raise DimensionMismatch("gauss_multivariate supports d <= 5")
    if d == 1:
        f = check_density(float(model.eval(y[0])))
        g = np.array([float(model.eval(y[0], 1))])
        H = np.array([[float(model.eval(y[0], 2))]])
    else:
        f = check_density(float(model.eval(y)))
        g = model.grad(y)
        H = model.hessian(y)
    score = g / f
    if which == "mean":
        value = y + S @ score
    elif which in ("cov", "variance"):
        hess_log = H / f - np.outer(score, score)
        value = S + S @ hess_log @ S
        value = 0.5 * (value + value.T)
    elif which == "mgf":
        tv = np.asarray(t, dtype=float).reshape(d)
        shifted = y + S @ tv
        fs = float(model.eval(shifted if d > 1 else shifted[0]))
        value = math.exp(float(tv @ y + 0.5 * tv @ S @ tv)) * fs / f
    else:
        raise ValueError(f"unknown target {which!r}")
    return EvalResult(value, f, details={"target": which})
