"""Posterior functionals under the product-Laplace mechanism.

All rules are written in the offset variable ``u = z - y`` so that the
Laplace kernel ``e^{-|u|/b}`` is kinked only at ``u = 0``; integrals are
split there.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .core import (
    DimensionMismatch, EvalResult, FunctionalSpec, MgfDomain, Unsupported,
    check_density,
)
from .densities import DensityModel
from .numerics import adaptive_integrate

_MAX_DIM_MEAN = 5
_MAX_DIM_COV = 3


def _offsets(model: DensityModel, y: float, lo: float, hi: float):
    return [z - y for z in model.landmarks() if lo < z - y < hi]


def _line_integral(model, y, weight, lo, hi, tol):
    """``∫_lo^hi weight(u) f(y + u) du`` (d = 1)."""
    if lo >= hi:
        return 0.0, 0.0
    slo, shi = model.support()
    lo, hi = max(lo, slo - y), min(hi, shi - y)
    if lo >= hi:
        return 0.0, 0.0
    res = adaptive_integrate(lambda u: weight(u) * model.eval(y + u), lo, hi,
                             abs_tol=tol, rel_tol=1e-13, points=[0.0, *_offsets(model, y, lo, hi)])
    return res.value, res.error_estimate


class _Integrals:
    """Lazily computed kernel integrals shared by the d=1 rules."""

    def __init__(self, model, y, b, tol):
        self.model, self.y, self.b, self.tol = model, y, b, tol
        self.err = 0.0
        self._cache = {}

    def half(self, side, kind):
        key = (side, kind)
        if key not in self._cache:
            b = self.b
            weights = {
                "exp": lambda u: np.exp(-np.abs(u) / b),
                "abs2": lambda u: (2 * np.abs(u) - b) * np.exp(-np.abs(u) / b),
            }
            lo, hi = (0.0, math.inf) if side > 0 else (-math.inf, 0.0)
            v, e = _line_integral(self.model, self.y, weights[kind], lo, hi, self.tol)
            self.err += e
            self._cache[key] = v
        return self._cache[key]

    @property
    def sgn(self):
        return self.half(+1, "exp") - self.half(-1, "exp")

    @property
    def total(self):
        return self.half(+1, "exp") + self.half(-1, "exp")

    @property
    def abs2(self):
        return self.half(+1, "abs2") + self.half(-1, "abs2")

    def between(self, a):
        """``∫ e^{-|u|/b} f(y+u)`` between 0 and ``a - y``."""
        d = a - self.y
        lo, hi = min(0.0, d), max(0.0, d)
        v, e = _line_integral(self.model, self.y, lambda u: np.exp(-np.abs(u) / self.b), lo, hi, self.tol)
        self.err += e
        return v


def _check_mgf(t, b, d):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.size != d:
        raise DimensionMismatch(f"mgf argument has {t.size} entries, expected {d}")
    if np.max(np.abs(t)) >= 1.0 / b:
        raise MgfDomain(f"mgf needs |t| < 1/b = {1.0 / b}")
    return t


def lm_functional_1d(b: float, model: DensityModel, y: float, fspec: FunctionalSpec,
                     tol: float = 1e-10) -> EvalResult:
    """Posterior functional of a scalar released under Laplace(0, b) noise.

    Parameters
    ----------
    b : float
        Laplace scale.
    model : DensityModel
        Marginal density of the released value.
    y : float
    fspec : FunctionalSpec
        One of mean, second_moment, variance, mgf, cdf, squared_risk,
        hinge, pinball, absolute_risk.
    tol : float
        Absolute tolerance of each kernel integral, relative to ``f(y)``.
    """
    if model.dim != 1:
        raise DimensionMismatch("lm_functional_1d needs a univariate model")
    y = float(y)
    f = check_density(float(model.eval(y)))
    I = _Integrals(model, y, b, tol * f)
    t = fspec.target

    if t == "mean":
        value = y + I.sgn / f
    elif t == "second_moment":
        value = y * y + 2 * y * I.sgn / f + I.abs2 / f
    elif t == "variance":
        value = I.abs2 / f - (I.sgn / f) ** 2
    elif t == "mgf":
        tv = float(_check_mgf(fspec.t, b, 1)[0])
        if tv == 0.0:
            value = 1.0
        else:
            def weight(u):
                return (tv * np.sign(u) - b * tv * tv / 2) * np.exp(tv * u - np.abs(u) / b)

            r, e1 = _line_integral(model, y, weight, 0.0, math.inf, tol * f)
            l, e2 = _line_integral(model, y, weight, -math.inf, 0.0, tol * f)
            I.err += e1 + e2
            value = math.exp(tv * y) * (1.0 + (r + l) / f)
    elif t == "cdf":
        a = fspec.a
        fa = float(model.eval(a))
        dfa = float(model.right_deriv(a))
        if a <= y:
            value = math.exp(-(y - a) / b) * (fa - b * dfa) / (2 * f)
        else:
            value = 1.0 - math.exp(-(a - y) / b) * (fa + b * dfa) / (2 * f)
    elif t == "squared_risk":
        d = y - fspec.a
        value = d * d + 2 * d * I.sgn / f + I.abs2 / f
    elif t in ("hinge", "pinball", "absolute_risk"):
        a = fspec.a
        fa = float(model.eval(a))
        boundary = b * math.exp(-abs(y - a) / b) * fa
        mid = I.between(a)
        if t == "hinge":
            value = (max(y - a, 0.0) + I.half(+1, "exp") / f - mid / f - boundary / (2 * f))
        elif t == "pinball":
            tau = fspec.tau
            value = (tau * max(y - a, 0.0) + (1 - tau) * max(a - y, 0.0)
                     + (tau * I.half(+1, "exp") + (1 - tau) * I.half(-1, "exp")) / f
                     - mid / f - boundary / (2 * f))
        else:
            value = abs(y - a) + (I.total - 2 * mid - boundary) / f
    else:
        raise Unsupported("product_laplace", t)

    return EvalResult(float(value), f, quadrature_error_estimate=I.err / f,
                      details={"target": t})


def pinball_with_level(b, model, y, a, tau, tol=1e-10) -> float:
    """Pinball rule evaluated for any ``tau`` in [0, 1] (``tau = 1`` is the hinge).

    :class:`FunctionalSpec` insists on the open interval; this helper
    exposes the closed-interval algebra for consistency checks.
    """
    f = check_density(float(model.eval(y)))
    I = _Integrals(model, y, b, tol * f)
    fa = float(model.eval(a))
    boundary = b * math.exp(-abs(y - a) / b) * fa
    return (tau * max(y - a, 0.0) + (1 - tau) * max(a - y, 0.0)
            + (tau * I.half(+1, "exp") + (1 - tau) * I.half(-1, "exp")) / f
            - I.between(a) / f - boundary / (2 * f))


# --------------------------------------------------------------------------
# multivariate mechanism


def _axis_integral(model, y, axes, weights, tol):
    """``∫ prod_j weight_j(u_j) f(y + sum_j u_j e_j) du`` over the listed axes.

    Nested adaptive quadrature, outermost axis first; every axis is split
    at 0 and at the atom offsets along that coordinate.
    """
    y = np.asarray(y, dtype=float)
    inner_tol = tol / math.sqrt(2) if len(axes) > 1 else tol
    j, w = axes[0], weights[0]
    pts = [0.0, *(c - y[j] for c in model.coordinate_breakpoints(j))]
    errs = []

    if len(axes) == 1:
        def integrand(u):
            pts_ = np.repeat(y[None, :], u.size, axis=0)
            pts_[:, j] += u
            return w(u) * model.eval(pts_)
    else:
        def integrand(u):
            out = np.empty(u.size)
            for i, ui in enumerate(u):
                shifted = y.copy()
                shifted[j] += ui
                v, e = _axis_integral(model, shifted, axes[1:], weights[1:], inner_tol)
                out[i] = w(ui) * v
                errs.append(e)
            return out

    total = 0.0
    err = 0.0
    for lo, hi in ((-math.inf, 0.0), (0.0, math.inf)):
        res = adaptive_integrate(integrand, lo, hi, abs_tol=inner_tol / 2, rel_tol=1e-12,
                                 points=[p for p in pts if lo < p < hi])
        total += res.value
        err += res.error_estimate
    return total, err


def _sgn_exp(b):
    return lambda u: np.sign(u) * np.exp(-np.abs(u) / b)


def _abs2_exp(b):
    return lambda u: (2 * np.abs(u) - b) * np.exp(-np.abs(u) / b)


def _check_model(model, limit):
    if model.dim > limit:
        raise DimensionMismatch(f"this rule supports d <= {limit}")


def lm_mean_vec(b: float, model: DensityModel, y, tol: float = 1e-9) -> EvalResult:
    """Posterior mean vector via line integrals along each coordinate."""
    _check_model(model, _MAX_DIM_MEAN)
    y = np.asarray(y, dtype=float).reshape(model.dim)
    f = check_density(float(model.eval(y)))
    vals, err = [], 0.0
    for j in range(model.dim):
        v, e = _axis_integral(model, y, [j], [_sgn_exp(b)], tol * f)
        vals.append(v)
        err += e
    return EvalResult(y + np.array(vals) / f, f, quadrature_error_estimate=err / f,
                      details={"line_integrals": vals})


def lm_cov(b: float, model: DensityModel, y, tol: float = 1e-8) -> EvalResult:
    """Posterior covariance matrix.

    Diagonal entries use single line integrals, off-diagonals a nested
    double integral; the off-diagonal value is computed once and mirrored.
    """
    _check_model(model, _MAX_DIM_COV)
    d = model.dim
    y = np.asarray(y, dtype=float).reshape(d)
    f = check_density(float(model.eval(y)))
    qtol = tol * f
    lines, err = [], 0.0
    cov = np.empty((d, d))
    for j in range(d):
        v, e = _axis_integral(model, y, [j], [_sgn_exp(b)], qtol)
        lines.append(v)
        err += e
    for j in range(d):
        v, e = _axis_integral(model, y, [j], [_abs2_exp(b)], qtol)
        err += e
        cov[j, j] = v / f - (lines[j] / f) ** 2
        for k in range(j + 1, d):
            v, e = _axis_integral(model, y, [j, k], [_sgn_exp(b), _sgn_exp(b)], qtol)
            err += e
            cov[j, k] = cov[k, j] = v / f - lines[j] * lines[k] / f ** 2
    return EvalResult(cov, f, quadrature_error_estimate=err / f)


def lm_mgf(b: float, model: DensityModel, y, t, tol: float = 1e-9) -> EvalResult:
    """Posterior MGF as a sum over coordinate subsets.

    The empty subset contributes ``f(y)``; each nonempty subset ``S``
    contributes an ``|S|``-dimensional integral of the product kernel.
    """
    _check_model(model, _MAX_DIM_COV)
    d = model.dim
    y = np.asarray(y, dtype=float).reshape(d)
    t = _check_mgf(t, b, d)
    f = check_density(float(model.eval(y)))
    total, err, terms = f, 0.0, 1

    def kernel(tj):
        return lambda u: (tj * np.sign(u) - b * tj * tj / 2) * np.exp(tj * u - np.abs(u) / b)

    active = [j for j in range(d) if t[j] != 0.0]
    for r in range(1, len(active) + 1):
        for subset in itertools.combinations(active, r):
            v, e = _axis_integral(model, y, list(subset), [kernel(t[j]) for j in subset], tol * f)
            total += v
            err += e
            terms += 1
    value = math.exp(float(t @ y)) * total / f
    return EvalResult(value, f, quadrature_error_estimate=err / f, series_terms_used=terms)
