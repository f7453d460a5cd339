"""Observed marginal densities f_Y = f_V * P_X and their derivatives.

Backends
--------
* :class:`GaussianMixtureDensity` - closed form; Gaussian noise with atomic
  or Gaussian-mixture priors, and the Gaussian-kernel KDE.
* :class:`AtomicDensity` - finite sums ``sum_i w_i f_V(y - x_i)`` for any
  noise law (including the product-Laplace mechanism in d dimensions).
* :class:`QuadratureMixtureDensity` - Gaussian-mixture priors under
  non-Gaussian noise, one quadrature per evaluation.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .core import (
    DimensionMismatch, NoiseSpec, PriorSpec, TooFewSamples, Unsupported,
    validate_noise,
)
from .noise import NoiseLaw, noise_law
from .numerics import K_MAX, QuadResult, adaptive_integrate, hermite_he_all

_SQRT2PI = math.sqrt(2 * math.pi)


class DensityModel:
    """Evaluable marginal density.

    Attributes
    ----------
    dim : int
    max_derivative_order : int
    l1_bound : float
        Bound on the L1 norm (1 for probability densities).
    backend : str
        ``"exact"`` or ``"kde"``.
    """

    dim = 1
    max_derivative_order = 0
    l1_bound = 1.0
    backend = "exact"

    def eval(self, y, k: int = 0):
        raise NotImplementedError

    def __call__(self, y):
        return self.eval(y, 0)

    def right_deriv(self, a):
        return self.eval(a, 1)

    def breakpoints(self) -> list[float]:
        """Points where f_Y (d=1) may have kinks or sharp features."""
        return []

    def landmarks(self) -> list[float]:
        """Breakpoints plus the centres of mixture components (d=1)."""
        return self.breakpoints()

    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def coordinate_breakpoints(self, j: int) -> list[float]:
        """Kink locations along coordinate ``j`` (d > 1 backends)."""
        return self.breakpoints() if self.dim == 1 else []

    def _check_order(self, k):
        if k < 0 or int(k) != k:
            raise ValueError("derivative order must be a non-negative integer")
        if k > self.max_derivative_order:
            raise Unsupported(self.describe(), f"derivative of order {k}")

    def describe(self) -> str:
        return type(self).__name__


def _as_points(y, d):
    """Coerce ``y`` to an ``(n, d)`` array; return it with the output shape."""
    y = np.asarray(y, dtype=float)
    if d == 1:
        return y.reshape(-1, 1), y.shape
    if y.shape[-1] != d:
        raise DimensionMismatch(f"expected points of dimension {d}, got shape {y.shape}")
    return y.reshape(-1, d), y.shape[:-1]


def _out(arr, shape):
    arr = arr.reshape(shape)
    return float(arr) if arr.ndim == 0 else arr


class GaussianMixtureDensity(DensityModel):
    """``sum_c w_c N(mean_c, cov_c)``, with closed-form derivatives.

    In one dimension ``eval(y, k)`` returns the k-th derivative through
    Hermite polynomials; in d dimensions ``grad`` and ``hessian`` are
    available.
    """

    max_derivative_order = K_MAX

    def __init__(self, means, covariances, weights, backend="exact"):
        self.means = np.asarray(means, dtype=float)
        if self.means.ndim == 1:
            self.means = self.means[:, None]
        m, d = self.means.shape
        cov = np.asarray(covariances, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None, None]
        self.covariances = cov
        self.weights = np.asarray(weights, dtype=float)
        self.dim = d
        self.backend = backend
        if d == 1:
            self._sd = np.sqrt(cov[:, 0, 0])
        else:
            self._prec = np.linalg.inv(cov)
            sign, logdet = np.linalg.slogdet(cov)
            self._lognorm = -0.5 * (d * math.log(2 * math.pi) + logdet)

    def breakpoints(self):
        return []

    def landmarks(self):
        if self.dim != 1 or self.means.shape[0] > 64:
            return []
        return sorted({float(m) for m in self.means[:, 0]})

    def eval(self, y, k: int = 0):
        self._check_order(k)
        pts, shape = _as_points(y, self.dim)
        if self.dim == 1:
            return _out(self._derivs_1d(pts[:, 0], k, k)[k], shape)
        if k:
            raise Unsupported(self.describe(), "scalar derivatives in d > 1; use grad/hessian")
        return _out(self._components(pts) @ self.weights, shape)

    def _derivs_1d(self, y, kmin, kmax, chunk=4096):
        """Derivatives of orders kmin..kmax at points ``y``; shape (kmax+1, n)."""
        out = np.zeros((kmax + 1, y.size))
        for start in range(0, self.means.shape[0], chunk):
            mu = self.means[start:start + chunk, 0]
            sd = self._sd[start:start + chunk]
            w = self.weights[start:start + chunk]
            u = (y[:, None] - mu[None, :]) / sd[None, :]
            phi = np.exp(-0.5 * u * u) / (_SQRT2PI * sd[None, :])
            he = hermite_he_all(kmax, u)
            for kk in range(kmin, kmax + 1):
                coef = w * (-1.0) ** kk * sd ** (-float(kk))
                out[kk] += (he[kk] * phi) @ coef
        return out

    def derivative_stack(self, y: float, kmax: int) -> np.ndarray:
        """All derivatives ``f^(0..kmax)(y)`` at a scalar point."""
        self._check_order(kmax)
        return self._derivs_1d(np.array([float(y)]), 0, kmax)[:, 0]

    def _components(self, pts):
        diff = pts[:, None, :] - self.means[None, :, :]
        q = np.einsum("nmi,mij,nmj->nm", diff, self._prec, diff)
        return np.exp(self._lognorm[None, :] - 0.5 * q)

    def grad(self, y) -> np.ndarray:
        pts = np.asarray(y, dtype=float).reshape(1, self.dim)
        comp = self._components(pts)[0] * self.weights
        diff = pts[0][None, :] - self.means
        g = -np.einsum("mij,mj->mi", self._prec, diff)
        return comp @ g

    def hessian(self, y) -> np.ndarray:
        pts = np.asarray(y, dtype=float).reshape(1, self.dim)
        comp = self._components(pts)[0] * self.weights
        diff = pts[0][None, :] - self.means
        g = -np.einsum("mij,mj->mi", self._prec, diff)
        h = np.einsum("mi,mj->mij", g, g) - self._prec
        return np.einsum("m,mij->ij", comp, h)


class KdeDensity(GaussianMixtureDensity):
    """Gaussian-kernel density estimate (one-dimensional)."""

    def __init__(self, samples, bandwidth):
        samples = np.asarray(samples, dtype=float).ravel()
        n = samples.size
        super().__init__(samples[:, None], np.full(n, bandwidth ** 2), np.full(n, 1.0 / n), backend="kde")
        self.samples = samples
        self.bandwidth = float(bandwidth)

    def describe(self):
        return f"KDE(n={self.samples.size}, h={self.bandwidth:.4g})"


class AtomicDensity(DensityModel):
    """``sum_i w_i f_V(y - x_i)`` for an atomic prior and any noise law."""

    def __init__(self, prior: PriorSpec, law: NoiseLaw):
        self.prior = prior
        self.law = law
        self.locations = prior.locations
        self.weights = prior.weights
        self.dim = prior.dim
        self.max_derivative_order = law.max_order if self.dim == 1 else 0

    def describe(self):
        return f"atomic prior with {self.law.spec.family} noise"

    def eval(self, y, k: int = 0):
        self._check_order(k)
        pts, shape = _as_points(y, self.dim)
        if self.dim == 1:
            diff = pts[:, :1] - self.locations[None, :, 0]
            vals = self.law.deriv(diff, k)
        else:
            diff = pts[:, None, :] - self.locations[None, :, :]
            vals = self.law.pdf(diff)
        return _out(vals @ self.weights, shape)

    def right_deriv(self, a):
        if self.dim != 1:
            raise Unsupported(self.describe(), "right derivative for d > 1")
        a = np.asarray(a, dtype=float)
        diff = a.reshape(-1, 1) - self.locations[None, :, 0]
        return _out(self.law.right_deriv(diff) @ self.weights, a.shape)

    def breakpoints(self):
        if self.dim != 1:
            return []
        return sorted({float(x + c) for x in self.locations[:, 0] for c in self.law.kinks})

    def coordinate_breakpoints(self, j):
        return sorted({float(x) for x in self.locations[:, j]})

    def landmarks(self):
        if self.dim != 1:
            return []
        shift = self.law.spec.location
        return sorted({*self.breakpoints(), *(float(x + shift) for x in self.locations[:, 0])})

    def support(self):
        lo, hi = self.law.support
        if self.dim != 1:
            return (-math.inf, math.inf)
        return (lo + float(self.locations[:, 0].min()), hi + float(self.locations[:, 0].max()))


class QuadratureMixtureDensity(DensityModel):
    """Gaussian-mixture prior under non-Gaussian noise (d = 1).

    Uses ``f^(k)(y) = sum_c w_c ∫ f_V(u) phi_c^(k)(y - u) du`` so that every
    derivative order is available even for kinked noise.
    """

    max_derivative_order = 8

    def __init__(self, prior: PriorSpec, law: NoiseLaw, tol: float = 1e-13):
        if prior.dim != 1:
            raise DimensionMismatch("mixture priors under non-Gaussian noise must be univariate")
        self.prior = prior
        self.law = law
        self.tol = tol
        self._comp = GaussianMixtureDensity(prior.locations, prior.covariances, np.ones(prior.size))

    def describe(self):
        return f"Gaussian-mixture prior with {self.law.spec.family} noise"

    def _one(self, y, k):
        total = 0.0
        lo, hi = self.law.support
        for c in range(self.prior.size):
            comp = GaussianMixtureDensity(self._comp.means[c:c + 1], self._comp.covariances[c:c + 1], [1.0])
            sd = float(comp._sd[0])
            centre = y - float(comp.means[0, 0])
            pts = [*self.law.kinks, centre - 8 * sd, centre, centre + 8 * sd]

            def integrand(u, comp=comp):
                return self.law.pdf(u) * comp.eval(y - u, k)

            res = adaptive_integrate(integrand, lo, hi, abs_tol=self.tol, rel_tol=1e-12, points=pts)
            total += self.prior.weights[c] * res.value
        return total

    def landmarks(self):
        shift = self.law.spec.location
        return sorted({float(m + shift) for m in self.prior.locations[:, 0]})

    def eval(self, y, k: int = 0):
        self._check_order(k)
        y = np.asarray(y, dtype=float)
        vals = np.array([self._one(float(v), k) for v in y.ravel()])
        if k == 0:
            vals = np.maximum(vals, 0.0)
        return _out(vals, y.shape)


class ShiftedDensity(DensityModel):
    """``g(y) = base(y + c)``; used to centre location families."""

    def __init__(self, base: DensityModel, c: float):
        self.base = base
        self.c = float(c)
        self.dim = base.dim
        self.max_derivative_order = base.max_derivative_order
        self.backend = base.backend

    def eval(self, y, k=0):
        return self.base.eval(np.asarray(y, dtype=float) + self.c, k)

    def right_deriv(self, a):
        return self.base.right_deriv(np.asarray(a, dtype=float) + self.c)

    def breakpoints(self):
        return [b - self.c for b in self.base.breakpoints()]

    def landmarks(self):
        return [b - self.c for b in self.base.landmarks()]

    def support(self):
        lo, hi = self.base.support()
        return (lo - self.c, hi - self.c)

    def derivative_stack(self, y, kmax):
        return self.base.derivative_stack(y + self.c, kmax)

    def grad(self, y):
        return self.base.grad(np.asarray(y, dtype=float) + self.c)

    def hessian(self, y):
        return self.base.hessian(np.asarray(y, dtype=float) + self.c)


# --------------------------------------------------------------------------
# constructors and thin functional wrappers


def gaussian_mixture_density(prior: PriorSpec, noise_cov) -> GaussianMixtureDensity:
    """Closed-form convolution of an atomic or Gaussian-mixture prior with N(0, noise_cov)."""
    d = prior.dim
    cov = np.atleast_2d(np.asarray(noise_cov, dtype=float))
    if cov.shape == (1, 1) and d > 1:
        cov = cov[0, 0] * np.eye(d)
    if cov.shape != (d, d):
        raise DimensionMismatch(f"noise covariance shape {cov.shape} does not match d={d}")
    if prior.kind == "atomic":
        comps = np.broadcast_to(cov, (prior.size, d, d))
    elif prior.kind == "gaussian_mixture":
        comps = prior.covariances + cov[None]
    else:
        raise Unsupported("samples", "exact density; use kde_fit")
    return GaussianMixtureDensity(prior.locations, comps, prior.weights)


def exact_density(prior: PriorSpec, noise: NoiseSpec) -> DensityModel:
    """The exact marginal ``f_V * P_X``.

    Raises
    ------
    DimensionMismatch
        When prior and noise dimensions differ.
    Unsupported
        For samples-only priors.
    """
    validate_noise(noise)
    if prior.kind == "samples":
        raise Unsupported("samples", "exact density; use kde_fit")
    if noise.family != "gaussian" and prior.dim != noise.dim:
        raise DimensionMismatch(f"prior has d={prior.dim}, noise has d={noise.dim}")
    if noise.family == "gaussian":
        model = gaussian_mixture_density(prior, noise.sigma ** 2)
        if noise.mu != 0.0:
            return ShiftedDensity(model, -noise.mu)
        return model
    law = noise_law(noise)
    if prior.kind == "atomic":
        return AtomicDensity(prior, law)
    return QuadratureMixtureDensity(prior, law)


def density_deriv(model: DensityModel, y, k: int):
    """k-th derivative of the marginal density."""
    return model.eval(y, k)


def right_deriv(model: DensityModel, a):
    """One-sided derivative ``lim_{h↓0} (f(a+h) - f(a)) / h``."""
    if model.dim != 1:
        raise DimensionMismatch("right derivatives are defined for d = 1")
    return model.right_deriv(a)


def integrate_kernel(
    model: DensityModel,
    kernel: Callable[[np.ndarray], np.ndarray],
    region: tuple[float, float] = (-math.inf, math.inf),
    tol: float = 1e-10,
    points=(),
) -> QuadResult:
    """``∫_region kernel(z) f_Y(z) dz``."""
    lo, hi = region
    slo, shi = model.support()
    lo, hi = max(lo, slo), min(hi, shi)
    if lo >= hi:
        return QuadResult(0.0, 0.0, 1)
    pts = [*model.breakpoints(), *points]
    return adaptive_integrate(lambda z: kernel(z) * model.eval(z, 0), lo, hi, abs_tol=tol, rel_tol=1e-12, points=pts)


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float).ravel()
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = sd
    return 0.9 * spread * x.size ** (-0.2)


def kde_fit(samples, bandwidth_rule="silverman") -> KdeDensity:
    """Gaussian-kernel KDE.

    Parameters
    ----------
    samples : array_like
        One-dimensional observations (at least 10).
    bandwidth_rule : "silverman" or float
        Silverman's rule ``0.9 min(sd, iqr/1.34) n^(-1/5)`` or a fixed width.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim > 1 and x.shape[1] != 1:
        raise DimensionMismatch("the KDE backend is univariate")
    x = x.ravel()
    if x.size < 10:
        raise TooFewSamples(f"KDE needs at least 10 samples, got {x.size}")
    if isinstance(bandwidth_rule, str):
        if bandwidth_rule != "silverman":
            raise ValueError(f"unknown bandwidth rule {bandwidth_rule!r}")
        h = silverman_bandwidth(x)
        if not h > 0:
            raise ValueError("degenerate sample; pass a fixed bandwidth")
    else:
        h = float(bandwidth_rule)
        if not h > 0:
            raise ValueError("bandwidth must be positive")
    return KdeDensity(x, h)
