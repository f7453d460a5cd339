"""Noise laws: densities, derivatives, one-sided derivatives and samplers.

Each family is a small class built from a validated :class:`NoiseSpec`.
Derivatives of arbitrary order are available for the smooth families; the
kinked and one-sided families expose the density only (plus the right
derivative for the Laplace types).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import gammaln

from .core import NoiseSpec, Unsupported, validate_noise
from .numerics import K_MAX, hermite_he_all

_SQRT2PI = math.sqrt(2 * math.pi)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


class NoiseLaw:
    """Base class; subclasses fill in ``pdf`` and ``sample``."""

    max_order = 0
    kinks: tuple[float, ...] = ()
    support = (-math.inf, math.inf)

    def __init__(self, spec: NoiseSpec):
        self.spec = validate_noise(spec)

    def pdf(self, v):
        raise NotImplementedError

    def deriv(self, v, k: int):
        if k == 0:
            return self.pdf(v)
        if k > self.max_order:
            raise Unsupported(self.spec.family, f"density derivative of order {k}")
        return self._deriv(np.asarray(v, dtype=float), k)

    def _deriv(self, v, k):
        raise NotImplementedError

    def right_deriv(self, v):
        if self.max_order >= 1:
            return self.deriv(v, 1)
        raise Unsupported(self.spec.family, "right derivative")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError


class Gaussian(NoiseLaw):
    max_order = K_MAX

    def __init__(self, spec):
        super().__init__(spec)
        self.mu, self.sigma = spec.mu, spec.sigma

    def pdf(self, v):
        u = (np.asarray(v, dtype=float) - self.mu) / self.sigma
        return np.exp(-0.5 * u * u) / (_SQRT2PI * self.sigma)

    def _deriv(self, v, k):
        u = (v - self.mu) / self.sigma
        he = hermite_he_all(k, u)[k]
        return (-1) ** k * self.sigma ** (-k) * he * self.pdf(v)

    def sample(self, rng, n):
        return self.mu + self.sigma * rng.standard_normal(n)


class Laplace(NoiseLaw):
    def __init__(self, spec):
        super().__init__(spec)
        self.mu, self.b = spec.location, spec.b
        self.kinks = (self.mu,)

    def pdf(self, v):
        return np.exp(-np.abs(np.asarray(v, dtype=float) - self.mu) / self.b) / (2 * self.b)

    def right_deriv(self, v):
        v = np.asarray(v, dtype=float)
        return np.where(v - self.mu >= 0, -1.0, 1.0) * self.pdf(v) / self.b

    def sample(self, rng, n):
        return rng.laplace(self.mu, self.b, n)


class AsymmetricLaplace(NoiseLaw):
    def __init__(self, spec):
        super().__init__(spec)
        self.mu, self.bm, self.bp = spec.mu, spec.b_minus, spec.b_plus
        self.kinks = (self.mu,)

    def pdf(self, v):
        u = np.asarray(v, dtype=float) - self.mu
        expo = np.where(u < 0, u / self.bm, -u / self.bp)
        return np.exp(expo) / (self.bm + self.bp)

    def right_deriv(self, v):
        u = np.asarray(v, dtype=float) - self.mu
        return np.where(u >= 0, -1.0 / self.bp, 1.0 / self.bm) * self.pdf(v)

    def sample(self, rng, n):
        left = rng.random(n) < self.bm / (self.bm + self.bp)
        e = rng.standard_exponential(n)
        return self.mu + np.where(left, -self.bm * e, self.bp * e)


# Exp-sinh rule for ∫_0^∞ t^(λ-1) (t+w)^(λ-1) e^{-2t} dt; fixed nodes.
_ES_STEP = 1.0 / 32
_ES_U = np.arange(-5.0, 4.0 + _ES_STEP / 2, _ES_STEP)
_ES_T = np.exp(0.5 * math.pi * np.sinh(_ES_U))
_ES_W = _ES_STEP * _ES_T * 0.5 * math.pi * np.cosh(_ES_U)


class GeneralizedLaplace(NoiseLaw):
    """Density of ``mu + b (G1 - G2)`` with ``G1, G2 ~ Gamma(lam, 1)`` iid."""

    def __init__(self, spec):
        super().__init__(spec)
        self.mu, self.b, self.lam = spec.mu, spec.b, spec.lam
        self.kinks = (self.mu,)
        self._logc = -2 * gammaln(self.lam)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        w = np.abs(v - self.mu).ravel() / self.b
        lam = self.lam
        t = _ES_T[None, :]
        logint = ((lam - 1) * (np.log(t) + np.log(t + w[:, None])) - 2 * t)
        inner = np.exp(logint + self._logc) @ _ES_W
        out = np.exp(-w) * inner / self.b
        return out.reshape(v.shape)

    def sample(self, rng, n):
        return self.mu + self.b * (rng.standard_gamma(self.lam, n) - rng.standard_gamma(self.lam, n))


def _poly_deriv(c):
    return P.polyder(c) if len(c) > 1 else np.zeros(1)


@lru_cache(maxsize=None)
def _logistic_polys(kmax):
    # f = sech^2(x) / (4s), x = u / 2s, T = tanh(x);
    # f^(k) ∝ sech^2(x) R_k(T) with R_{k+1} = R_k' (1 - T^2) - 2 T R_k
    polys = [np.array([1.0])]
    one_minus = np.array([1.0, 0.0, -1.0])
    for _ in range(kmax):
        r = polys[-1]
        polys.append(P.polysub(P.polymul(_poly_deriv(r), one_minus), P.polymul([0.0, 2.0], r)))
    return polys


@lru_cache(maxsize=None)
def _sech_polys(kmax):
    # f^(k) ∝ P_k(T) sech(x); P_{k+1} = P_k'(1 - T^2) - T P_k
    polys = [np.array([1.0])]
    one_minus = np.array([1.0, 0.0, -1.0])
    for _ in range(kmax):
        p = polys[-1]
        polys.append(P.polysub(P.polymul(_poly_deriv(p), one_minus), P.polymul([0.0, 1.0], p)))
    return polys


@lru_cache(maxsize=None)
def _gumbel_polys(kmax):
    # f ∝ w e^{-w}, w = e^{-x}; d/dx [Q(w) e^{-w}] = (-w Q'(w) + w Q(w)) e^{-w}
    polys = [np.array([0.0, 1.0])]
    for _ in range(kmax):
        q = polys[-1]
        polys.append(P.polyadd(-P.polymul([0.0, 1.0], _poly_deriv(q)), P.polymul([0.0, 1.0], q)))
    return polys


_SMOOTH_ORDER = 12


class Logistic(NoiseLaw):
    max_order = _SMOOTH_ORDER

    def __init__(self, spec):
        super().__init__(spec)
        self.mu, self.s = spec.mu, spec.s

    def pdf(self, v):
        return self._deriv(np.asarray(v, dtype=float), 0)

    def _deriv(self, v, k):
        x = (v - self.mu) / (2 * self.s)
        e = np.exp(-2 * np.abs(x))
        sech2 = 4 * e / (1 + e) ** 2
        return P.polyval(np.tanh(x), _logistic_polys(k)[k]) * sech2 / (4 * self.s) / (2 * self.s) ** k

    def sample(self, rng, n):
        u = rng.random(n)
        return self.mu + self.s * (np.log(u) - np.log1p(-u))


class HyperbolicSecant(NoiseLaw):
    max_order = _SMOOTH_ORDER

    def __init__(self, spec):
        super().__init__(spec)
        self.mu, self.s = spec.mu, spec.s

    def pdf(self, v):
        return self._deriv(np.asarray(v, dtype=float), 0)

    def _deriv(self, v, k):
        x = math.pi * (v - self.mu) / (2 * self.s)
        ax = np.abs(x)
        sech = 2 * np.exp(-ax) / (1 + np.exp(-2 * ax))
        T = np.tanh(x)
        scale = (math.pi / (2 * self.s)) ** k / (2 * self.s)
        return scale * P.polyval(T, _sech_polys(k)[k]) * sech

    def sample(self, rng, n):
        u = rng.random(n)
        return self.mu + (2 * self.s / math.pi) * np.log(np.tan(0.5 * math.pi * u))


class Gumbel(NoiseLaw):
    max_order = _SMOOTH_ORDER

    def __init__(self, spec):
        super().__init__(spec)
        self.mu, self.beta = spec.mu, spec.beta

    def pdf(self, v):
        return self._deriv(np.asarray(v, dtype=float), 0)

    def _deriv(self, v, k):
        x = (v - self.mu) / self.beta
        w = np.exp(-np.maximum(x, -700.0))
        big = w > 1e3
        w = np.where(big, 1.0, w)
        val = P.polyval(w, _gumbel_polys(k)[k]) * np.exp(-w) / self.beta ** (k + 1)
        return np.where(big, 0.0, val)

    def sample(self, rng, n):
        return self.mu - self.beta * np.log(-np.log(rng.random(n)))


class Cauchy(NoiseLaw):
    max_order = _SMOOTH_ORDER

    def __init__(self, spec):
        super().__init__(spec)
        self.mu, self.gamma = spec.mu, spec.gamma

    def pdf(self, v):
        u = (np.asarray(v, dtype=float) - self.mu) / self.gamma
        return 1.0 / (math.pi * self.gamma * (1 + u * u))

    def _deriv(self, v, k):
        # 1/(1+u^2) = Im 1/(u - i); d^k/du^k 1/(u - i) = (-1)^k k! (u - i)^-(k+1)
        u = (v - self.mu) / self.gamma
        z = (-1) ** k * math.factorial(k) / (u - 1j) ** (k + 1)
        return z.imag / (math.pi * self.gamma ** (k + 1))

    def sample(self, rng, n):
        return self.mu + self.gamma * np.tan(math.pi * (rng.random(n) - 0.5))


class GammaNoise(NoiseLaw):
    support = (0.0, math.inf)
    kinks = (0.0,)

    def __init__(self, spec):
        super().__init__(spec)
        self.alpha, self.theta = spec.alpha, spec.theta

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        pos = v > 0
        vv = np.where(pos, v, 1.0)
        logf = (self.alpha - 1) * np.log(vv) - vv / self.theta - gammaln(self.alpha) - self.alpha * math.log(self.theta)
        return np.where(pos, np.exp(logf), 0.0)

    def sample(self, rng, n):
        return self.theta * rng.standard_gamma(self.alpha, n)


class NoncentralChiSq(NoiseLaw):
    """Poisson mixture of central chi-square densities."""

    support = (0.0, math.inf)
    kinks = (0.0,)
    TAIL = 1e-12

    def __init__(self, spec):
        super().__init__(spec)
        self.nu, self.delta = spec.nu, spec.delta
        lam = self.delta / 2
        # Poisson weights until the remaining tail mass is below TAIL
        weights, j, cum = [], 0, 0.0
        while True:
            lw = -lam + (j * math.log(lam) if lam > 0 else (0.0 if j == 0 else -math.inf)) - math.lgamma(j + 1)
            w = math.exp(lw)
            weights.append(w)
            cum += w
            if 1.0 - cum < self.TAIL and j >= lam:
                break
            j += 1
        self.weights = np.array(weights)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        flat = v.ravel()
        pos = flat > 0
        x = np.where(pos, flat, 1.0)
        dof = self.nu + 2 * np.arange(self.weights.size)
        h = dof[:, None] / 2
        logc = (h - 1) * np.log(x)[None, :] - x[None, :] / 2 - h * math.log(2) - gammaln(h)
        out = self.weights @ np.exp(logc)
        return np.where(pos, out, 0.0).reshape(v.shape)

    def sample(self, rng, n):
        j = rng.poisson(self.delta / 2, n)
        return rng.chisquare(self.nu + 2 * j)


class InverseGaussian(NoiseLaw):
    max_order = _SMOOTH_ORDER
    support = (0.0, math.inf)
    kinks = (0.0,)

    def __init__(self, spec):
        super().__init__(spec)
        self.mu, self.lam = spec.mu, spec.lam

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        pos = v > 0
        x = np.where(pos, v, 1.0)
        logf = 0.5 * math.log(self.lam / (2 * math.pi)) - 1.5 * np.log(x) - self.lam * (x - self.mu) ** 2 / (2 * self.mu ** 2 * x)
        return np.where(pos, np.exp(logf), 0.0)

    def _psi(self, x, m):
        # m-th derivative of (log f)'
        lam, mu = self.lam, self.mu
        if m == 0:
            return -1.5 / x - lam / (2 * mu * mu) + lam / (2 * x * x)
        sgn = (-1) ** m
        return -1.5 * sgn * math.factorial(m) * x ** (-m - 1) + 0.5 * lam * sgn * math.factorial(m + 1) * x ** (-m - 2)

    def _deriv(self, v, k):
        pos = self.pdf(v) > 0
        x = np.where(pos, v, 1.0)
        d = [np.where(pos, self.pdf(x), 0.0)]
        psi = [self._psi(x, m) for m in range(k)]
        for j in range(k):
            # Leibniz: f^(j+1) = sum_i C(j,i) f^(i) psi^(j-i)
            d.append(sum(math.comb(j, i) * d[i] * psi[j - i] for i in range(j + 1)))
        return np.where(pos, d[k], 0.0)

    def sample(self, rng, n):
        # Michael-Schucany-Haas transformation
        mu, lam = self.mu, self.lam
        nu2 = rng.standard_normal(n) ** 2
        x = mu + mu * mu * nu2 / (2 * lam) - mu / (2 * lam) * np.sqrt(4 * mu * lam * nu2 + (mu * nu2) ** 2)
        keep = rng.random(n) <= mu / (mu + x)
        return np.where(keep, x, mu * mu / x)


class ProductLaplace(NoiseLaw):
    """Independent Laplace(0, b) coordinates; ``pdf`` takes ``(..., d)`` arrays."""

    def __init__(self, spec):
        super().__init__(spec)
        self.b, self.d = spec.b, spec.d
        self.kinks = (0.0,)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        if self.d == 1:
            return np.exp(-np.abs(v) / self.b) / (2 * self.b)
        return np.exp(-np.abs(v).sum(axis=-1) / self.b) / (2 * self.b) ** self.d

    def right_deriv(self, v):
        if self.d != 1:
            raise Unsupported("product_laplace", "right derivative for d > 1")
        v = np.asarray(v, dtype=float)
        return np.where(v >= 0, -1.0, 1.0) * self.pdf(v) / self.b

    def sample(self, rng, n):
        out = rng.laplace(0.0, self.b, (n, self.d))
        return out[:, 0] if self.d == 1 else out


_LAWS = {
    "gaussian": Gaussian,
    "generalized_laplace": GeneralizedLaplace,
    "laplace": Laplace,
    "asymmetric_laplace": AsymmetricLaplace,
    "logistic": Logistic,
    "gumbel": Gumbel,
    "cauchy": Cauchy,
    "hyperbolic_secant": HyperbolicSecant,
    "gamma": GammaNoise,
    "noncentral_chisq": NoncentralChiSq,
    "inverse_gaussian": InverseGaussian,
    "product_laplace": ProductLaplace,
}


@lru_cache(maxsize=256)
def noise_law(spec: NoiseSpec) -> NoiseLaw:
    """Build (and cache) the law object for a validated spec."""
    return _LAWS[spec.family](spec)
