"""Direct Bayes ground truth, noise densities and seeded samplers.

Nothing here goes through the marginal-density representations: posterior
quantities are ratios of prior integrals weighted by the noise density,
computed as finite sums (atomic priors) or by quadrature over the latent
variable (Gaussian-mixture priors).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    DENSITY_FLOOR, DensityTooSmall, FunctionalSpec, NoiseSpec, PriorSpec,
    TweedieError, Unsupported, validate_noise,
)
from .noise import make_rng, noise_law
from .numerics import adaptive_integrate


def noise_pdf(noise: NoiseSpec, v):
    """Noise density ``f_V(v)``; ``v`` has trailing dimension d for the product mechanism."""
    law = noise_law(validate_noise(noise))
    return law.pdf(v)


def _noise_weights(noise: NoiseSpec, y, x: np.ndarray) -> np.ndarray:
    """``f_V(y - x_i)`` for atom locations ``x`` of shape (m, d)."""
    law = noise_law(noise)
    diff = np.asarray(y, dtype=float).reshape(1, -1) - x
    if x.shape[1] == 1:
        return law.pdf(diff[:, 0])
    if noise.family == "product_laplace":
        return law.pdf(diff)
    if noise.family == "gaussian":
        return np.prod(law.pdf(diff), axis=1)
    raise Unsupported(noise.family, f"{x.shape[1]}-dimensional oracle")


def estimand(fspec: FunctionalSpec, centre=None) -> Callable:
    """Map a functional request to the function ``g`` integrated against the posterior."""
    t = fspec.target
    a, k, m, tau = fspec.a, fspec.k, fspec.m, fspec.tau
    if t == "mean":
        return lambda x: x
    if t in ("second_moment", "variance"):
        return lambda x: x * x
    if t == "raw_moment":
        return lambda x: x ** k
    if t == "centered_moment":
        return lambda x: (x - centre) ** k
    if t == "mgf":
        tv = np.atleast_1d(fspec.t)
        return lambda x: np.exp(x @ tv) if np.ndim(x) == 2 else np.exp(tv[0] * x)
    if t == "cdf":
        return lambda x: (x <= a).astype(float)
    if t == "squared_risk":
        return lambda x: (x - a) ** 2
    if t == "even_risk":
        return lambda x: (x - a) ** (2 * m)
    if t == "hinge":
        return lambda x: np.maximum(x - a, 0.0)
    if t == "pinball":
        return lambda x: tau * np.maximum(x - a, 0.0) + (1 - tau) * np.maximum(a - x, 0.0)
    if t == "absolute_risk":
        return lambda x: np.abs(x - a)
    raise ValueError(t)  # pragma: no cover


def _atomic_expectation(prior, noise, g, y):
    w = prior.weights * _noise_weights(noise, y, prior.locations)
    total = w.sum()
    if not total >= DENSITY_FLOOR:
        raise DensityTooSmall(f"marginal density {total!r} at y={y!r}")
    x = prior.locations[:, 0] if prior.dim == 1 else prior.locations
    vals = np.asarray(g(x), dtype=float)
    return np.tensordot(w, vals, axes=(0, 0)) / total


def _mixture_expectation(prior, noise, g, y, tol, kinks=()):
    if prior.dim != 1:
        raise Unsupported("gaussian_mixture", "multivariate oracle")
    law = noise_law(noise)
    num = den = 0.0
    y = float(y)
    for c in range(prior.size):
        mean = float(prior.locations[c, 0])
        sd = math.sqrt(float(prior.covariances[c, 0, 0]))

        def dens(x):
            z = (x - mean) / sd
            return np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * sd) * law.pdf(y - x)

        # latent range where y - x stays inside the noise support
        lo, hi = y - law.support[1], y - law.support[0]
        pts = [mean + j * sd for j in (-8, -4, -1, 0, 1, 4, 8)]
        pts += [y - k for k in law.kinks] + list(kinks) + [y - noise.location]
        d = adaptive_integrate(dens, lo, hi, abs_tol=tol / 10, rel_tol=1e-13, points=pts)
        n = adaptive_integrate(lambda x: g(x) * dens(x), lo, hi, abs_tol=tol / 10,
                               rel_tol=1e-13, points=pts)
        num += prior.weights[c] * n.value
        den += prior.weights[c] * d.value
    if not den >= DENSITY_FLOOR:
        raise DensityTooSmall(f"marginal density {den!r} at y={y!r}")
    return num / den


def oracle_posterior(
    prior: PriorSpec,
    noise: NoiseSpec,
    g: FunctionalSpec | Callable,
    y,
    tol: float = 1e-11,
):
    """``E[g(X) | Y = y]`` by direct Bayes.

    For ``FunctionalSpec`` inputs the usual post-processing applies:
    ``variance`` returns the posterior variance (the covariance matrix in
    d > 1) and ``centered_moment`` centres at the posterior mean.
    """
    validate_noise(noise)
    if prior.kind == "samples":
        raise Unsupported("samples", "oracle")

    def expect(func, kinks=()):
        if prior.kind == "atomic":
            return _atomic_expectation(prior, noise, func, y)
        return _mixture_expectation(prior, noise, func, y, tol, kinks)

    if callable(g) and not isinstance(g, FunctionalSpec):
        return expect(g)
    kinks = () if g.a is None else (g.a,)
    if g.target == "variance":
        if prior.dim == 1:
            mean = float(expect(lambda x: x))
            return float(expect(lambda x: (x - mean) ** 2))
        mean = np.asarray(expect(lambda x: x))
        outer = expect(lambda x: np.einsum("mi,mj->mij", x - mean, x - mean))
        return np.asarray(outer)
    centre = None
    if g.target == "centered_moment":
        centre = float(expect(lambda x: x))
    val = expect(estimand(g, centre), kinks)
    return float(val) if np.ndim(val) == 0 else np.asarray(val)


def sample_joint(prior: PriorSpec, noise: NoiseSpec, n: int, seed: int):
    """Draw ``n`` pairs ``(x, y = x + v)``; deterministic given ``seed``.

    Returns
    -------
    x, y : ndarray
        Shape ``(n,)`` in one dimension, ``(n, d)`` otherwise.
    """
    validate_noise(noise)
    if n < 1:
        raise ValueError("n must be positive")
    rng = make_rng(seed)
    comp = rng.choice(prior.size, size=n, p=prior.weights)
    x = prior.locations[comp].copy()
    if prior.kind == "gaussian_mixture":
        chol = np.linalg.cholesky(prior.covariances)
        z = rng.standard_normal((n, prior.dim))
        x += np.einsum("nij,nj->ni", chol[comp], z)
    elif prior.kind != "atomic":
        raise Unsupported("samples", "joint sampling")
    law = noise_law(noise)
    if prior.dim == 1:
        x = x[:, 0]
        v = law.sample(rng, n)
    elif noise.family == "product_laplace":
        v = law.sample(rng, n)
    elif noise.family == "gaussian":
        v = np.stack([law.sample(rng, n) for _ in range(prior.dim)], axis=1)
    else:
        raise Unsupported(noise.family, f"{prior.dim}-dimensional sampling")
    return x, x + v


# --------------------------------------------------------------------------
# validation runs


@dataclass
class ValidationCase:
    """One (prior, noise, functional) combination checked on a grid of points."""

    prior: PriorSpec
    noise: NoiseSpec
    functional: FunctionalSpec
    ys: Sequence
    tol: float
    formula: Callable | None = None   # overrides the default dispatcher
    oracle: Callable | None = None    # overrides oracle_posterior
    family: str | None = None


@dataclass
class CaseRecord:
    family: str
    functional: str
    y: float | list
    formula_value: float | None
    oracle_value: float | None
    abs_error: float | None
    tolerance: float
    passed: bool
    message: str = ""

    def to_dict(self):
        return {"family": self.family, "functional": self.functional, "y": self.y,
                "formula": self.formula_value, "oracle": self.oracle_value,
                "abs_error": self.abs_error, "tol": self.tolerance, "pass": self.passed,
                **({"error": self.message} if self.message else {})}


@dataclass
class OracleReport:
    records: list[CaseRecord] = field(default_factory=list)

    @property
    def max_abs_error(self) -> float | None:
        errs = [r.abs_error for r in self.records if r.abs_error is not None]
        return max(errs) if errs else None

    @property
    def max_abs_error_by_family(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for r in self.records:
            if r.abs_error is not None:
                out[r.family] = max(out.get(r.family, 0.0), r.abs_error)
        return out

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self, suite: str = "custom", seed: int | None = None) -> dict:
        return {"suite": suite, "seed": seed,
                "cases": [r.to_dict() for r in self.records],
                "max_abs_error": self.max_abs_error}


def _as_scalar_or_list(v):
    arr = np.asarray(v, dtype=float)
    return float(arr) if arr.ndim == 0 else arr.tolist()


def run_validation(suite: Sequence[ValidationCase]) -> OracleReport:
    """Evaluate formula and oracle on every case; errors are recorded, not raised."""
    from .functionals import evaluate

    report = OracleReport()
    for case in suite:
        family = case.family or case.noise.family
        for y in case.ys:
            yv = _as_scalar_or_list(y)
            rec = CaseRecord(family, case.functional.label, yv, None, None, None, case.tol, False)
            try:
                if case.formula is not None:
                    fv = case.formula(y)
                else:
                    fv = evaluate(case.noise, case.prior, y, case.functional).value
                ov = case.oracle(y) if case.oracle is not None else oracle_posterior(
                    case.prior, case.noise, case.functional, y)
                err = float(np.max(np.abs(np.asarray(fv, dtype=float) - np.asarray(ov, dtype=float))))
                rec.formula_value = _as_scalar_or_list(fv)
                rec.oracle_value = _as_scalar_or_list(ov)
                rec.abs_error = err
                rec.passed = bool(err <= case.tol)
            except (TweedieError, ValueError, ArithmeticError) as exc:
                rec.message = f"{type(exc).__name__}: {exc}"
            report.records.append(rec)
    return report
