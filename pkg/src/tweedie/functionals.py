"""One entry point that routes a (noise, marginal, functional) request to its rule."""

from __future__ import annotations

import numpy as np

from .core import (
    DimensionMismatch, FunctionalSpec, NoiseSpec, PriorSpec, Unsupported,
    validate_functional, validate_noise,
)
from .densities import DensityModel, ShiftedDensity, exact_density
from .gaussian import gauss_functional, gauss_multivariate
from .laplace_mech import lm_cov, lm_functional_1d, lm_mean_vec, lm_mgf
from .noise_catalog import posterior_mean


def evaluate(noise: NoiseSpec, prior_or_model, y, fspec: FunctionalSpec, **kw):
    """Posterior functional ``fspec`` at ``y`` from the marginal density.

    Parameters
    ----------
    noise : NoiseSpec
    prior_or_model : PriorSpec or DensityModel
        A prior is turned into its exact marginal first.
    y : float or array_like
        Observation (a vector for the multivariate mechanisms).
    fspec : FunctionalSpec
    **kw
        Forwarded to the underlying rule (tolerances, series settings);
        the closed-form multivariate Gaussian rules take none.

    Returns
    -------
    EvalResult
    """
    validate_noise(noise)
    validate_functional(fspec, noise)
    if isinstance(prior_or_model, PriorSpec):
        model = exact_density(prior_or_model, noise)
    elif isinstance(prior_or_model, DensityModel):
        model = prior_or_model
    else:
        raise TypeError("expected a PriorSpec or a DensityModel")

    fam = noise.family
    if fam == "gaussian":
        if model.dim > 1:
            if fspec.target not in ("mean", "variance", "mgf"):
                raise Unsupported(fam, fspec.target, "multivariate rule supports mean, covariance, mgf")
            if noise.mu != 0.0:
                model, y = ShiftedDensity(model, noise.mu), np.asarray(y, dtype=float) - noise.mu
            which = {"variance": "cov"}.get(fspec.target, fspec.target)
            return gauss_multivariate(noise.sigma ** 2 * np.eye(model.dim), model, y, which, fspec.t)
        # the Gaussian rules assume centred noise: Y - mu has density f(. + mu)
        if noise.mu != 0.0:
            model, y = ShiftedDensity(model, noise.mu), float(y) - noise.mu
        return gauss_functional(noise.sigma ** 2, model, y, fspec, **kw)

    if fam == "product_laplace":
        b = noise.b
        if noise.dim == 1:
            if model.dim != 1:
                raise DimensionMismatch("univariate mechanism with a multivariate marginal")
            yv = float(np.asarray(y, dtype=float).reshape(-1)[0])
            return lm_functional_1d(b, model, yv, fspec, **kw)
        if model.dim != noise.dim:
            raise DimensionMismatch(f"noise has d={noise.dim}, marginal has d={model.dim}")
        if fspec.target == "mean":
            return lm_mean_vec(b, model, y, **kw)
        if fspec.target == "variance":
            return lm_cov(b, model, y, **kw)
        return lm_mgf(b, model, y, fspec.t, **kw)

    yv = float(np.asarray(y, dtype=float).reshape(-1)[0])
    return posterior_mean(noise, model, yv, **kw)
