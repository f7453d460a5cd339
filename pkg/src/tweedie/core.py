"""Domain types, parameter validation and functional-request plumbing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

WEIGHT_TOL = 1e-12
MAX_MOMENT_ORDER = 10
MAX_RISK_ORDER = 5


# --------------------------------------------------------------------------
# errors


class TweedieError(Exception):
    """Base class for every error raised by this package."""


class ParamOutOfRange(TweedieError, ValueError):
    def __init__(self, family: str, parameter: str, bound: str):
        self.family = family
        self.parameter = parameter
        self.bound = bound
        super().__init__(f"{family}: parameter {parameter} must satisfy {bound}")


class MgfDomain(TweedieError, ValueError):
    pass


class Unsupported(TweedieError, NotImplementedError):
    def __init__(self, family: str, target: str, detail: str = ""):
        self.family = family
        self.target = target
        msg = f"{target} is not available for {family} noise"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class DensityTooSmall(TweedieError, ArithmeticError):
    pass


class NonConvergence(TweedieError, RuntimeError):
    def __init__(self, message: str, partial: Any = None):
        self.partial = partial
        super().__init__(message)


class DimensionMismatch(TweedieError, ValueError):
    pass


class TooFewSamples(TweedieError, ValueError):
    pass


class SeriesDivergence(TweedieError, RuntimeError):
    pass


class DomainError(TweedieError, ValueError):
    pass


class NoMass(TweedieError, ValueError):
    pass


class InvalidPrior(TweedieError, ValueError):
    pass


# --------------------------------------------------------------------------
# noise


# family -> (parameter names, defaults)
FAMILIES: dict[str, tuple[tuple[str, ...], dict[str, float]]] = {
    "gaussian": (("mu", "sigma"), {"mu": 0.0}),
    "generalized_laplace": (("mu", "b", "lam"), {"mu": 0.0}),
    "laplace": (("mu", "b"), {"mu": 0.0}),
    "asymmetric_laplace": (("mu", "b_minus", "b_plus"), {"mu": 0.0}),
    "logistic": (("mu", "s"), {"mu": 0.0}),
    "gumbel": (("mu", "beta"), {"mu": 0.0}),
    "cauchy": (("mu", "gamma"), {"mu": 0.0}),
    "hyperbolic_secant": (("mu", "s"), {"mu": 0.0}),
    "gamma": (("alpha", "theta"), {}),
    "noncentral_chisq": (("nu", "delta"), {}),
    "inverse_gaussian": (("mu", "lam"), {}),
    "product_laplace": (("b", "d"), {"d": 1}),
}

# families that only carry a posterior-mean representation
MEAN_ONLY_FAMILIES = frozenset(FAMILIES) - {"gaussian", "product_laplace"}

_ALIASES = {
    "normal": "gaussian",
    "generalizedlaplace": "generalized_laplace",
    "asymmetriclaplace": "asymmetric_laplace",
    "sech": "hyperbolic_secant",
    "hyperbolicsecant": "hyperbolic_secant",
    "noncentralchisq": "noncentral_chisq",
    "ncx2": "noncentral_chisq",
    "inversegaussian": "inverse_gaussian",
    "productlaplace": "product_laplace",
}


def _family_key(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    key = _ALIASES.get(key.replace("_", ""), key)
    if key not in FAMILIES:
        raise ValueError(f"unknown noise family {name!r}")
    return key


@dataclass(frozen=True)
class NoiseSpec:
    """A tagged additive-noise law.

    Parameters are stored by name; missing location parameters default to
    zero.  Attribute access falls through to the parameter table, so
    ``NoiseSpec("laplace", {"b": 2}).b == 2``.
    """

    family: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        key = _family_key(self.family)
        names, defaults = FAMILIES[key]
        given = dict(self.params)
        unknown = set(given) - set(names)
        if unknown:
            raise ValueError(f"{key}: unknown parameters {sorted(unknown)}")
        merged = {**defaults, **given}
        missing = [n for n in names if n not in merged]
        if missing:
            raise ValueError(f"{key}: missing parameters {missing}")
        vals = {}
        for n in names:
            v = merged[n]
            vals[n] = int(v) if n == "d" else float(v)
        object.__setattr__(self, "family", key)
        object.__setattr__(self, "params", vals)

    def __getattr__(self, name):
        params = self.__dict__.get("params", {})
        if name in params:
            return params[name]
        raise AttributeError(name)

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items()))))

    @property
    def dim(self) -> int:
        return self.params["d"] if self.family == "product_laplace" else 1

    @property
    def location(self) -> float:
        """Additive shift used by the translation-type families (0 otherwise)."""
        if self.family in ("gamma", "noncentral_chisq", "inverse_gaussian", "product_laplace"):
            return 0.0
        return self.params["mu"]

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params}

    # convenience constructors
    @classmethod
    def gaussian(cls, sigma=1.0, mu=0.0):
        return cls("gaussian", {"mu": mu, "sigma": sigma})

    @classmethod
    def laplace(cls, b=1.0, mu=0.0):
        return cls("laplace", {"mu": mu, "b": b})

    @classmethod
    def product_laplace(cls, b=1.0, d=1):
        return cls("product_laplace", {"b": b, "d": d})


def _require(cond: bool, family: str, parameter: str, bound: str):
    if not cond:
        raise ParamOutOfRange(family, parameter, bound)


def validate_noise(spec: NoiseSpec) -> NoiseSpec:
    """Check the family restrictions; return ``spec`` unchanged when they hold.

    Boundary values (for instance ``alpha == 1`` for Gamma noise) are rejected.
    """
    f, p = spec.family, spec.params
    for name, v in p.items():
        if not math.isfinite(v):
            raise ParamOutOfRange(f, name, "finite")
    for scale in ("sigma", "b", "b_minus", "b_plus", "s", "beta", "gamma", "theta"):
        if scale in p:
            _require(p[scale] > 0, f, scale, f"{scale}>0")
    if f == "generalized_laplace":
        _require(p["lam"] > 0.5, f, "lam", "lam>1/2")
    elif f == "gamma":
        _require(p["alpha"] > 1, f, "alpha", "alpha>1")
    elif f == "noncentral_chisq":
        _require(p["nu"] > 2, f, "nu", "nu>2")
        _require(p["delta"] >= 0, f, "delta", "delta>=0")
    elif f == "inverse_gaussian":
        _require(p["mu"] > 0, f, "mu", "mu>0")
        _require(p["lam"] > 0, f, "lam", "lam>0")
    elif f == "product_laplace":
        _require(p["d"] >= 1, f, "d", "d>=1")
    return spec


# --------------------------------------------------------------------------
# prior


def _clean_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.size == 0:
        raise InvalidPrior("prior needs at least one component")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise InvalidPrior("weights must be strictly positive")
    total = w.sum()
    if abs(total - 1.0) > WEIGHT_TOL:
        raise InvalidPrior(f"weights sum to {total!r}, not 1")
    return w / total


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Latent law: atomic, Gaussian mixture, or samples only.

    Locations are stored as an ``(m, d)`` array, covariances as ``(m, d, d)``.
    Use the class constructors rather than building instances directly.
    """

    kind: str
    locations: np.ndarray
    weights: np.ndarray
    covariances: np.ndarray | None = None
    samples: np.ndarray | None = None

    @property
    def dim(self) -> int:
        if self.kind == "samples":
            return 1 if self.samples.ndim == 1 else self.samples.shape[1]
        return self.locations.shape[1]

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def atomic(cls, locations, weights=None) -> "PriorSpec":
        locs = np.asarray(locations, dtype=float)
        if locs.ndim == 0:
            locs = locs.reshape(1, 1)
        elif locs.ndim == 1:
            locs = locs[:, None]
        if weights is None:
            weights = np.full(locs.shape[0], 1.0 / locs.shape[0])
        w = _clean_weights(weights)
        if w.shape[0] != locs.shape[0]:
            raise InvalidPrior("locations and weights differ in length")
        if not np.all(np.isfinite(locs)):
            raise InvalidPrior("atom locations must be finite")
        if np.unique(locs, axis=0).shape[0] != locs.shape[0]:
            raise InvalidPrior("atom locations must be distinct")
        locs.setflags(write=False)
        w.setflags(write=False)
        return cls("atomic", locs, w)

    @classmethod
    def point_mass(cls, x) -> "PriorSpec":
        return cls.atomic(np.atleast_1d(np.asarray(x, dtype=float))[None, :], [1.0])

    @classmethod
    def gaussian_mixture(cls, means, covariances, weights=None) -> "PriorSpec":
        mu = np.asarray(means, dtype=float)
        if mu.ndim <= 1:
            mu = mu.reshape(-1, 1)
        m, d = mu.shape
        cov = np.asarray(covariances, dtype=float)
        if cov.ndim <= 1:
            if d != 1:
                raise InvalidPrior("multivariate components need covariance matrices")
            cov = cov.reshape(-1, 1, 1)
        elif cov.ndim == 2:
            cov = np.broadcast_to(cov, (m, d, d)).copy() if cov.shape == (d, d) else cov
        if cov.shape != (m, d, d):
            raise InvalidPrior(f"covariances have shape {cov.shape}, expected {(m, d, d)}")
        for c in cov:
            if not np.allclose(c, c.T, rtol=0, atol=1e-14):
                raise InvalidPrior("covariances must be symmetric")
            if np.linalg.eigvalsh(c).min() <= 0:
                raise InvalidPrior("covariances must be positive definite")
        if weights is None:
            weights = np.full(m, 1.0 / m)
        w = _clean_weights(weights)
        if w.shape[0] != m:
            raise InvalidPrior("means and weights differ in length")
        for a in (mu, cov, w):
            a.setflags(write=False)
        return cls("gaussian_mixture", mu, w, covariances=cov)

    @classmethod
    def normal(cls, mean=0.0, var=1.0) -> "PriorSpec":
        return cls.gaussian_mixture([mean], [var], [1.0])

    @classmethod
    def from_samples(cls, samples) -> "PriorSpec":
        s = np.asarray(samples, dtype=float)
        return cls("samples", np.empty((0, 1)), np.empty(0), samples=s)

    def shifted(self, c) -> "PriorSpec":
        """The same law translated by ``c``."""
        c = np.atleast_1d(np.asarray(c, dtype=float))
        if self.kind == "atomic":
            return PriorSpec.atomic(self.locations + c, self.weights)
        if self.kind == "gaussian_mixture":
            return PriorSpec.gaussian_mixture(self.locations + c, self.covariances, self.weights)
        return PriorSpec.from_samples(self.samples + (c if self.samples.ndim > 1 else c[0]))


# --------------------------------------------------------------------------
# functionals

TARGETS = (
    "mean", "second_moment", "raw_moment", "centered_moment", "variance", "mgf",
    "cdf", "squared_risk", "even_risk", "hinge", "pinball", "absolute_risk",
)

_TARGET_PARAMS = {
    "mean": (), "second_moment": (), "variance": (),
    "raw_moment": ("k",), "centered_moment": ("k",),
    "mgf": ("t",), "cdf": ("a",), "squared_risk": ("a",),
    "even_risk": ("a", "m"), "hinge": ("a",), "pinball": ("a", "tau"),
    "absolute_risk": ("a",),
}

LAPLACE_MECH_TARGETS = frozenset(
    {"mean", "second_moment", "variance", "mgf", "cdf", "squared_risk", "hinge",
     "pinball", "absolute_risk"})
GAUSSIAN_TARGETS = frozenset(
    {"mean", "second_moment", "variance", "mgf", "raw_moment", "centered_moment",
     "even_risk", "cdf", "hinge", "absolute_risk"})


@dataclass(frozen=True)
class FunctionalSpec:
    """Which posterior quantity to compute.

    ``t`` may be a scalar or a tuple for multivariate MGFs.
    """

    target: str
    k: int | None = None
    m: int | None = None
    t: float | tuple | None = None
    a: float | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"unknown functional {self.target!r}")
        needed = _TARGET_PARAMS[self.target]
        for name in ("k", "m", "t", "a", "tau"):
            val = getattr(self, name)
            if name in needed and val is None:
                raise ValueError(f"{self.target} needs parameter {name}")
            if name not in needed and val is not None:
                raise ValueError(f"{self.target} takes no parameter {name}")
        for name in ("k", "m"):
            val = getattr(self, name)
            if val is not None:
                if int(val) != val or val < 1:
                    raise ValueError(f"{name} must be a positive integer")
                object.__setattr__(self, name, int(val))
        if self.t is not None and np.ndim(self.t) > 0:
            object.__setattr__(self, "t", tuple(float(v) for v in np.ravel(self.t)))
        elif self.t is not None:
            object.__setattr__(self, "t", float(self.t))
        for name in ("a", "tau"):
            if getattr(self, name) is not None:
                object.__setattr__(self, name, float(getattr(self, name)))
        if self.tau is not None and not 0.0 < self.tau < 1.0:
            raise ValueError("pinball level tau must lie in (0, 1)")

    # constructors
    @classmethod
    def mean(cls):
        return cls("mean")

    @classmethod
    def second_moment(cls):
        return cls("second_moment")

    @classmethod
    def variance(cls):
        return cls("variance")

    @classmethod
    def raw_moment(cls, k):
        return cls("raw_moment", k=k)

    @classmethod
    def centered_moment(cls, k):
        return cls("centered_moment", k=k)

    @classmethod
    def mgf(cls, t):
        return cls("mgf", t=t)

    @classmethod
    def cdf(cls, a):
        return cls("cdf", a=a)

    @classmethod
    def squared_risk(cls, a):
        return cls("squared_risk", a=a)

    @classmethod
    def even_risk(cls, a, m):
        return cls("even_risk", a=a, m=m)

    @classmethod
    def hinge(cls, a):
        return cls("hinge", a=a)

    @classmethod
    def pinball(cls, a, tau):
        return cls("pinball", a=a, tau=tau)

    @classmethod
    def absolute_risk(cls, a):
        return cls("absolute_risk", a=a)

    @property
    def label(self) -> str:
        """Compact text form, inverse of :meth:`parse`."""
        args = []
        for name in _TARGET_PARAMS[self.target]:
            v = getattr(self, name)
            if isinstance(v, tuple):
                args.append(";".join(repr(x) for x in v))
            else:
                args.append(repr(v))
        return self.target + (":" + ",".join(args) if args else "")

    def __str__(self):
        return self.label

    @classmethod
    def parse(cls, text: str) -> "FunctionalSpec":
        """Parse ``"mean"``, ``"mgf:0.5"``, ``"pinball:0,0.3"``, ``"mgf:0.3;-0.2"``."""
        name, _, rest = text.strip().partition(":")
        name = name.strip().lower()
        names = _TARGET_PARAMS.get(name)
        if names is None:
            raise ValueError(f"unknown functional {name!r}")
        parts = [p for p in rest.split(",")] if rest else []
        if len(parts) != len(names):
            raise ValueError(f"{name} expects {len(names)} argument(s), got {len(parts)}")
        kw = {}
        for n, p in zip(names, parts):
            if n == "t" and ";" in p:
                kw[n] = tuple(float(x) for x in p.split(";"))
            elif n in ("k", "m"):
                kw[n] = int(p)
            else:
                kw[n] = float(p)
        return cls(name, **kw)


def validate_functional(fspec: FunctionalSpec, noise: NoiseSpec) -> FunctionalSpec:
    """Reject (functional, noise) pairs that carry no closed representation."""
    fam = noise.family
    if fam in MEAN_ONLY_FAMILIES:
        if fspec.target != "mean":
            raise Unsupported(fam, fspec.target)
    elif fam == "product_laplace":
        if fspec.target not in LAPLACE_MECH_TARGETS:
            raise Unsupported(fam, fspec.target)
        if noise.dim > 1 and fspec.target not in ("mean", "variance", "mgf"):
            raise Unsupported(fam, fspec.target, "multivariate mechanism supports mean, covariance, mgf")
        if fspec.target == "mgf":
            t = np.atleast_1d(fspec.t)
            if t.size != noise.dim:
                raise DimensionMismatch(f"mgf argument has {t.size} entries, noise has d={noise.dim}")
            if np.max(np.abs(t)) >= 1.0 / noise.b:
                raise MgfDomain(f"mgf needs |t| < 1/b = {1.0 / noise.b}")
    elif fam == "gaussian":
        if fspec.target not in GAUSSIAN_TARGETS:
            raise Unsupported(fam, fspec.target)
        if fspec.k is not None and fspec.k > MAX_MOMENT_ORDER:
            raise Unsupported(fam, fspec.target, f"k <= {MAX_MOMENT_ORDER}")
        if fspec.m is not None and fspec.m > MAX_RISK_ORDER:
            raise Unsupported(fam, fspec.target, f"m <= {MAX_RISK_ORDER}")
    return fspec


# --------------------------------------------------------------------------
# results


@dataclass
class EvalResult:
    """A computed posterior functional plus diagnostics."""

    value: Any
    density_at_point: float
    quadrature_error_estimate: float = 0.0
    series_terms_used: int = 0
    converged: bool = True
    details: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


DENSITY_FLOOR = 1e-300


def check_density(f: float) -> float:
    if not f >= DENSITY_FLOOR:
        raise DensityTooSmall(f"marginal density {f!r} is below {DENSITY_FLOOR}")
    return f
