"""Command-line front end: ``tweedie --config run.json [--strict] [--quiet]``.

The JSON config names a command (``denoise``, ``validate`` or
``simulate``) plus the noise law, the prior or a sample file, functionals,
an evaluation grid or data file, tolerances, a seed and an output
directory.  Relative paths are resolved against the config file.

Exit codes: 0 success, 1 failing validation case, 2 malformed input or
config, 3 evaluation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import FunctionalSpec, NoiseSpec, PriorSpec, TweedieError, validate_noise
from .densities import exact_density, kde_fit
from .functionals import evaluate
from .gaussian import HeteroJointSpec, gauss_functional, hetero_condition
from .noise import make_rng
from .oracle import ValidationCase, run_validation, sample_joint
from .suites import SUITES, builtin_suite

log = logging.getLogger("tweedie")

EXIT_OK, EXIT_FAIL, EXIT_BAD_INPUT, EXIT_EVAL = 0, 1, 2, 3


class ConfigError(ValueError):
    """Malformed config, suite or data file."""


# --------------------------------------------------------------------------
# config parsing


@dataclass
class RunConfig:
    command: str
    base_dir: Path
    noise: NoiseSpec | None = None
    prior: PriorSpec | None = None
    joint: HeteroJointSpec | None = None
    sample_file: Path | None = None
    bandwidth: str | float = "silverman"
    functionals: list = field(default_factory=list)
    grid: dict | None = None
    data_file: Path | None = None
    suite: str | Path | None = None
    tol: float | None = None
    seed: int = 0
    n: int | None = None
    out: Path = Path("out")


def parse_noise(obj) -> NoiseSpec:
    if not isinstance(obj, dict) or "family" not in obj:
        raise ConfigError("noise must be an object with a 'family' field")
    params = dict(obj.get("params", {}))
    params.update({k: v for k, v in obj.items() if k not in ("family", "params")})
    return validate_noise(NoiseSpec(obj["family"], params))


def parse_prior(obj, base_dir: Path):
    """Return ``(prior, joint, sample_file, bandwidth)``; exactly one of the first three is set."""
    if not isinstance(obj, dict) or "type" not in obj:
        raise ConfigError("prior must be an object with a 'type' field")
    kind = obj["type"]
    if kind == "atomic":
        atoms = obj["atoms"]
        return PriorSpec.atomic([a[0] for a in atoms], [a[1] for a in atoms]), None, None, None
    if kind == "point_mass":
        return PriorSpec.point_mass(obj["x"]), None, None, None
    if kind == "gaussian_mixture":
        comps = obj["components"]
        means = [np.atleast_1d(c[0]) for c in comps]
        covs = [np.atleast_2d(c[1]) for c in comps]
        return PriorSpec.gaussian_mixture(means, covs, [c[2] for c in comps]), None, None, None
    if kind == "hetero_joint":
        return None, HeteroJointSpec.from_triples([tuple(a) for a in obj["atoms"]]), None, None
    if kind == "samples":
        return None, None, _resolve(base_dir, obj["file"]), obj.get("bandwidth", "silverman")
    raise ConfigError(f"unknown prior type {kind!r}")


def parse_functional(obj) -> FunctionalSpec:
    if isinstance(obj, str):
        return FunctionalSpec.parse(obj)
    if isinstance(obj, dict):
        obj = dict(obj)
        t = obj.pop("target")
        if isinstance(obj.get("t"), list):
            obj["t"] = tuple(obj["t"])
        return FunctionalSpec(t, **obj)
    raise ConfigError(f"cannot read functional {obj!r}")


def _resolve(base_dir: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base_dir / p


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict) or raw.get("command") not in ("denoise", "validate", "simulate"):
        raise ConfigError("config needs 'command' in {denoise, validate, simulate}")
    base = path.resolve().parent
    cfg = RunConfig(command=raw["command"], base_dir=base)
    try:
        if "noise" in raw:
            cfg.noise = parse_noise(raw["noise"])
        if "prior" in raw:
            cfg.prior, cfg.joint, cfg.sample_file, bw = parse_prior(raw["prior"], base)
            cfg.bandwidth = bw or "silverman"
        cfg.functionals = [parse_functional(f) for f in raw.get("functionals", ["mean"])]
        cfg.grid = raw.get("grid")
        if "data_file" in raw:
            cfg.data_file = _resolve(base, raw["data_file"])
        if "suite" in raw:
            s = raw["suite"]
            cfg.suite = s if s in SUITES else _resolve(base, s)
        cfg.tol = None if raw.get("tol") is None else float(raw["tol"])
        cfg.seed = int(raw.get("seed", 0))
        cfg.n = None if raw.get("n") is None else int(raw["n"])
        cfg.out = _resolve(base, raw.get("out", "out"))
    except (KeyError, IndexError, TypeError) as exc:
        raise ConfigError(f"malformed config field: {exc!r}") from exc
    return cfg


# --------------------------------------------------------------------------
# csv helpers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_csv(path: Path) -> dict[str, np.ndarray]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path} is empty; a header row is required")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    try:
        cols = np.array([[float(c) for c in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric or ragged row ({exc})") from exc
    return {h: cols[:, i] for i, h in enumerate(header)}


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


# --------------------------------------------------------------------------
# denoise


def _observations(cfg: RunConfig, dim: int):
    """Return (points, sigmas or None, input columns for the output)."""
    if cfg.data_file is not None:
        cols = read_csv(cfg.data_file)
        if dim > 1:
            names = [f"y{j + 1}" for j in range(dim)]
            if any(n not in cols for n in names):
                raise ConfigError(f"multivariate input needs columns {names}")
            pts = np.stack([cols[n] for n in names], axis=1)
        else:
            if "y" not in cols:
                raise ConfigError("input CSV needs a 'y' column")
            names, pts = ["y"], cols["y"]
        sig = cols.get("sigma")
        if cfg.joint is not None:
            if sig is None:
                raise ConfigError("heteroskedastic mode needs a 'sigma' column")
            names = names + ["sigma"]
        return pts, sig, names
    if cfg.grid is None:
        raise ConfigError("denoise needs 'grid' or 'data_file'")
    if cfg.joint is not None:
        raise ConfigError("heteroskedastic mode needs a data file with a 'sigma' column")
    if dim > 1:
        raise ConfigError("grids are univariate; pass a data file with y1..yd")
    g = cfg.grid
    return np.linspace(float(g["lo"]), float(g["hi"]), int(g["n"])), None, ["y"]


def _value_columns(label: str, value):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return [label], [float(arr)]
    if arr.ndim == 1:
        return [f"{label}_{i + 1}" for i in range(arr.size)], list(arr)
    d = arr.shape[0]
    idx = [(i, j) for i in range(d) for j in range(i, d)]
    return [f"{label}_{i + 1}{j + 1}" for i, j in idx], [arr[i, j] for i, j in idx]


def cmd_denoise(cfg: RunConfig, strict: bool = False) -> int:
    if cfg.noise is None and cfg.joint is None:
        raise ConfigError("denoise needs 'noise' (or a heteroskedastic joint prior)")
    n_sources = sum(x is not None for x in (cfg.prior, cfg.joint, cfg.sample_file))
    if n_sources != 1:
        raise ConfigError("exactly one of a prior spec or a sample file is required")
    if cfg.joint is not None:
        dim = cfg.joint.dim
        if dim != 1:
            raise ConfigError("heteroskedastic denoising is univariate")
    elif cfg.prior is not None:
        dim = cfg.prior.dim
    else:
        dim = 1
    pts, sigmas, in_names = _observations(cfg, dim)

    if cfg.sample_file is not None:
        cols = read_csv(cfg.sample_file)
        if "y" not in cols:
            raise ConfigError("sample file needs a 'y' column")
        model = kde_fit(cols["y"], cfg.bandwidth)
    elif cfg.prior is not None:
        model = exact_density(cfg.prior, cfg.noise)
    else:
        model = None
    hetero_models = {}
    tol_kw = {} if cfg.tol is None else {"tol": cfg.tol}

    header, rows, failures, unconverged = None, [], 0, 0
    for i in range(len(pts)):
        y = pts[i]
        inputs = list(np.atleast_1d(y))
        if sigmas is not None and cfg.joint is not None:
            inputs.append(sigmas[i])
        names, values, fy, err, conv = [], [], math.nan, 0.0, True
        for fs in cfg.functionals:
            try:
                if cfg.joint is not None:
                    s2 = float(sigmas[i]) ** 2
                    if s2 not in hetero_models:
                        hetero_models[s2] = hetero_condition(cfg.joint, s2)[0]
                    res = gauss_functional(s2, hetero_models[s2], float(y), fs, **tol_kw)
                else:
                    res = evaluate(cfg.noise, model, y, fs, **tol_kw)
                cn, cv = _value_columns(fs.label, res.value)
                fy, err, conv = res.density_at_point, max(err, res.quadrature_error_estimate), conv and res.converged
            except TweedieError as exc:
                log.warning("row %d, %s: %s", i, fs.label, exc)
                cn, cv = _value_columns(fs.label, _nan_value(fs, dim))
                conv = False
                failures += 1
            names += cn
            values += cv
        if header is None:
            header = in_names + names + ["f_y", "err_est", "converged"]
        unconverged += not conv
        rows.append(inputs + values + [fy, err, conv])

    out = cfg.out / "denoise.csv"
    write_csv(out, header, rows)
    log.info("wrote %d rows to %s", len(rows), out)
    if failures or (strict and unconverged):
        log.error("%d evaluation failures, %d unconverged rows", failures, unconverged)
        return EXIT_EVAL
    return EXIT_OK


def _nan_value(fs: FunctionalSpec, dim: int):
    """Placeholder shaped like the functional's value, for failed rows."""
    if dim > 1 and fs.target == "mean":
        return np.full(dim, math.nan)
    if dim > 1 and fs.target == "variance":
        return np.full((dim, dim), math.nan)
    return math.nan


# --------------------------------------------------------------------------
# validate


def _load_suite_file(path: Path) -> list[ValidationCase]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read suite {path}: {exc}") from exc
    cases = raw.get("cases") if isinstance(raw, dict) else raw
    if not isinstance(cases, list):
        raise ConfigError("suite file must be a list of cases or {'cases': [...]}")
    out = []
    for c in cases:
        try:
            prior, joint, sample_file, _ = parse_prior(c["prior"], Path(path).parent)
            if prior is None:
                raise ConfigError("suite cases need an atomic or Gaussian-mixture prior")
            out.append(ValidationCase(prior, parse_noise(c["noise"]), parse_functional(c["functional"]),
                                      list(c["ys"]), float(c["tol"])))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed suite case {c!r}: {exc!r}") from exc
    return out


def cmd_validate(cfg: RunConfig) -> int:
    if cfg.suite is None:
        raise ConfigError("validate needs 'suite' (a built-in name or a suite file)")
    if isinstance(cfg.suite, Path):
        cases, name = _load_suite_file(cfg.suite), cfg.suite.stem
    else:
        cases, name = builtin_suite(cfg.suite), cfg.suite
    if cfg.tol is not None:
        for c in cases:
            c.tol = cfg.tol
    report = run_validation(cases)
    cfg.out.mkdir(parents=True, exist_ok=True)
    payload = report.to_dict(suite=name, seed=cfg.seed)
    (cfg.out / "report.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    by_family = {}
    for r in report.records:
        by_family.setdefault(r.family, []).append(r.passed)
    rows = [[fam, report.max_abs_error_by_family.get(fam, math.nan), len(v), sum(v), all(v)]
            for fam, v in by_family.items()]
    _write_summary(cfg.out / "report.csv", rows)
    log.info("suite %s: %d cases, max abs error %s, %s", name, len(report.records),
             report.max_abs_error, "pass" if report.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_FAIL


def _write_summary(path: Path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["family", "max_abs_error", "cases", "passed", "pass"])
        for fam, err, n, k, ok in rows:
            w.writerow([fam, _fmt(err), n, k, _fmt(ok)])


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.n is None or cfg.n < 1:
        raise ConfigError("simulate needs a positive 'n'")
    out = cfg.out / "simulate.csv"
    if cfg.joint is not None:
        rng = make_rng(cfg.seed)
        j = cfg.joint
        if j.dim != 1 or j.variances.ndim != 1:
            raise ConfigError("heteroskedastic simulation is univariate")
        idx = rng.choice(j.weights.size, size=cfg.n, p=j.weights)
        x = j.locations[idx, 0]
        sigma = np.sqrt(j.variances[idx])
        y = x + sigma * rng.standard_normal(cfg.n)
        write_csv(out, ["x", "y", "sigma"], np.column_stack([x, y, sigma]).tolist())
        return EXIT_OK
    if cfg.prior is None or cfg.noise is None:
        raise ConfigError("simulate needs 'noise' and a prior spec")
    x, y = sample_joint(cfg.prior, cfg.noise, cfg.n, cfg.seed)
    if np.ndim(x) == 1:
        write_csv(out, ["x", "y"], np.column_stack([x, y]).tolist())
    else:
        d = x.shape[1]
        header = [f"x{j + 1}" for j in range(d)] + [f"y{j + 1}" for j in range(d)]
        write_csv(out, header, np.hstack([x, y]).tolist())
    log.info("wrote %d draws to %s", cfg.n, out)
    return EXIT_OK


# --------------------------------------------------------------------------


def run(config_path, strict: bool = False) -> int:
    try:
        cfg = load_config(config_path)
        if cfg.command == "denoise":
            return cmd_denoise(cfg, strict)
        if cfg.command == "validate":
            return cmd_validate(cfg)
        return cmd_simulate(cfg)
    except (ConfigError, TweedieError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_BAD_INPUT


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tweedie", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, metavar="PATH", help="JSON run config")
    parser.add_argument("--strict", action="store_true", help="exit 3 when any row did not converge")
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    return run(args.config, strict=args.strict)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
