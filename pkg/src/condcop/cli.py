"""Command-line entry point: ``condcop run`` and ``condcop bench``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical or
estimation failure.  On failure a one-line JSON object
``{"error": ..., "message": ..., "exit_code": ...}`` is written to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .benchmark import METHODS, Scenario, run_benchmark
from .curve import PosteriorCurve
from .dependence import (
    FisherSeries,
    WeightScheme,
    conditional_pseudo_observations,
    conditional_rho_hat,
    conditional_tau_hat,
    fisher_transform,
    unconditional_estimates,
)
from .el import (
    CalibrationDesign,
    el_predict_curve,
    linearised_el_posterior,
    localized_el_curve,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateWeightsError,
    DomainError,
    EstimationError,
    InsufficientDataError,
    NumericError,
)
from .gp import GPModelConfig, MHConfig, fit_gp
from .io import IngestConfig, ingest_csv, write_curve_csv
from .splines import GibbsConfig, SplineConfig, fit_splines

RUN_METHODS = ("gp", "el-local", "el-linear", "el-spline", "bayes-splines", "freq-cond")
SEED_ENV = "CONDCOP_SEED"


@dataclass
class RunConfig:
    """Everything a single ``run`` needs; see the README for the file schema."""

    method: str = "gp"
    functional: str = "rho"
    input: str | None = None
    y1: str = "y1"
    y2: str = "y2"
    covariates: list = field(default_factory=lambda: ["x"])
    bins: int | None = None
    pseudo: str = "global"
    grid: str = "levels"
    seed: int = 0
    out: str = "condcop-out"
    kernel: str = "triweight"
    weights: str = "ll"
    bandwidth: list | None = None
    gp: dict = field(default_factory=dict)
    el: dict = field(default_factory=dict)
    splines: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in RUN_METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {RUN_METHODS}")
        if self.functional not in ("rho", "tau"):
            raise ConfigError(f"functional must be 'rho' or 'tau', not {self.functional!r}")
        if isinstance(self.covariates, str):
            self.covariates = [c.strip() for c in self.covariates.split(",") if c.strip()]
        if self.bins is not None:
            self.bins = int(self.bins)
            if self.bins < 2:
                raise ConfigError("bins must be at least 2")
        self.seed = int(self.seed)


def _load_file(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a mapping")
    return data


def _check_keys(data: dict, cls) -> None:
    known = {f.name for f in fields(cls)}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(f"unknown config keys {extra}")


def _default_seed() -> int:
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None


# ---------------------------------------------------------------------------
# run


def _grid(spec: str, x: np.ndarray) -> np.ndarray:
    if spec == "levels":
        return x
    if x.shape[1] != 1:
        raise ConfigError("only grid='levels' is available with several covariates")
    try:
        m = int(spec)
    except ValueError:
        raise ConfigError(f"grid must be 'levels' or a point count, not {spec!r}") from None
    if m < 2:
        raise ConfigError("grid needs at least two points")
    return np.linspace(x.min(), x.max(), m)[:, None]


def _gp_config(d: dict) -> GPModelConfig:
    d = dict(d)
    mh = MHConfig(**d.pop("mh", {}))
    _check_keys(d, GPModelConfig)
    return GPModelConfig(mh=mh, **d)


def _spline_config(d: dict) -> SplineConfig:
    d = dict(d)
    chain = GibbsConfig(**d.pop("chain", {}))
    _check_keys(d, SplineConfig)
    return SplineConfig(chain=chain, **d)


def _scheme(cfg: RunConfig) -> WeightScheme:
    return WeightScheme(cfg.weights, cfg.kernel, cfg.bandwidth)


def _freq_curve(g, cfg: RunConfig, grid) -> PosteriorCurve:
    ps = g.pooled()
    scheme = _scheme(cfg)
    if cfg.functional == "rho":
        u_hat = conditional_pseudo_observations(ps)
        phi = np.array([conditional_rho_hat(ps, scheme, x, u_hat=u_hat) for x in grid])
    else:
        phi = np.array([conditional_tau_hat(ps, scheme, x) for x in grid])
    phi = np.clip(phi, -1.0, 1.0)
    z = fisher_transform(np.clip(phi, -1 + 1e-12, 1 - 1e-12))
    curve = PosteriorCurve(grid, phi, phi, phi, z)
    curve.warnings.append("point estimates only: lower and upper equal the estimate")
    return curve


def _fit(cfg: RunConfig, g, grid) -> PosteriorCurve:
    ss = np.random.SeedSequence(cfg.seed)
    if cfg.method == "gp":
        return fit_gp(unconditional_estimates(g, cfg.functional), grid, _gp_config(cfg.gp), ss)
    if cfg.method == "bayes-splines":
        return fit_splines(unconditional_estimates(g, cfg.functional), grid, _spline_config(cfg.splines), ss)
    if cfg.method in ("el-linear", "el-spline"):
        series: FisherSeries = unconditional_estimates(g, cfg.functional)
        el = dict(cfg.el)
        if cfg.method == "el-linear":
            design = CalibrationDesign.taylor(series.x, el.pop("degree", 3), el.pop("center", None))
        else:
            design = CalibrationDesign.cubic_spline(series.x, el.pop("knots", None), el.pop("n_knots", 4))
        wbs = linearised_el_posterior(series, design, seed=ss, **el)
        return el_predict_curve(wbs, design, grid)
    if cfg.method == "el-local":
        ps = g.pooled()
        return localized_el_curve(ps, _scheme(cfg), grid, cfg.functional, **cfg.el)
    return _freq_curve(g, cfg, grid)


_EL_DEFAULTS = {
    "el-linear": {"degree": 3, "center": None, "prior_sd": 10.0, "G": 5000, "moments": "residual"},
    "el-spline": {"knots": None, "n_knots": 4, "prior_sd": 10.0, "G": 5000, "moments": "residual"},
    "el-local": {"level": 0.95, "phi_grid": None},
}


def _effective(cfg: RunConfig) -> dict:
    """The configuration with every method block's defaults filled in."""
    d = asdict(cfg)
    d["gp"] = asdict(_gp_config(cfg.gp))
    d["splines"] = asdict(_spline_config(cfg.splines))
    d["el"] = {**_EL_DEFAULTS.get(cfg.method, {}), **cfg.el}
    return d


def run(cfg: RunConfig) -> dict:
    """Execute one analysis and write ``curve.csv`` and ``manifest.json``."""
    if cfg.input is None:
        raise ConfigError("an input CSV is required (--input)")
    t0 = time.perf_counter()
    ing = IngestConfig(cfg.y1, cfg.y2, tuple(cfg.covariates), cfg.bins, cfg.pseudo)
    g = ingest_csv(cfg.input, ing)
    t1 = time.perf_counter()
    grid = _grid(str(cfg.grid), g.x)
    curve = _fit(cfg, g, grid)
    t2 = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_curve_csv(curve, out / "curve.csv", cfg.covariates)
    manifest = {
        "version": __version__,
        "config": _effective(cfg),
        "seed": cfg.seed,
        "input": {"levels": int(g.k), **g.meta},
        "warnings": list(curve.warnings),
        "timings": {"ingest_seconds": t1 - t0, "fit_seconds": t2 - t1},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# bench


def bench(args) -> dict:
    if args.scenario == "twocov":
        scen = Scenario.twocov(reps=5)
        families = args.families or ["gaussian", "clayton"]
    else:
        scen = Scenario(args.scenario, functional=args.functional or "rho")
        families = args.families or ["gaussian", "clayton", "frank", "gumbel"]
    if args.functional and args.scenario == "twocov" and args.functional != "tau":
        raise ConfigError("the two-covariate scenario is defined for tau")
    seed = args.seed if args.seed is not None else _default_seed()
    report = run_benchmark(scen, args.method or list(METHODS), seed, args.scale, families, args.parallel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "report.csv")
    report.to_json(out / "report.json")
    (out / "table.csv").write_text(report.table())
    return report.metadata


# ---------------------------------------------------------------------------
# argument handling


_EXIT = (
    (ConfigError, 2),
    (DataError, 3),
    (InsufficientDataError, 3),
    (DegenerateWeightsError, 3),
    (NumericError, 4),
    (EstimationError, 4),
    (DomainError, 2),
    (OSError, 3),
)


def _exit_code(exc: BaseException) -> int:
    for cls, code in _EXIT:
        if isinstance(exc, cls):
            return code
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="condcop", description="Posterior curves for covariate-dependent copula dependence.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="analyse a CSV of paired observations")
    r.add_argument("--config", help="YAML or JSON file with run settings; flags override it")
    r.add_argument("--method", choices=RUN_METHODS)
    r.add_argument("--functional", choices=("rho", "tau"))
    r.add_argument("--input", help="CSV with a header row")
    r.add_argument("--y", nargs=2, metavar=("Y1", "Y2"), help="names of the paired columns (default y1 y2)")
    r.add_argument("--covariates", help="comma-separated covariate column names")
    r.add_argument("--bins", type=int, help="quantile bins per covariate (default: distinct values)")
    r.add_argument("--grid", help="'levels' or a number of equispaced points")
    r.add_argument("--seed", type=int, help=f"random seed (default: ${SEED_ENV} or 0)")
    r.add_argument("--out", help="output directory")
    r.add_argument("--parallel", type=int, default=1, help="accepted for symmetry with bench; runs are sequential")
    r.add_argument("--scale", help="ignored by run")

    b = sub.add_parser("bench", help="simulation benchmark")
    b.add_argument("--scenario", choices=("linear08", "sine", "twocov"), default="linear08")
    b.add_argument("--method", action="append", help=f"repeatable; default all of {', '.join(METHODS)}")
    b.add_argument("--families", nargs="+", help="copula families (default: all four, or gaussian clayton for twocov)")
    b.add_argument("--functional", choices=("rho", "tau"))
    b.add_argument("--scale", default="desk", help="smoke, desk, full or 'reps=..,k=..,n=..'")
    b.add_argument("--seed", type=int)
    b.add_argument("--parallel", type=int, default=1, help="worker processes")
    b.add_argument("--out", default="condcop-bench")
    return p


def _run_config(args) -> RunConfig:
    data = _load_file(args.config) if args.config else {}
    _check_keys(data, RunConfig)
    if "seed" not in data:
        data["seed"] = _default_seed()
    overrides = {
        "method": args.method,
        "functional": args.functional,
        "input": args.input,
        "covariates": args.covariates,
        "bins": args.bins,
        "grid": args.grid,
        "seed": args.seed,
        "out": args.out,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.y:
        data["y1"], data["y2"] = args.y
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            run(_run_config(args))
        else:
            bench(args)
    except Exception as exc:  # mapped to exit codes below
        code = _exit_code(exc)
        if code == 1:
            raise
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(json.dumps(err), file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
