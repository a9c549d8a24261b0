"""Simulation scenarios, scoring and the benchmark driver.

Three truths are available: ``linear08`` (phi(x) = 0.8x - 2 on (2, 5)),
``sine`` (phi(x) = sin x on (-5, 5)) and ``twocov``
(tau = 0.7 + 0.15 sin(sqrt(10) (x1 + 3 x2)) on the unit square).  Each
repetition draws ``n_per_level`` copula pairs at every covariate level and
each method returns a :class:`PosteriorCurve` on the levels.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .copulas import Family, feasible_range, functional_to_theta, sample_copula
from .curve import PosteriorCurve
from .dependence import (
    GroupedSample,
    WeightScheme,
    conditional_pseudo_observations,
    unconditional_estimates,
)
from .el import (
    CalibrationDesign,
    el_predict_curve,
    linearised_el_posterior,
    localized_el_curve,
)
from .errors import CondCopError, ConfigError, DataError
from .gp import GPModelConfig, fit_gp
from .splines import SplineConfig, fit_splines

__all__ = [
    "Scenario",
    "Scale",
    "METHODS",
    "generate_scenario",
    "imse",
    "per_point_mse",
    "ci_metrics",
    "run_method",
    "BenchReport",
    "run_benchmark",
]

METHODS = ("gp", "bayes-splines", "el-local", "el-linear")

# targets are kept this far inside the attainable range
_EDGE = 0.99
_POSITIVE_FLOOR = {Family.CLAYTON: 0.01, Family.GUMBEL: 0.0}


def _truth_linear08(x):
    return 0.8 * x[:, 0] - 2.0


def _truth_sine(x):
    return np.sin(x[:, 0])


def _truth_twocov(x):
    return 0.7 + 0.15 * np.sin(math.sqrt(10.0) * (x[:, 0] + 3.0 * x[:, 1]))


_TRUTHS = {
    "linear08": (_truth_linear08, ((2.0, 5.0),)),
    "sine": (_truth_sine, ((-5.0, 5.0),)),
    "twocov": (_truth_twocov, ((0.0, 1.0), (0.0, 1.0))),
}


@dataclass(frozen=True)
class Scenario:
    """A simulation design.

    ``k`` is the number of levels per covariate axis: the two-covariate
    design uses a k x k grid.  Levels sit at the midpoints of k equal cells
    of each covariate range, i.e. the equispaced quantiles of the uniform
    covariate distribution.
    """

    name: str = "linear08"
    family: str = "gaussian"
    functional: str = "rho"
    k: int = 20
    n_per_level: int = 100
    reps: int = 10

    def __post_init__(self):
        name = str(self.name).lower()
        if name not in _TRUTHS:
            raise ConfigError(f"unknown scenario {self.name!r}; choose from {sorted(_TRUTHS)}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "family", Family.parse(self.family).value)
        if self.functional not in ("rho", "tau"):
            raise ConfigError(f"unknown functional {self.functional!r}")
        if self.k < 2 or self.n_per_level < 2 or self.reps < 1:
            raise ConfigError("need k >= 2, n_per_level >= 2 and reps >= 1")

    @classmethod
    def twocov(cls, family: str = "gaussian", reps: int = 5) -> Scenario:
        return cls("twocov", family, "tau", k=10, n_per_level=10, reps=reps)

    @property
    def p(self) -> int:
        return len(_TRUTHS[self.name][1])

    def levels(self) -> np.ndarray:
        ranges = _TRUTHS[self.name][1]
        axes = [a + (b - a) * (np.arange(self.k) + 0.5) / self.k for a, b in ranges]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def raw_truths(self) -> np.ndarray:
        return _TRUTHS[self.name][0](self.levels())

    def truths(self) -> tuple[np.ndarray, np.ndarray]:
        """Attainable targets per level and a mask of the adjusted ones."""
        raw = self.raw_truths()
        fam = Family(self.family)
        lo, _ = feasible_range(fam, self.functional)
        lower = max(-_EDGE, _POSITIVE_FLOOR.get(fam, lo))
        t = np.clip(raw, lower, _EDGE)
        return t, np.abs(t - raw) > 0


@dataclass(frozen=True)
class Scale:
    """Multiplicative factors applied to a scenario's reps, k and n."""

    reps: float = 1.0
    k: float = 1.0
    n: float = 1.0

    PRESETS = {"smoke": (0.1, 0.5, 0.5), "desk": (1.0, 1.0, 1.0), "full": (5.0, 1.0, 1.0)}

    @classmethod
    def parse(cls, value) -> Scale:
        if value is None:
            return cls()
        if isinstance(value, Scale):
            return value
        if isinstance(value, dict):
            return cls(**value)
        text = str(value).strip().lower()
        if text in cls.PRESETS:
            return cls(*cls.PRESETS[text])
        try:
            parts = dict(item.split("=") for item in text.split(","))
            return cls(**{key.strip(): float(v) for key, v in parts.items()})
        except (ValueError, TypeError):
            raise ConfigError(f"scale must be one of {sorted(cls.PRESETS)} or 'reps=..,k=..,n=..'") from None

    def apply(self, s: Scenario) -> Scenario:
        return replace(
            s,
            reps=max(1, round(s.reps * self.reps)),
            k=max(2, round(s.k * self.k)),
            n_per_level=max(2, round(s.n_per_level * self.n)),
        )


def generate_scenario(s: Scenario, seed=None) -> tuple[GroupedSample, np.ndarray]:
    """One repetition: copula pairs at every level and the level targets."""
    truth, adjusted = s.truths()
    rng = np.random.default_rng(seed)
    samples = [sample_copula(functional_to_theta(s.family, t, s.functional), s.n_per_level, rng) for t in truth]
    g = GroupedSample(s.levels(), samples, {"adjusted_levels": int(adjusted.sum())})
    return g, truth


def _as_2d(est, truths):
    est = np.atleast_2d(np.asarray(est, dtype=float))
    t = np.asarray(truths, dtype=float)
    if t.ndim == 1 and t.shape[0] == est.shape[1]:
        t = np.broadcast_to(t, est.shape)
    if t.shape != est.shape:
        raise DataError(f"estimates {est.shape} and truths {t.shape} do not match")
    return est, t


def imse(estimates, truths) -> float:
    """Sum over repetitions and levels of squared errors.

    ``estimates`` is (reps, k); ``truths`` is (k,) or (reps, k).
    """
    est, t = _as_2d(estimates, truths)
    return float(np.sum((est - t) ** 2))


def per_point_mse(estimates, truths) -> float:
    """:func:`imse` divided by reps * k."""
    est, t = _as_2d(estimates, truths)
    return imse(est, t) / est.size


def ci_metrics(curves, truths) -> tuple[float, float]:
    """Average interval length and coverage over repetitions and levels."""
    lower = np.array([c.lower for c in curves])
    upper = np.array([c.upper for c in curves])
    lower, t = _as_2d(lower, truths)
    upper, _ = _as_2d(upper, truths)
    return float(np.mean(upper - lower)), float(np.mean((lower <= t) & (t <= upper)))


# ---------------------------------------------------------------------------
# methods


def _el_scheme(method: str, p: int) -> WeightScheme:
    # "el-local" or "el-local-<nw|ll>-<kernel>"
    parts = method.split("-")[2:]
    kind = parts[0] if parts else ("ll" if p == 1 else "nw")
    kernel = parts[1] if len(parts) > 1 else "triweight"
    return WeightScheme(kind, kernel)


def run_method(method: str, g: GroupedSample, functional: str, seed=None, options: dict | None = None) -> PosteriorCurve:
    """Fit one method to one grouped sample; the grid is the level set."""
    opts = options or {}
    grid = g.x
    if method == "gp":
        return fit_gp(unconditional_estimates(g, functional), grid, opts.get("gp", GPModelConfig()), seed)
    if method == "bayes-splines":
        cfg = opts.get("splines", SplineConfig())
        return fit_splines(unconditional_estimates(g, functional), grid, cfg, seed)
    if method == "el-linear":
        series = unconditional_estimates(g, functional)
        design = CalibrationDesign.taylor(series.x, opts.get("taylor_degree", 3))
        wbs = linearised_el_posterior(series, design, G=opts.get("G", 5000), seed=seed)
        return el_predict_curve(wbs, design, grid)
    if method.startswith("el-local"):
        ps = g.pooled()
        u_hat = conditional_pseudo_observations(ps)
        return localized_el_curve(ps, _el_scheme(method, g.x.shape[1]), grid, functional, u_hat=u_hat)
    raise ConfigError(f"unknown method {method!r}; choose from {METHODS} or el-local-<nw|ll>-<kernel>")


# ---------------------------------------------------------------------------
# driver


@dataclass
class BenchReport:
    """One row per (family, method) cell plus run metadata."""

    rows: list
    metadata: dict = field(default_factory=dict)

    COLUMNS = (
        "scenario",
        "functional",
        "family",
        "method",
        "reps_ok",
        "reps_failed",
        "imse_sum",
        "imse_per_point",
        "ci_length",
        "ci_coverage",
        "seconds",
    )

    def row(self, family: str, method: str) -> dict:
        for r in self.rows:
            if r["family"] == family and r["method"] == method:
                return r
        raise KeyError((family, method))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.COLUMNS, extrasaction="ignore", lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({key: _fmt(r[key]) for key in self.COLUMNS})

    def to_json(self, path=None, timings: bool = True) -> str:
        rows = self.rows if timings else [{k: v for k, v in r.items() if k != "seconds"} for r in self.rows]
        meta = self.metadata if timings else {k: v for k, v in self.metadata.items() if k != "seconds"}
        text = json.dumps({"rows": rows, "metadata": meta}, indent=2, sort_keys=True, default=_json_default)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def table(self) -> str:
        """Method x metric rows with one column per family."""
        fams = list(dict.fromkeys(r["family"] for r in self.rows))
        methods = list(dict.fromkeys(r["method"] for r in self.rows))
        lines = ["method,metric," + ",".join(fams)]
        for m in methods:
            for key, label in (("imse_per_point", "IMSE"), ("ci_length", "CI length"), ("ci_coverage", "CI coverage")):
                vals = [_fmt(self.row(f, m)[key], 3) for f in fams]
                lines.append(f"{m},{label}," + ",".join(vals))
        return "\n".join(lines) + "\n"


def _fmt(v, digits: int = 6):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.{digits}f}"
    return v


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _one_rep(args):
    scenario, methods, fam_idx, rep, seed, options = args
    data_seed = np.random.SeedSequence(seed, spawn_key=(fam_idx, rep, 0))
    g, truth = generate_scenario(scenario, data_seed)
    out = {}
    for mi, m in enumerate(methods):
        t0 = time.perf_counter()
        try:
            curve = run_method(m, g, scenario.functional, np.random.SeedSequence(seed, spawn_key=(fam_idx, rep, mi + 1)), options)
            out[m] = (curve.mean, curve.lower, curve.upper, None, time.perf_counter() - t0)
        except (CondCopError, ArithmeticError, np.linalg.LinAlgError) as exc:
            out[m] = (None, None, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0)
    return fam_idx, rep, truth, out


def run_benchmark(
    scenario: Scenario,
    methods=METHODS,
    seed: int = 0,
    scale=None,
    families=None,
    n_jobs: int = 1,
    options: dict | None = None,
) -> BenchReport:
    """Cross ``methods`` with ``families`` over the scenario's repetitions.

    Seeds for data and for every method are derived from ``seed`` and the
    (family, repetition, method) position, so results do not depend on
    ``n_jobs``.  Failures are recorded per cell and the run continues.
    """
    methods = list(methods)
    if not methods:
        raise ConfigError("at least one method is required")
    for m in methods:
        if m not in METHODS and not m.startswith("el-local-"):
            raise ConfigError(f"unknown method {m!r}; choose from {METHODS} or el-local-<nw|ll>-<kernel>")
    sc = Scale.parse(scale).apply(scenario)
    fams = [Family.parse(f).value for f in (families or [sc.family])]
    scen = [replace(sc, family=f) for f in fams]
    tasks = [(scen[i], methods, i, r, int(seed), options) for i in range(len(fams)) for r in range(sc.reps)]
    t0 = time.perf_counter()
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_one_rep, tasks))
    else:
        results = [_one_rep(t) for t in tasks]
    rows = []
    adjusted = {}
    for i, f in enumerate(fams):
        truth, mask = scen[i].truths()
        adjusted[f] = int(mask.sum())
        res = sorted((r for r in results if r[0] == i), key=lambda r: r[1])
        for m in methods:
            ok = [r[3][m] for r in res if r[3][m][3] is None]
            errors = [r[3][m][3] for r in res if r[3][m][3] is not None]
            secs = float(sum(r[3][m][4] for r in res))
            row = {
                "scenario": sc.name,
                "functional": sc.functional,
                "family": f,
                "method": m,
                "reps_ok": len(ok),
                "reps_failed": len(errors),
                "errors": errors,
                "seconds": secs,
            }
            if ok:
                est = np.array([o[0] for o in ok])
                curves = [PosteriorCurve(sc.levels(), o[0], o[1], o[2], np.arctanh(np.clip(o[0], -1 + 1e-12, 1 - 1e-12))) for o in ok]
                length, cover = ci_metrics(curves, truth)
                row.update(imse_sum=imse(est, truth), imse_per_point=per_point_mse(est, truth), ci_length=length, ci_coverage=cover)
            else:
                row.update(imse_sum=math.nan, imse_per_point=math.nan, ci_length=math.nan, ci_coverage=math.nan)
            rows.append(row)
    meta = {
        "scenario": asdict(sc),
        "families": fams,
        "methods": methods,
        "seed": int(seed),
        "scale": asdict(Scale.parse(scale)),
        "adjusted_levels": adjusted,
        "n_jobs": int(n_jobs),
        "seconds": time.perf_counter() - t0,
    }
    return BenchReport(rows, meta)
