"""CSV ingestion of paired observations and export of posterior curves."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .copulas import pseudo_observe
from .curve import PosteriorCurve
from .dependence import GroupedSample
from .errors import ConfigError, DataError, InsufficientDataError

__all__ = ["IngestConfig", "ingest_csv", "write_curve_csv", "read_curve_csv"]

_MISSING = {"", "na", "nan", "null", "none"}


@dataclass(frozen=True)
class IngestConfig:
    """How rows become covariate levels.

    ``bins=None`` groups rows by distinct covariate values; an integer
    quantile-bins each covariate into that many classes (level value = mean
    of the covariate within the class).  ``pseudo`` chooses whether ranks
    are taken over the whole file or within each level.
    """

    y1: str = "y1"
    y2: str = "y2"
    covariates: tuple = ("x",)
    bins: int | None = None
    pseudo: str = "global"

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if not self.covariates:
            raise ConfigError("at least one covariate column is required")
        if self.bins is not None and int(self.bins) < 2:
            raise ConfigError("bins must be at least 2")
        if self.pseudo not in ("global", "level"):
            raise ConfigError("pseudo must be 'global' or 'level'")


def _read_table(path, columns):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}; header has {header}")
        idx = [header.index(c) for c in columns]
        rows, dropped = [], 0
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not cell.strip() for cell in rec):
                continue
            cells = [rec[i].strip() if i < len(rec) else "" for i in idx]
            if any(c.lower() in _MISSING for c in cells):
                dropped += 1
                continue
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                bad = next(j for j, c in enumerate(cells) if not _is_float(c))
                raise DataError(f"{path}: non-numeric value {cells[bad]!r} at row {lineno}, column {columns[bad]!r}") from None
            if not all(math.isfinite(v) for v in vals):
                dropped += 1
                continue
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, len(columns)), dropped


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _bin_codes(x: np.ndarray, bins: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.quantile(x, np.linspace(0.0, 1.0, bins + 1))
    codes = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
    # collapse empty classes created by ties in the edges
    _, codes = np.unique(codes, return_inverse=True)
    centers = np.array([x[codes == c].mean() for c in range(codes.max() + 1)])
    return codes, centers


def ingest_csv(path, cfg: IngestConfig | None = None) -> GroupedSample:
    """Read ``y1``, ``y2`` and covariate columns into a GroupedSample.

    Rows with a missing or non-finite cell are dropped and counted; levels
    left with a single row are dropped as well.  ``meta`` records both
    counts and the number of rows used.
    """
    cfg = cfg or IngestConfig()
    cols = [cfg.y1, cfg.y2, *cfg.covariates]
    data, dropped = _read_table(path, cols)
    if data.shape[0] < 2:
        raise InsufficientDataError(f"{path}: need at least two complete rows, found {data.shape[0]}")
    y, X = data[:, :2], data[:, 2:]
    if cfg.bins is not None:
        levels = np.empty_like(X)
        for j in range(X.shape[1]):
            codes, centers = _bin_codes(X[:, j], int(cfg.bins))
            levels[:, j] = centers[codes]
        X = levels
    keys, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    if cfg.pseudo == "global":
        y = pseudo_observe(y)
    xs, samples, small = [], [], 0
    for j in range(keys.shape[0]):
        s = y[inverse == j]
        if s.shape[0] < 2:
            small += s.shape[0]
            continue
        xs.append(keys[j])
        samples.append(pseudo_observe(s) if cfg.pseudo == "level" else s)
    if not samples:
        raise InsufficientDataError(f"{path}: no covariate level has two or more rows")
    meta = {"rows_used": int(data.shape[0] - small), "rows_dropped": int(dropped), "singleton_rows_dropped": int(small)}
    return GroupedSample(np.array(xs), samples, meta)


_CURVE_TAIL = ("fisher_mean", "phi_mean", "lower", "upper")


def write_curve_csv(curve: PosteriorCurve, path, names=None) -> None:
    """One row per grid point; floats are written with full precision."""
    grid = curve.grid
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(grid.shape[1])]
    if len(names) != grid.shape[1]:
        raise DataError("one column name per covariate is required")
    cols = [*grid.T, curve.fisher_mean, curve.mean, curve.lower, curve.upper]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, *_CURVE_TAIL])
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


def read_curve_csv(path, level: float = 0.95) -> PosteriorCurve:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = np.array([[float(v) for v in r] for r in reader if r], dtype=float)
    if tuple(header[-4:]) != _CURVE_TAIL:
        raise DataError(f"{path}: not a curve file (header {header})")
    p = len(header) - 4
    body = body.reshape(-1, len(header))
    return PosteriorCurve(body[:, :p], body[:, p + 1], body[:, p + 2], body[:, p + 3], body[:, p], level)
