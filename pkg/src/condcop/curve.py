"""Posterior summaries of a dependence curve on an evaluation grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["PosteriorCurve", "weighted_quantile", "curve_from_fisher_samples"]


@dataclass
class PosteriorCurve:
    """Pointwise posterior summary of the functional on ``grid``.

    ``mean`` is the back-transformed Fisher-scale mean, ``lower``/``upper``
    are equal-tailed credible bounds at ``level``.
    """

    grid: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    fisher_mean: np.ndarray
    level: float = 0.95
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        self.grid = g[:, None] if g.ndim == 1 else g
        for name in ("mean", "lower", "upper", "fisher_mean"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).ravel())

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def weighted_quantile(samples: np.ndarray, probs, weights=None) -> np.ndarray:
    """Quantiles along axis 0 of ``samples`` (S, m) under sample weights.

    Uses the inverse of the weighted empirical CDF (left-continuous step).
    """
    samples = np.asarray(samples, dtype=float)
    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    if weights is None:
        return np.quantile(samples, probs, axis=0, method="inverted_cdf")
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    order = np.argsort(samples, axis=0, kind="stable")
    sorted_s = np.take_along_axis(samples, order, axis=0)
    cw = np.cumsum(w[order], axis=0)
    out = np.empty((probs.size, samples.shape[1]))
    for j in range(samples.shape[1]):
        # tolerance guards against cumulative rounding just below p
        idx = np.searchsorted(cw[:, j], probs - 1e-12, side="left")
        idx = np.minimum(idx, samples.shape[0] - 1)
        out[:, j] = sorted_s[idx, j]
    return out


def curve_from_fisher_samples(grid, z: np.ndarray, level: float = 0.95, weights=None) -> PosteriorCurve:
    """Summarise Fisher-scale draws ``z`` (S, m) into a PosteriorCurve."""
    z = np.asarray(z, dtype=float)
    if weights is None:
        zbar = z.mean(axis=0)
    else:
        w = np.asarray(weights, dtype=float)
        zbar = (w / w.sum()) @ z
    a = (1.0 - level) / 2.0
    lo, hi = np.tanh(weighted_quantile(z, [a, 1.0 - a], weights))
    mean = np.tanh(zbar)
    # a heavily skewed mixture can put tanh(mean) outside the quantiles
    lo = np.minimum(lo, mean)
    hi = np.maximum(hi, mean)
    return PosteriorCurve(grid, mean, lo, hi, zbar, level)
