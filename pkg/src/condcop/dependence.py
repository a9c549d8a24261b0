"""Kernel smoothing weights, the empirical conditional copula and the
conditional / per-level estimators of Kendall's tau and Spearman's rho.

The per-level estimates are mapped to the real line with the Fisher
transform; the resulting :class:`FisherSeries` is the common input of the
Gaussian-process, linearised empirical-likelihood and spline routes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.stats import rankdata

from .copulas import kendall_tau, spearman_rho
from .errors import (
    DataError,
    DegenerateWeightsError,
    DomainError,
    InsufficientDataError,
)

__all__ = [
    "Kernel",
    "WeightScheme",
    "GroupedSample",
    "PooledSample",
    "FisherSeries",
    "fisher_transform",
    "inverse_fisher",
    "kernel_eval",
    "smoothing_weights",
    "product_nw_weights",
    "scheme_weights",
    "default_bandwidth",
    "conditional_pseudo_observations",
    "empirical_conditional_copula",
    "conditional_tau_hat",
    "conditional_rho_hat",
    "unconditional_estimates",
]

FunctionalName = Literal["rho", "tau"]


def _check_functional(functional: str) -> str:
    f = str(functional).lower()
    if f not in ("rho", "tau"):
        raise DomainError(f"functional must be 'rho' or 'tau', got {functional!r}")
    return f


# ---------------------------------------------------------------------------
# Fisher transform


def fisher_transform(phi):
    """0.5 * log((1 + phi) / (1 - phi)); requires |phi| < 1."""
    phi_arr = np.asarray(phi, dtype=float)
    if np.any(~(np.abs(phi_arr) < 1.0)):
        raise DomainError("Fisher transform needs |phi| < 1")
    out = np.arctanh(phi_arr)
    return float(out) if out.ndim == 0 else out


def inverse_fisher(w):
    out = np.tanh(np.asarray(w, dtype=float))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# kernels and weights


class Kernel(str, enum.Enum):
    TRIWEIGHT = "triweight"
    GAUSSIAN = "gaussian"


_TRIWEIGHT_C = 35.0 / 32.0
_GAUSS_C = 1.0 / math.sqrt(2.0 * math.pi)


def kernel_eval(kind, x):
    kind = Kernel(kind)
    x = np.asarray(x, dtype=float)
    if kind is Kernel.TRIWEIGHT:
        out = np.where(np.abs(x) < 1.0, _TRIWEIGHT_C * (1.0 - x * x) ** 3, 0.0)
    else:
        out = _GAUSS_C * np.exp(-0.5 * x * x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WeightScheme:
    """How observations are smoothed over covariate space.

    ``bandwidth`` is a scalar or one value per covariate dimension; ``None``
    means the rule-of-thumb default computed from the data.  Local-linear
    weights are only defined for a single covariate.
    """

    kind: Literal["nw", "ll"] = "nw"
    kernel: Kernel = Kernel.GAUSSIAN
    bandwidth: float | tuple[float, ...] | None = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        aliases = {"nadarayawatson": "nw", "nadaraya-watson": "nw", "locallinear": "ll", "local-linear": "ll"}
        kind = aliases.get(kind, kind)
        if kind not in ("nw", "ll"):
            raise DomainError(f"unknown weight kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "kernel", Kernel(self.kernel))
        if self.bandwidth is not None:
            h = np.atleast_1d(np.asarray(self.bandwidth, dtype=float))
            if np.any(~(h > 0)):
                raise DomainError("bandwidths must be strictly positive")
            object.__setattr__(self, "bandwidth", tuple(float(v) for v in h))


def default_bandwidth(X) -> np.ndarray:
    """1.06 * sd * n^(-1/5), one value per covariate column."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    sd = X.std(axis=0, ddof=1) if n > 1 else np.ones(X.shape[1])
    sd = np.where(sd > 0, sd, 1.0)
    return 1.06 * sd * n ** (-0.2)


def smoothing_weights(scheme: WeightScheme, X, x: float, bandwidth: float | None = None) -> np.ndarray:
    """Nadaraya-Watson or local-linear weights of the points ``X`` at ``x``."""
    X = np.asarray(X, dtype=float).ravel()
    n = X.size
    if bandwidth is None:
        bandwidth = scheme.bandwidth[0] if scheme.bandwidth is not None else float(default_bandwidth(X)[0])
    h = float(bandwidth)
    d = (X - float(x)) / h
    k = kernel_eval(scheme.kernel, d)
    total = k.sum()
    if not total > 0:
        raise DegenerateWeightsError(f"no kernel mass at x={x!r} (bandwidth {h:g})")
    if scheme.kind == "nw":
        return k / total
    s0 = total / (n * h)
    s1 = np.sum(d * k) / (n * h)
    s2 = np.sum(d * d * k) / (n * h)
    den = s0 * s2 - s1 * s1
    if den <= 1e-12 * s0 * s0:
        # every point with kernel mass sits at the same covariate value:
        # the local slope is unidentified and local-linear reduces to NW
        return k / total
    return k * (s2 - d * s1) / (n * h * den)


def product_nw_weights(kernel, X, x, h) -> np.ndarray:
    """Nadaraya-Watson weights with a product kernel over p covariates."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = np.broadcast_to(np.atleast_1d(np.asarray(h, dtype=float)), x.shape)
    if np.any(~(h > 0)):
        raise DomainError("bandwidths must be strictly positive")
    k = np.prod(kernel_eval(kernel, (X - x) / h), axis=1)
    total = k.sum()
    if not total > 0:
        raise DegenerateWeightsError(f"no kernel mass at x={x.tolist()!r}")
    return k / total


def scheme_weights(scheme: WeightScheme, X, x) -> np.ndarray:
    """Dispatch to the univariate or product-kernel weights."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    h = np.asarray(scheme.bandwidth) if scheme.bandwidth is not None else default_bandwidth(X)
    h = np.broadcast_to(np.atleast_1d(h), (X.shape[1],))
    if X.shape[1] == 1:
        return smoothing_weights(scheme, X[:, 0], float(np.ravel(x)[0]), bandwidth=float(h[0]))
    if scheme.kind != "nw":
        raise DomainError("local-linear weights are implemented for one covariate only")
    return product_nw_weights(scheme.kernel, X, x, h)


# ---------------------------------------------------------------------------
# samples


@dataclass
class GroupedSample:
    """Replicated pairs at covariate levels.

    ``x`` has shape (k, p); ``samples[l]`` is an (n_l, 2) array of pairs
    observed at ``x[l]``.  Duplicate covariate rows are merged.
    """

    x: np.ndarray
    samples: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if len(self.samples) != x.shape[0]:
            raise DataError("one sample per level is required")
        merged: dict[tuple, list] = {}
        for row, s in zip(x, self.samples):
            s = np.asarray(s, dtype=float).reshape(-1, 2)
            merged.setdefault(tuple(row.tolist()), []).append(s)
        keys = list(merged)
        self.x = np.array(keys, dtype=float).reshape(len(keys), x.shape[1])
        self.samples = [np.vstack(merged[k]) for k in keys]

    @property
    def k(self) -> int:
        return self.x.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return np.array([s.shape[0] for s in self.samples])

    def pooled(self) -> PooledSample:
        X = np.repeat(self.x, self.counts, axis=0)
        y = np.vstack(self.samples)
        return PooledSample(y[:, 0], y[:, 1], X)


@dataclass
class PooledSample:
    """Pooled (y1, y2, X) triples; X has shape (n, p)."""

    y1: np.ndarray
    y2: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.y1 = np.asarray(self.y1, dtype=float).ravel()
        self.y2 = np.asarray(self.y2, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        self.X = X[:, None] if X.ndim == 1 else X
        if not (self.y1.size == self.y2.size == self.X.shape[0]):
            raise DataError("y1, y2 and X must have the same number of rows")
        if self.y1.size < 2:
            raise InsufficientDataError("need at least two observations")

    @property
    def n(self) -> int:
        return self.y1.size


# ---------------------------------------------------------------------------
# conditional estimators


def _mid_ranks(v: np.ndarray) -> np.ndarray:
    return rankdata(v, method="average")


def conditional_pseudo_observations(sample: PooledSample, bandwidths=None, kernel=Kernel.GAUSSIAN) -> np.ndarray:
    """Conditional probability integral transforms U_hat (n, 2).

    With replicated covariate levels (every distinct X row seen at least
    twice) these are within-level mid-ranks / (n_l + 1).  Otherwise each
    margin is a kernel-weighted conditional ECDF evaluated at its own
    covariate value, with one bandwidth per margin.
    """
    X = sample.X
    y = np.column_stack([sample.y1, sample.y2])
    _, inverse, counts = np.unique(X, axis=0, return_inverse=True, return_counts=True)
    inverse = np.ravel(inverse)
    if np.all(counts >= 2):
        u = np.empty_like(y)
        for g in range(counts.size):
            idx = np.flatnonzero(inverse == g)
            for j in range(2):
                u[idx, j] = _mid_ranks(y[idx, j]) / (idx.size + 1.0)
        return u

    h = default_bandwidth(X) if bandwidths is None else np.atleast_1d(np.asarray(bandwidths, dtype=float))
    hs = [np.broadcast_to(h, (X.shape[1],)), np.broadcast_to(h, (X.shape[1],))]
    if h.ndim == 2:
        hs = [h[0], h[1]]
    u = np.empty_like(y)
    for j in range(2):
        K = np.prod(kernel_eval(kernel, (X[:, None, :] - X[None, :, :]) / hs[j]), axis=2)
        K /= K.sum(axis=1, keepdims=True)
        below = (y[None, :, j] <= y[:, None, j]).astype(float)
        n = y.shape[0]
        # rescale by n/(n+1) to keep values strictly inside (0, 1)
        u[:, j] = np.sum(K * below, axis=1) * n / (n + 1.0)
    return u


def empirical_conditional_copula(sample: PooledSample, scheme: WeightScheme, x, y1, y2) -> float:
    """Weighted indicator sum  sum_i w_i(x) 1[Y1_i <= y1, Y2_i <= y2]."""
    w = scheme_weights(scheme, sample.X, x)
    ind = (sample.y1 <= y1) & (sample.y2 <= y2)
    return float(np.sum(w * ind))


def conditional_tau_hat(sample: PooledSample, scheme: WeightScheme, x) -> float:
    w = scheme_weights(scheme, sample.X, x)
    denom = 1.0 - np.sum(w * w)
    if denom <= 1e-12:
        raise DegenerateWeightsError("a single observation carries all the weight")
    conc = (sample.y1[:, None] < sample.y1[None, :]) & (sample.y2[:, None] < sample.y2[None, :])
    s = w @ conc @ w
    return float(np.clip(-1.0 + 4.0 / denom * s, -1.0, 1.0))


def conditional_rho_hat(sample: PooledSample, scheme: WeightScheme, x, u_hat=None) -> float:
    """12 * sum_i w_i (1 - U1_i)(1 - U2_i) - 3, clipped to [-1, 1].

    ``u_hat`` defaults to :func:`conditional_pseudo_observations`.
    """
    if u_hat is None:
        u_hat = conditional_pseudo_observations(sample)
    w = scheme_weights(scheme, sample.X, x)
    val = 12.0 * np.sum(w * (1.0 - u_hat[:, 0]) * (1.0 - u_hat[:, 1])) - 3.0
    return float(np.clip(val, -1.0, 1.0))


# ---------------------------------------------------------------------------
# per-level series


@dataclass(frozen=True)
class FisherSeries:
    """Fisher-scale per-level estimates W_l with replication counts n_l."""

    x: np.ndarray
    w: np.ndarray
    n: np.ndarray
    functional: str = "rho"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        w = np.asarray(self.w, dtype=float).ravel()
        n = np.asarray(self.n, dtype=float).ravel()
        if not (x.shape[0] == w.size == n.size):
            raise DataError("x, w and n must have matching lengths")
        if np.any(n < 2):
            raise InsufficientDataError("every level needs n_l >= 2")
        if not np.all(np.isfinite(w)):
            raise DomainError("Fisher-scale values must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "functional", _check_functional(self.functional))

    @property
    def k(self) -> int:
        return self.w.size

    def sorted(self) -> FisherSeries:
        """Copy with levels in lexicographic covariate order."""
        order = np.lexsort(self.x.T[::-1])
        return FisherSeries(self.x[order], self.w[order], self.n[order], self.functional)


def unconditional_estimates(g: GroupedSample, functional: FunctionalName = "rho") -> FisherSeries:
    """Per-level sample tau-b or Spearman rho, clipped and Fisher transformed.

    Estimates are clipped to [-1 + d, 1 - d] with d = 1 / (2 n_l) so the
    transform stays finite.
    """
    functional = _check_functional(functional)
    est = kendall_tau if functional == "tau" else spearman_rho
    ws, ns = [], []
    for s in g.samples:
        n_l = s.shape[0]
        if n_l < 2:
            raise InsufficientDataError("every level needs at least two pairs")
        phi = est(s)
        if not math.isfinite(phi):
            phi = 0.0  # a constant margin carries no rank information
        d = 1.0 / (2.0 * n_l)
        ws.append(fisher_transform(min(max(phi, -1.0 + d), 1.0 - d)))
        ns.append(n_l)
    return FisherSeries(g.x, np.array(ws), np.array(ns), functional)
