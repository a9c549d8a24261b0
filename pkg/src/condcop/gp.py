"""Gaussian-process posterior for the Fisher-scale dependence curve.

Model: W_l = Z(x_l) + eps_l with Z ~ GP(g(x)'beta, sigma^2 K_xi) and
eps_l ~ N(0, lambda * sigma^2 / n_l).  beta (flat prior) and sigma^2
(inverse gamma) are integrated out analytically; the squared length-scales
xi and the noise ratio lambda are sampled by random-walk Metropolis on the
log scale.  Predictions redraw sigma^2, beta and the latent curve for every
retained (xi, lambda).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import linalg, special

from .curve import PosteriorCurve, curve_from_fisher_samples
from .dependence import FisherSeries
from .errors import ConfigError, DomainError, NumericError

__all__ = [
    "MHConfig",
    "GPModelConfig",
    "GPHyperDraws",
    "se_kernel",
    "basis_matrix",
    "integrated_loglik",
    "sample_hyper",
    "predict_curve",
    "fit_gp",
]


@dataclass(frozen=True)
class MHConfig:
    n_iter: int = 6000
    burn_in: int = 1000
    n_keep: int = 1000
    init_scale: float = 0.5
    adapt_every: int = 50

    def __post_init__(self):
        if self.n_iter <= self.burn_in:
            raise ConfigError("chain length must exceed burn-in")
        if self.n_keep < 1 or self.n_keep > self.n_iter - self.burn_in:
            raise ConfigError("n_keep must be between 1 and n_iter - burn_in")


@dataclass(frozen=True)
class GPModelConfig:
    """Prior and sampler settings.

    ``alpha`` and ``r`` parametrise the sigma^2 prior
    (sigma^2)^-(alpha+1) exp(-r / (2 sigma^2)); ``xi_bounds`` and
    ``lambda_bounds`` are the supports of the log-uniform priors.
    """

    basis: Literal["zero", "linear", "quadratic"] = "linear"
    alpha: float = 2.0
    r: float = 1.0
    xi_bounds: tuple[float, float] = (1e-3, 1e3)
    lambda_bounds: tuple[float, float] = (1e-3, 1e3)
    mh: MHConfig = field(default_factory=MHConfig)
    level: float = 0.95
    heteroscedastic: bool = False

    def __post_init__(self):
        if self.heteroscedastic:
            raise ConfigError(
                "the covariate-dependent noise variance extension is not implemented; "
                "set heteroscedastic=False"
            )
        if str(self.basis).lower() not in ("zero", "linear", "quadratic"):
            raise ConfigError(f"unknown basis {self.basis!r}")
        object.__setattr__(self, "basis", str(self.basis).lower())
        if not (self.alpha > 0 and self.r > 0):
            raise ConfigError("alpha and r must be positive")
        for lo, hi in (self.xi_bounds, self.lambda_bounds):
            if not (0 < lo < hi):
                raise ConfigError("prior bounds must be positive and ordered")
        if not 0 < self.level < 1:
            raise ConfigError("credible level must be in (0, 1)")


@dataclass(frozen=True)
class GPHyperDraws:
    xi: np.ndarray  # (G, p) squared length-scales
    lam: np.ndarray  # (G,)
    acceptance_rate: float
    proposal_scale: float = float("nan")


# ---------------------------------------------------------------------------
# building blocks


def se_kernel(x, x2, xi) -> np.ndarray | float:
    """exp(-0.5 * sum_d (x_d - x2_d)^2 / xi_d).

    Scalars or 1-D vectors give a scalar; (m, p) and (k, p) arrays give the
    (m, k) cross-covariance matrix.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(xi <= 0):
        raise DomainError("length-scales must be positive")
    a = np.asarray(x, dtype=float)
    b = np.asarray(x2, dtype=float)
    if a.ndim <= 1 and b.ndim <= 1:
        d = np.atleast_1d(a) - np.atleast_1d(b)
        return float(np.exp(-0.5 * np.sum(d * d / xi)))
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2 / xi).sum(axis=2)
    return np.exp(-0.5 * d2)


def basis_matrix(x, kind: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    if kind == "zero":
        return np.zeros((x.shape[0], 0))
    cols = [np.ones(x.shape[0]), *x.T]
    if kind == "quadratic":
        cols += list((x**2).T)
    return np.column_stack(cols)


def _cholesky(M: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(M, lower=True)
    except linalg.LinAlgError:
        pass
    jitter = 1e-8 * np.trace(M) / M.shape[0]
    try:
        return linalg.cholesky(M + jitter * np.eye(M.shape[0]), lower=True)
    except linalg.LinAlgError as exc:
        raise NumericError(f"covariance matrix not positive definite even with jitter {jitter:g}") from exc


@dataclass
class _Fit:
    """Quantities shared by the likelihood and the predictive draws."""

    L: np.ndarray
    A: np.ndarray  # L^-1 X
    b: np.ndarray  # L^-1 W
    H_chol: np.ndarray | None
    beta_hat: np.ndarray
    S2: float
    logdet_M: float
    logdet_H: float


def _factor(xi, lam, x, w, n, X) -> _Fit:
    K = se_kernel(x, x, xi)
    M = K + lam * np.diag(1.0 / n)
    L = _cholesky(M)
    b = linalg.solve_triangular(L, w, lower=True)
    logdet_M = 2.0 * np.sum(np.log(np.diag(L)))
    q = X.shape[1]
    if q == 0:
        return _Fit(L, X, b, None, np.zeros(0), float(b @ b), logdet_M, 0.0)
    A = linalg.solve_triangular(L, X, lower=True)
    Hc = _cholesky(A.T @ A)
    beta_hat = linalg.cho_solve((Hc, True), A.T @ b)
    resid = b - A @ beta_hat
    logdet_H = 2.0 * np.sum(np.log(np.diag(Hc)))
    return _Fit(L, A, b, Hc, beta_hat, float(resid @ resid), logdet_M, logdet_H)


def _check_series(series: FisherSeries, X: np.ndarray):
    k, q = X.shape
    if k <= q:
        raise DomainError(f"need more locations ({k}) than basis columns ({q})")


def integrated_loglik(xi, lam: float, series: FisherSeries, cfg: GPModelConfig | None = None) -> float:
    """log of the likelihood integrated over beta (flat) and sigma^2.

    The value is exact, constants included, for the likelihood
    sigma^-k |M|^-1/2 exp(-(W - X beta)' M^-1 (W - X beta) / (2 sigma^2))
    and the unnormalised prior (sigma^2)^-(alpha+1) exp(-r / (2 sigma^2)).
    """
    cfg = cfg or GPModelConfig()
    X = basis_matrix(series.x, cfg.basis)
    _check_series(series, X)
    return _loglik_from(xi, lam, series, X, cfg)


def _loglik_from(xi, lam, series, X, cfg) -> float:
    k, q = X.shape
    fit = _factor(xi, lam, series.x, series.w, series.n, X)
    a = 0.5 * (k - q) + cfg.alpha
    const = 0.5 * q * math.log(2.0 * math.pi) + special.gammaln(a) + a * math.log(2.0)
    return float(const - 0.5 * fit.logdet_M - 0.5 * fit.logdet_H - a * math.log(fit.S2 + cfg.r))


# ---------------------------------------------------------------------------
# hyperparameter sampling


def sample_hyper(series: FisherSeries, cfg: GPModelConfig | None = None, seed=None) -> GPHyperDraws:
    """Random-walk Metropolis on (log xi_1..p, log lambda).

    The proposal scale is adapted in batches during burn-in towards a
    20-40% acceptance rate and frozen afterwards.
    """
    cfg = cfg or GPModelConfig()
    series = series.sorted()
    X = basis_matrix(series.x, cfg.basis)
    _check_series(series, X)
    p = series.x.shape[1]
    rng = np.random.default_rng(seed)
    mh = cfg.mh

    lo = np.array([math.log(cfg.xi_bounds[0])] * p + [math.log(cfg.lambda_bounds[0])])
    hi = np.array([math.log(cfg.xi_bounds[1])] * p + [math.log(cfg.lambda_bounds[1])])

    def logpost(t):
        if np.any(t < lo) or np.any(t > hi):
            return -np.inf
        try:
            return _loglik_from(np.exp(t[:p]), math.exp(t[p]), series, X, cfg)
        except NumericError:
            return -np.inf

    spread = np.ptp(series.x, axis=0)
    spread = np.where(spread > 0, spread, 1.0)
    t = np.concatenate([np.log((spread / 4.0) ** 2), [0.0]])
    t = np.clip(t, lo, hi)
    lp = logpost(t)
    if not np.isfinite(lp):
        raise NumericError("integrated likelihood is not finite at the starting point")

    scale = mh.init_scale
    post = mh.n_iter - mh.burn_in
    thin = post // mh.n_keep
    kept = []
    batch_acc = 0
    acc_post = 0
    for it in range(mh.n_iter):
        prop = t + scale * rng.standard_normal(p + 1)
        lp_prop = logpost(prop)
        if math.log(rng.uniform()) < lp_prop - lp:
            t, lp = prop, lp_prop
            batch_acc += 1
            if it >= mh.burn_in:
                acc_post += 1
        if it < mh.burn_in and (it + 1) % mh.adapt_every == 0:
            rate = batch_acc / mh.adapt_every
            if rate < 0.2:
                scale *= 0.7
            elif rate > 0.4:
                scale *= 1.3
            batch_acc = 0
        if it >= mh.burn_in and (it - mh.burn_in + 1) % thin == 0 and len(kept) < mh.n_keep:
            kept.append(t.copy())

    rate = acc_post / post
    if rate < 0.01:
        raise NumericError(
            f"Metropolis acceptance rate {rate:.3%} after adaptation; review the "
            "xi/lambda prior bounds or the covariate scaling"
        )
    kept = np.array(kept)
    return GPHyperDraws(np.exp(kept[:, :p]), np.exp(kept[:, p]), rate, scale)


# ---------------------------------------------------------------------------
# prediction


def predict_curve(series: FisherSeries, draws: GPHyperDraws, grid, cfg: GPModelConfig | None = None, seed=None) -> PosteriorCurve:
    """Posterior predictive of the latent Fisher-scale curve on ``grid``.

    For each retained (xi, lambda): sigma^2 from its inverse-gamma
    conditional, beta from its Gaussian conditional, then the latent curve
    at every grid point from the GP conditional.  The pooled draws give the
    mean, its back-transform and equal-tailed bounds.
    """
    cfg = cfg or GPModelConfig()
    series = series.sorted()
    X = basis_matrix(series.x, cfg.basis)
    _check_series(series, X)
    grid = np.asarray(grid, dtype=float)
    grid2 = grid[:, None] if grid.ndim == 1 else grid
    if grid2.shape[0] == 0 or len(draws.lam) == 0:
        raise DomainError("grid and draws must be nonempty")
    if grid2.shape[1] != series.x.shape[1]:
        raise DomainError("grid dimension does not match the covariates")
    Xg = basis_matrix(grid2, cfg.basis)
    k, q = X.shape
    a = 0.5 * (k - q) + cfg.alpha
    rng = np.random.default_rng(seed)

    z = np.empty((len(draws.lam), grid2.shape[0]))
    for g, (xi, lam) in enumerate(zip(draws.xi, draws.lam)):
        fit = _factor(xi, lam, series.x, series.w, series.n, X)
        sigma2 = 0.5 * (fit.S2 + cfg.r) / rng.gamma(a)
        if q:
            eps = rng.standard_normal(q)
            beta = fit.beta_hat + math.sqrt(sigma2) * linalg.solve_triangular(fit.H_chol.T, eps, lower=False)
        else:
            beta = np.zeros(0)
        resid = series.w - X @ beta
        ks = se_kernel(grid2, series.x, xi)  # (m, k)
        V = linalg.solve_triangular(fit.L, ks.T, lower=True)  # L^-1 k*
        alpha_vec = linalg.cho_solve((fit.L, True), resid)
        mu = Xg @ beta + ks @ alpha_vec
        var = sigma2 * np.clip(1.0 - np.sum(V * V, axis=0), 0.0, None)
        z[g] = mu + np.sqrt(var) * rng.standard_normal(mu.size)
    return curve_from_fisher_samples(grid, z, cfg.level)


def fit_gp(series: FisherSeries, grid, cfg: GPModelConfig | None = None, seed=None) -> PosteriorCurve:
    """Convenience wrapper: sample hyperparameters, then predict."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s1, s2 = ss.spawn(2)
    draws = sample_hyper(series, cfg, s1)
    return predict_curve(series, draws, grid, cfg, s2)
