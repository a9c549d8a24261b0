"""Exponentially tilted empirical likelihood (ET-EL) posteriors.

Two routes are provided:

* a *localized* route: per-observation moment values built from the
  conditional copula estimators, tilted from kernel base weights at the
  target covariate value, and combined with a prior on a grid of candidate
  functional values;
* a *linearised* route: coefficients of a Taylor polynomial or cubic spline
  in the covariate are drawn from a Gaussian prior and importance-weighted by
  the ET-EL of the least-squares estimating equations on the Fisher-scale
  per-level estimates.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .curve import PosteriorCurve, curve_from_fisher_samples, weighted_quantile
from .dependence import (
    FisherSeries,
    PooledSample,
    WeightScheme,
    conditional_pseudo_observations,
    scheme_weights,
)
from .errors import DomainError, EstimationError, NumericError

__all__ = [
    "et_el_weights",
    "ELPosterior",
    "localized_el_posterior",
    "localized_el_curve",
    "CalibrationDesign",
    "WeightedBetaSample",
    "linearised_el_posterior",
    "el_predict_curve",
]

_MAX_NEWTON = 100


# ---------------------------------------------------------------------------
# tilting solver


def _tilt(Q: np.ndarray, base: np.ndarray):
    """Solve a batch of tilting problems.

    Q has shape (B, n, d); ``base`` (n,) is a probability vector.  Minimises
    log sum_i b_i exp(gamma' q_i) for each batch member by damped Newton.
    Returns (gamma (B, d), logf (B,), feasible (B,), converged (B,)).
    """
    B, _, d = Q.shape
    support = base > 0
    Qs = Q[:, support, :]
    b = base[support]
    log_b = np.log(b)
    # the optimum satisfies log f = -KL(omega || b) >= log(min b)
    floor = np.log(b.min()) - 1e-9
    scale = np.max(np.abs(Qs), axis=(1, 2))
    scale = np.where(scale > 0, scale, 1.0)
    Qn = Qs / scale[:, None, None]

    gamma = np.zeros((B, d))
    logf, e = _log_partition(Qn, log_b, gamma)
    active = np.ones(B, dtype=bool)
    feasible = np.ones(B, dtype=bool)
    converged = np.zeros(B, dtype=bool)
    eye = np.eye(d)
    for _ in range(_MAX_NEWTON):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        w = np.exp(e[idx] - logf[idx, None])
        q = Qn[idx]
        grad = np.einsum("bn,bnd->bd", w, q)
        qc = q - grad[:, None, :]
        H = np.einsum("bn,bnd,bne->bde", w, qc, qc)
        tr = np.trace(H, axis1=1, axis2=2)[:, None, None]
        step = np.linalg.solve(H + 1e-14 * (tr + 1e-300) * eye, grad[:, :, None])[:, :, 0]
        slope = np.sum(grad * step, axis=1)  # Newton decrement squared
        gnorm = np.sqrt(np.sum(grad * grad, axis=1))
        done = (gnorm < 1e-11) | (slope < 1e-24)
        converged[idx[done]] = True
        active[idx[done]] = False
        keep = ~done
        idx, q, grad, step, slope = idx[keep], q[keep], grad[keep], step[keep], slope[keep]
        if idx.size == 0:
            break
        t = np.ones(idx.size)
        g0 = gamma[idx]
        f0 = logf[idx]
        new_g = g0 - step
        f_new, e_new = _log_partition(Qn[idx], log_b, new_g)
        for _ in range(60):
            bad = ~(f_new <= f0 - 1e-4 * t * slope) & np.isfinite(f0)
            bad &= ~(f_new < floor)
            # in the quadratic regime the decrease is below rounding noise
            bad &= slope > 1e-10
            if not bad.any():
                break
            t[bad] *= 0.5
            new_g[bad] = g0[bad] - t[bad, None] * step[bad]
            fb, eb = _log_partition(Qn[idx[bad]], log_b, new_g[bad])
            f_new[bad], e_new[bad] = fb, eb
        stalled = np.abs(f_new - f0) <= 1e-15 * np.maximum(1.0, np.abs(f0))
        gamma[idx] = new_g
        logf[idx] = f_new
        e[idx] = e_new
        infeas = f_new < floor
        feasible[idx[infeas]] = False
        active[idx[infeas]] = False
        # no further decrease possible: accept if the gradient is tiny
        st = stalled & ~infeas
        if st.any():
            w2 = np.exp(e_new[st] - f_new[st, None])
            g2 = np.einsum("bn,bnd->bd", w2, Qn[idx[st]])
            ok = np.sqrt(np.sum(g2 * g2, axis=1)) < 1e-9
            converged[idx[st][ok]] = True
            active[idx[st][ok]] = False
    gamma_full = gamma / scale[:, None]
    return gamma_full, logf, feasible, converged | ~feasible, support


def _log_partition(Qn, log_b, g):
    """log sum_i b_i exp(g' q_i) per batch member, plus the exponents."""
    e = log_b + np.einsum("bnd,bd->bn", Qn, g)
    m = e.max(axis=1, keepdims=True)
    return m[:, 0] + np.log(np.exp(e - m).sum(axis=1)), e


def _weights_and_logel(Q, base):
    """Batch version of :func:`et_el_weights`.

    Returns (omega (B, n), log_el (B,), n_nonconverged).
    """
    B, n, _ = Q.shape
    gamma, logf, feasible, converged, support = _tilt(Q, base)
    e = np.einsum("bnd,bd->bn", Q[:, support, :], gamma)
    b = base[support]
    log_w = np.log(b) + e - logf[:, None]
    omega = np.zeros((B, n))
    omega[:, support] = np.exp(log_w)
    n_eff = 1.0 / np.sum(base * base)
    log_el = n_eff * np.sum(b * (log_w - np.log(b)), axis=1)
    log_el = np.where(feasible, log_el, -np.inf)
    omega[~feasible] = np.nan
    return omega, log_el, int(np.sum(~converged))


def et_el_weights(q_values, base_weights=None):
    """Maximum-entropy weights subject to sum_i omega_i q_i = 0.

    The solution tilts the base weights exponentially,
    omega_i proportional to b_i exp(gamma' q_i).  ``q_values`` is (n,) or
    (n, d).  The returned log-likelihood is
    n_eff * sum_i b_i log(omega_i / b_i) with n_eff = 1 / sum_i b_i^2,
    which for uniform base weights equals sum_i log(n omega_i).

    Returns
    -------
    (omega, log_el); when 0 is outside the convex hull of the moments the
    weights are NaN and ``log_el`` is ``-inf``.
    """
    q = np.asarray(q_values, dtype=float)
    q = q[:, None] if q.ndim == 1 else q
    n = q.shape[0]
    if base_weights is None:
        b = np.full(n, 1.0 / n)
    else:
        b = np.asarray(base_weights, dtype=float).ravel()
        if b.size != n or np.any(b < 0) or not b.sum() > 0:
            raise DomainError("base weights must be nonnegative with positive total")
        b = b / b.sum()
    omega, log_el, bad = _weights_and_logel(q[None], b)
    if bad:
        raise NumericError(f"tilting Newton iteration did not converge in {_MAX_NEWTON} steps")
    return omega[0], float(log_el[0])


# ---------------------------------------------------------------------------
# localized route


@dataclass
class ELPosterior:
    """Grid posterior of the functional at one covariate value."""

    phi_grid: np.ndarray
    probs: np.ndarray
    mean: float
    lower: float
    upper: float
    level: float
    n_feasible: int


def _moment_values(u_hat: np.ndarray, base: np.ndarray, functional: str) -> np.ndarray:
    if functional == "rho":
        return 12.0 * (1.0 - u_hat[:, 0]) * (1.0 - u_hat[:, 1]) - 3.0
    # Kendall: 4 C_x(U_i) - 1 with the finite-sample correction of the
    # weighted concordance estimator, so sum_i b_i v_i is the conditional tau
    s = np.flatnonzero(base > 0)
    us = u_hat[s]
    below = (us[None, :, 0] < us[:, None, 0]) & (us[None, :, 1] < us[:, None, 1])
    c = below.astype(float) @ base[s]
    denom = 1.0 - np.sum(base * base)
    v = np.zeros(u_hat.shape[0])
    v[s] = 4.0 * c / denom - 1.0
    return v


def _base_weights(sample: PooledSample, scheme: WeightScheme, x) -> np.ndarray:
    w = scheme_weights(scheme, sample.X, x)
    # local-linear weights can be negative; the base measure must not be
    w = np.clip(w, 0.0, None)
    if not w.sum() > 0:
        raise EstimationError("no positive smoothing weight at the target covariate")
    return w / w.sum()


def localized_el_posterior(
    sample: PooledSample,
    scheme: WeightScheme,
    x,
    functional: Literal["rho", "tau"] = "rho",
    prior: Callable | None = None,
    phi_grid=None,
    u_hat=None,
    level: float = 0.95,
) -> ELPosterior:
    """Posterior over the functional at covariate value ``x``.

    ``prior`` is a density on (-1, 1) evaluated on ``phi_grid`` (default:
    uniform on 201 equispaced points in [-0.999, 0.999]).
    """
    if functional not in ("rho", "tau"):
        raise DomainError(f"unknown functional {functional!r}")
    if phi_grid is None:
        phi_grid = np.linspace(-0.999, 0.999, 201)
    phi_grid = np.asarray(phi_grid, dtype=float)
    if np.any(np.abs(phi_grid) >= 1):
        raise DomainError("phi grid must lie strictly inside (-1, 1)")
    if u_hat is None:
        u_hat = conditional_pseudo_observations(sample)
    base = _base_weights(sample, scheme, x)
    v = _moment_values(u_hat, base, functional)
    s = base > 0
    Q = (v[s][None, :] - phi_grid[:, None])[:, :, None]
    _, log_el, bad = _weights_and_logel(Q, base[s])
    if bad:
        raise NumericError(f"{bad} tilting problems did not converge")
    log_prior = np.zeros_like(phi_grid) if prior is None else np.log(np.asarray(prior(phi_grid), dtype=float))
    lp = log_prior + log_el
    if not np.any(np.isfinite(lp)):
        vs = v[s]
        raise EstimationError(
            f"every grid value is infeasible: moment values span [{vs.min():.4g}, {vs.max():.4g}] "
            f"and the grid spans [{phi_grid.min():.4g}, {phi_grid.max():.4g}]"
        )
    p = np.exp(lp - np.max(lp))
    p /= p.sum()
    mean = float(p @ phi_grid)
    a = (1.0 - level) / 2.0
    lo, hi = weighted_quantile(phi_grid[:, None], [a, 1.0 - a], p)[:, 0]
    return ELPosterior(phi_grid, p, mean, float(min(lo, mean)), float(max(hi, mean)), level, int(np.isfinite(log_el).sum()))


def localized_el_curve(sample: PooledSample, scheme: WeightScheme, grid, functional="rho", **kwargs) -> PosteriorCurve:
    """Apply :func:`localized_el_posterior` at every grid point."""
    grid = np.asarray(grid, dtype=float)
    g2 = grid[:, None] if grid.ndim == 1 else grid
    u_hat = kwargs.pop("u_hat", None)
    if u_hat is None:
        u_hat = conditional_pseudo_observations(sample)
    level = kwargs.get("level", 0.95)
    rows = [localized_el_posterior(sample, scheme, xg, functional, u_hat=u_hat, **kwargs) for xg in g2]
    mean = np.array([r.mean for r in rows])
    return PosteriorCurve(
        grid,
        mean,
        np.array([r.lower for r in rows]),
        np.array([r.upper for r in rows]),
        np.arctanh(np.clip(mean, -1 + 1e-12, 1 - 1e-12)),
        level,
    )


# ---------------------------------------------------------------------------
# linearised route


@dataclass(frozen=True)
class CalibrationDesign:
    """Regression design for the Fisher-scale curve.

    ``kind='taylor'``: columns (x - x0)^j, j = 0..degree, per covariate
    (no cross terms).  ``kind='spline'``: 1, x, x^2, x^3 and truncated
    cubes (x - knot)^3_+ (single covariate).
    """

    kind: Literal["taylor", "spline"]
    degree: int = 3
    center: tuple = ()
    knots: tuple = ()

    @classmethod
    def taylor(cls, x, degree: int = 3, center=None) -> CalibrationDesign:
        x = np.asarray(x, dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        c = np.median(x, axis=0) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
        return cls("taylor", int(degree), tuple(float(v) for v in c))

    @classmethod
    def cubic_spline(cls, x, knots=None, n_knots: int = 4) -> CalibrationDesign:
        x = np.asarray(x, dtype=float).ravel()
        if knots is None:
            knots = np.quantile(x, np.arange(1, n_knots + 1) / (n_knots + 1))
        knots = np.sort(np.asarray(knots, dtype=float))
        if np.any(knots <= x.min()) or np.any(knots >= x.max()):
            raise DomainError("spline knots must lie strictly inside the covariate range")
        return cls("spline", 3, (), tuple(float(v) for v in knots))

    @property
    def n_coef(self) -> int:
        if self.kind == "taylor":
            return 1 + self.degree * len(self.center)
        return 4 + len(self.knots)

    def matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        if self.kind == "taylor":
            if x.shape[1] != len(self.center):
                raise DomainError("covariate dimension does not match the design")
            d = x - np.asarray(self.center)
            cols = [np.ones(x.shape[0])] + [d[:, j] ** p for j in range(d.shape[1]) for p in range(1, self.degree + 1)]
            return np.column_stack(cols)
        if x.shape[1] != 1:
            raise DomainError("the spline design takes a single covariate")
        t = x[:, 0]
        cols = [np.ones_like(t), t, t**2, t**3] + [np.clip(t - g, 0.0, None) ** 3 for g in self.knots]
        return np.column_stack(cols)


@dataclass
class WeightedBetaSample:
    draws: np.ndarray  # (G, d)
    weights: np.ndarray  # normalised, (G,)
    n_feasible: int
    warnings: list = field(default_factory=list)

    @property
    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights**2))


def linearised_el_posterior(
    series: FisherSeries,
    design: CalibrationDesign,
    prior_sd: float = 10.0,
    G: int = 5000,
    seed=None,
    batch: int = 1000,
    moments: Literal["residual", "score"] = "residual",
) -> WeightedBetaSample:
    """Prior draws of the calibration coefficients weighted by their ET-EL.

    ``moments='residual'`` uses the scalar residual W_l - x_l' beta per
    level.  ``moments='score'`` uses the least-squares estimating equations
    x_l (W_l - x_l' beta), which are feasible only for draws very close to
    the least-squares fit.  Infeasible draws get weight zero.
    """
    if G < 1000:
        raise DomainError("G must be at least 1000")
    if moments not in ("residual", "score"):
        raise DomainError(f"unknown moment form {moments!r}")
    D = design.matrix(series.x)
    if np.linalg.matrix_rank(D) < D.shape[1]:
        raise DomainError("calibration design is rank deficient at the observed levels")
    rng = np.random.default_rng(seed)
    betas = prior_sd * rng.standard_normal((G, D.shape[1]))
    k = D.shape[0]
    base = np.full(k, 1.0 / k)
    log_el = np.empty(G)
    for start in range(0, G, batch):
        bb = betas[start : start + batch]
        resid = series.w[None, :] - bb @ D.T  # (B, k)
        Q = resid[:, :, None] * D[None, :, :] if moments == "score" else resid[:, :, None]
        _, le, bad = _weights_and_logel(Q, base)
        if bad:
            raise NumericError(f"{bad} tilting problems did not converge")
        log_el[start : start + batch] = le
    feas = np.isfinite(log_el)
    if not feas.any():
        raise EstimationError("every prior draw is infeasible for the estimating equations")
    w = np.zeros(G)
    w[feas] = np.exp(log_el[feas] - log_el[feas].max())
    w /= w.sum()
    out = WeightedBetaSample(betas, w, int(feas.sum()))
    if out.ess < 50:
        out.warnings.append(f"{out.n_feasible} of {G} prior draws are feasible")
    return out


def el_predict_curve(wbs: WeightedBetaSample, design: CalibrationDesign, grid, level: float = 0.95) -> PosteriorCurve:
    """Weighted mixture of the calibration curves x*' beta^(g)."""
    w = np.asarray(wbs.weights, dtype=float)
    if not w.sum() > 0:
        raise EstimationError("weighted sample has zero total weight")
    keep = w > 0
    z = wbs.draws[keep] @ design.matrix(grid).T
    curve = curve_from_fisher_samples(grid, z, level, w[keep])
    if wbs.ess < 50:
        curve.warnings.append(f"effective sample size {wbs.ess:.1f} is below 50")
    curve.warnings.extend(wbs.warnings)
    return curve
