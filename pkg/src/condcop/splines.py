"""Bayesian regression splines for the Fisher-scale dependence curve.

The model is W_l = s(x_l)' beta + eps_l with eps_l ~ N(0, 1 / (tau n_l)),
beta ~ N(0, M I) (optionally restricted to the nonnegative orthant on the
monotone coordinates) and tau ~ Gamma(a0, b0).  A two-block Gibbs sampler
alternates the coefficient and precision updates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special
from scipy.interpolate import BSpline

from .curve import PosteriorCurve, curve_from_fisher_samples
from .dependence import FisherSeries
from .errors import ConfigError, DomainError, ExtrapolationError, NumericError

__all__ = [
    "SplineKind",
    "SplineBasis",
    "TensorSplineBasis",
    "build_basis",
    "GibbsConfig",
    "SplineConfig",
    "SplinePosterior",
    "gibbs_fit",
    "spline_predict_curve",
    "fit_splines",
]


class SplineKind(str, enum.Enum):
    QUADRATIC_I = "quadratic-i"
    CUBIC_I = "cubic-i"
    C_SPLINE = "c-spline"
    CUBIC = "cubic"

    @classmethod
    def parse(cls, value) -> SplineKind:
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "quadratici": "quadratic-i",
            "cubici": "cubic-i",
            "cspline": "c-spline",
            "unconstrainedcubic": "cubic",
            "unconstrained-cubic": "cubic",
        }
        key = aliases.get(key.replace("-", ""), key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown spline kind {value!r}") from None


def _bspline_design(t: np.ndarray, knots: np.ndarray, degree: int) -> np.ndarray:
    return BSpline.design_matrix(t, knots, degree, extrapolate=False).toarray()


@dataclass(frozen=True)
class SplineBasis:
    """Spline basis on [a, b] with repeated boundary knots.

    Columns of :meth:`matrix`:

    * ``quadratic-i`` / ``cubic-i``: an intercept followed by m I-splines
      (m = k + 2 and k + 3 for k interior knots);
    * ``c-spline``: an intercept, the rescaled linear term (x - a)/(b - a)
      and the k + 2 integrals of the quadratic I-splines;
    * ``cubic``: the k + 4 cubic B-splines (they sum to one, so no separate
      intercept).

    ``constrained`` flags the columns restricted to be nonnegative in
    monotone mode.
    """

    kind: SplineKind
    interior: tuple
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "kind", SplineKind.parse(self.kind))
        if not (np.isfinite(self.a) and np.isfinite(self.b) and self.a < self.b):
            raise DomainError("basis range needs finite a < b")
        d = np.asarray(self.interior, dtype=float)
        if d.size and (np.any(np.diff(d) <= 0) or d[0] <= self.a or d[-1] >= self.b):
            raise DomainError("interior knots must be strictly increasing inside (a, b)")

    @property
    def degree(self) -> int:
        return {SplineKind.QUADRATIC_I: 2, SplineKind.C_SPLINE: 2}.get(self.kind, 3)

    @property
    def knots(self) -> np.ndarray:
        p = self.degree
        return np.concatenate([[self.a] * (p + 1), self.interior, [self.b] * (p + 1)])

    @property
    def m(self) -> int:
        """Number of spline functions (excluding intercept and linear term)."""
        nb = len(self.interior) + self.degree + 1
        return nb if self.kind is SplineKind.CUBIC else nb - 1

    @property
    def n_columns(self) -> int:
        extra = {SplineKind.CUBIC: 0, SplineKind.C_SPLINE: 2}.get(self.kind, 1)
        return self.m + extra

    @property
    def constrained(self) -> np.ndarray:
        mask = np.ones(self.n_columns, dtype=bool)
        if self.kind is SplineKind.CUBIC:
            mask[:] = False
        else:
            mask[0] = False
        return mask

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            if x.shape[1] != 1:
                raise DomainError("a univariate basis takes one covariate column")
            x = x[:, 0]
        x = np.atleast_1d(x)
        tol = 1e-12 * (self.b - self.a)
        if np.any(x < self.a - tol) or np.any(x > self.b + tol) or not np.all(np.isfinite(x)):
            raise ExtrapolationError(f"evaluation points must lie in [{self.a:.6g}, {self.b:.6g}]")
        return np.clip(x, self.a, self.b)

    def functions(self, x) -> np.ndarray:
        """The m spline functions at ``x`` (no intercept or linear column)."""
        x = self._check(x)
        B = _bspline_design(x, self.knots, self.degree)
        if self.kind is SplineKind.CUBIC:
            return B
        if self.kind is not SplineKind.C_SPLINE:
            # tail sums of B-splines, dropping the constant first one
            return np.cumsum(B[:, ::-1], axis=1)[:, ::-1][:, 1:]
        # C-splines: integrals of the quadratic I-splines, scaled to end at 1
        tail = self._c_antiderivative(x)
        return tail / self._c_antiderivative(np.array([self.b]))

    def _c_antiderivative(self, x: np.ndarray) -> np.ndarray:
        t = self.knots
        nb = len(t) - self.degree - 1
        out = np.empty((x.size, nb - 1))
        for j in range(1, nb):
            # I_j = sum_{l >= j} B_l
            c = np.zeros(nb)
            c[j:] = 1.0
            out[:, j - 1] = BSpline(t, c, self.degree, extrapolate=False).antiderivative()(x)
        return out

    def matrix(self, x) -> np.ndarray:
        x = self._check(x)
        S = self.functions(x)
        if self.kind is SplineKind.CUBIC:
            return S
        cols = [np.ones((x.size, 1))]
        if self.kind is SplineKind.C_SPLINE:
            cols.append(((x - self.a) / (self.b - self.a))[:, None])
        return np.hstack(cols + [S])


@dataclass(frozen=True)
class TensorSplineBasis:
    """Tensor product of univariate cubic B-spline bases, one per covariate."""

    margins: tuple

    @property
    def n_columns(self) -> int:
        return int(np.prod([b.n_columns for b in self.margins]))

    @property
    def constrained(self) -> np.ndarray:
        return np.zeros(self.n_columns, dtype=bool)

    def matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        if x.shape[1] != len(self.margins):
            raise DomainError("covariate dimension does not match the tensor basis")
        out = np.ones((x.shape[0], 1))
        for j, b in enumerate(self.margins):
            Bj = b.matrix(x[:, j])
            out = (out[:, :, None] * Bj[:, None, :]).reshape(x.shape[0], -1)
        return out


def build_basis(kind, knot_count: int, x_range) -> SplineBasis | TensorSplineBasis:
    """Basis with ``knot_count`` equispaced interior knots on ``x_range``.

    ``x_range`` is (a, b) or, for several covariates, a sequence of such
    pairs; the multi-covariate case builds a tensor product of cubic
    B-splines.
    """
    if knot_count < 0:
        raise DomainError("knot_count must be nonnegative")
    r = np.asarray(x_range, dtype=float)
    if r.ndim == 2:
        if r.shape[0] == 1:
            r = r[0]
        else:
            if SplineKind.parse(kind) is not SplineKind.CUBIC:
                raise ConfigError("several covariates need the unconstrained cubic basis")
            return TensorSplineBasis(tuple(build_basis("cubic", knot_count, ab) for ab in r))
    a, b = float(r[0]), float(r[1])
    interior = a + (b - a) * np.arange(1, knot_count + 1) / (knot_count + 1)
    return SplineBasis(kind, tuple(float(v) for v in interior), a, b)


# ---------------------------------------------------------------------------
# Gibbs sampler


@dataclass(frozen=True)
class GibbsConfig:
    n_iter: int = 11000
    burn_in: int = 1000
    thin: int = 10

    def __post_init__(self):
        if self.thin < 1 or self.burn_in < 0 or self.n_iter <= self.burn_in:
            raise ConfigError("need thin >= 1 and n_iter > burn_in >= 0")


@dataclass(frozen=True)
class SplineConfig:
    """Defaults for :func:`fit_splines`.

    ``weighting='levels'`` makes the error variance proportional to 1/n_l;
    ``'none'`` is homoscedastic.  ``knot_count=None`` picks
    max(1, (k - 4) // 2) interior knots per covariate, k being the number
    of distinct levels along that covariate, so a univariate cubic basis has
    about half as many coefficients as levels.
    """

    kind: str = "cubic"
    knot_count: int | None = None
    prior_var: float = 100.0
    a0: float = 0.01
    b0: float = 0.01
    monotone: bool = False
    weighting: str = "levels"
    chain: GibbsConfig = field(default_factory=GibbsConfig)
    level: float = 0.95

    def __post_init__(self):
        if self.weighting not in ("levels", "none"):
            raise ConfigError(f"unknown weighting {self.weighting!r}")
        if not (self.prior_var > 0 and self.a0 > 0 and self.b0 > 0):
            raise ConfigError("prior_var, a0 and b0 must be positive")


@dataclass
class SplinePosterior:
    beta: np.ndarray  # (S, columns)
    tau: np.ndarray  # (S,)
    meta: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


class _Conditionals:
    """Full conditionals of (beta, tau) for a fixed design and weights."""

    def __init__(self, D, wts, M, a0, b0, constrained):
        self.D = np.asarray(D, dtype=float)
        self.wts = np.asarray(wts, dtype=float)
        self.M, self.a0, self.b0 = float(M), float(a0), float(b0)
        self.constrained = np.asarray(constrained, dtype=bool)
        self.DtWD = self.D.T @ (self.wts[:, None] * self.D)
        self.eye = np.eye(self.D.shape[1])

    def set_response(self, y):
        self.y = np.asarray(y, dtype=float)
        self.DtWy = self.D.T @ (self.wts * self.y)

    def _precision(self, tau):
        P = tau * self.DtWD + self.eye / self.M
        try:
            L = linalg.cholesky(P, lower=True)
        except linalg.LinAlgError:
            P = P + 1e-10 * np.trace(P) / P.shape[0] * self.eye
            try:
                L = linalg.cholesky(P, lower=True)
            except linalg.LinAlgError:
                raise NumericError("coefficient conditional precision is not positive definite") from None
        return P, L

    def draw_beta(self, beta, tau, rng):
        P, L = self._precision(tau)
        mu = linalg.cho_solve((L, True), tau * self.DtWy)
        if not self.constrained.any():
            return mu + linalg.solve_triangular(L.T, rng.standard_normal(mu.size), lower=False)
        beta = beta.copy()
        for j in range(beta.size):
            pjj = P[j, j]
            cj = mu[j] - (P[j] @ (beta - mu) - pjj * (beta[j] - mu[j])) / pjj
            sj = 1.0 / np.sqrt(pjj)
            if self.constrained[j]:
                beta[j] = cj + sj * _std_normal_above(-cj / sj, rng)
            else:
                beta[j] = cj + sj * rng.standard_normal()
        return beta

    def draw_tau(self, beta, rng):
        r = self.y - self.D @ beta
        shape = self.a0 + 0.5 * self.y.size
        rate = self.b0 + 0.5 * float(np.sum(self.wts * r * r))
        return rng.gamma(shape, 1.0 / rate)


def _std_normal_above(lo: float, rng) -> float:
    """Standard normal conditioned on Z > lo, by inversion in log space."""
    log_u = np.log(rng.uniform())
    return -float(special.ndtri_exp(log_u + special.log_ndtr(-lo)))


def gibbs_fit(
    series: FisherSeries,
    basis,
    prior_var: float = 100.0,
    a0: float = 0.01,
    b0: float = 0.01,
    monotone: bool = False,
    chain: GibbsConfig | None = None,
    seed=None,
    weighting: str = "levels",
) -> SplinePosterior:
    """Gibbs sampler for the spline coefficients and error precision.

    In monotone mode the I-spline (or C-spline) coefficients are kept
    nonnegative with one-coordinate-at-a-time truncated-normal updates,
    which makes the fitted curve nondecreasing.
    """
    chain = chain or GibbsConfig()
    if monotone and not basis.constrained.any():
        raise ConfigError("monotone mode needs an I-spline or C-spline basis")
    D = basis.matrix(series.x)
    k, m = D.shape
    warnings = []
    if k < m:
        warnings.append(f"{k} levels for {m} coefficients; the fit is prior-dominated")
    wts = series.n if weighting == "levels" else np.ones(k)
    cond = _Conditionals(D, wts, prior_var, a0, b0, basis.constrained if monotone else np.zeros(m, bool))
    cond.set_response(series.w)
    rng = np.random.default_rng(seed)
    # start at the (projected) ridge fit
    beta = np.linalg.solve(cond.DtWD + cond.eye / prior_var, cond.DtWy)
    if monotone:
        beta = np.where(cond.constrained, np.maximum(beta, 0.0), beta)
    tau = cond.draw_tau(beta, rng)
    keep_b, keep_t = [], []
    for it in range(chain.n_iter):
        beta = cond.draw_beta(beta, tau, rng)
        tau = cond.draw_tau(beta, rng)
        if it >= chain.burn_in and (it - chain.burn_in) % chain.thin == 0:
            keep_b.append(beta)
            keep_t.append(tau)
    betas = np.array(keep_b)
    if not np.all(np.isfinite(betas)):
        raise NumericError("non-finite coefficient draws")
    meta = {"n_iter": chain.n_iter, "burn_in": chain.burn_in, "thin": chain.thin, "monotone": bool(monotone)}
    return SplinePosterior(betas, np.array(keep_t), meta, warnings)


def spline_predict_curve(post: SplinePosterior, basis, grid, level: float = 0.95) -> PosteriorCurve:
    """Pointwise summary of the draws s(x*)' beta on ``grid``."""
    z = post.beta @ basis.matrix(grid).T
    curve = curve_from_fisher_samples(grid, z, level)
    curve.warnings.extend(post.warnings)
    return curve


def fit_splines(series: FisherSeries, grid, cfg: SplineConfig | None = None, seed=None) -> PosteriorCurve:
    """Basis on the observed covariate range, Gibbs fit and prediction."""
    cfg = cfg or SplineConfig()
    x = series.x
    rng_x = np.column_stack([x.min(axis=0), x.max(axis=0)])
    knots = cfg.knot_count
    if knots is None:
        k_axis = min(np.unique(x[:, j]).size for j in range(x.shape[1]))
        knots = max(1, (k_axis - 4) // 2)
    basis = build_basis(cfg.kind, knots, rng_x)
    post = gibbs_fit(series, basis, cfg.prior_var, cfg.a0, cfg.b0, cfg.monotone, cfg.chain, seed, cfg.weighting)
    return spline_predict_curve(post, basis, grid, cfg.level)
