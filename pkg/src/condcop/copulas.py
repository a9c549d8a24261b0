"""Bivariate one-parameter copulas: samplers, tau/rho maps and their inverses.

Four families are supported (Clayton, Frank, Gumbel, Gaussian).  Kendall's tau
has a closed form for all of them (Frank through the first Debye function);
Spearman's rho is closed form for the Gaussian and Frank families and is
obtained by Gauss-Legendre quadrature of ``12 * int C - 3`` (order doubled
until converged) for Clayton and Gumbel.
"""

from __future__ import annotations

import enum
import functools
import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import DomainError, InsufficientDataError, NumericError

__all__ = [
    "Family",
    "CopulaSpec",
    "sample_copula",
    "copula_cdf",
    "theta_to_tau",
    "theta_to_rho",
    "functional_to_theta",
    "feasible_range",
    "pseudo_observe",
    "kendall_tau",
    "spearman_rho",
]

Functional = Literal["tau", "rho"]

_EPS = 1e-15


class Family(str, enum.Enum):
    CLAYTON = "clayton"
    FRANK = "frank"
    GUMBEL = "gumbel"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, value: Family | str) -> Family:
        if isinstance(value, Family):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown copula family {value!r}") from None


@dataclass(frozen=True)
class CopulaSpec:
    """A copula family together with its scalar parameter.

    ``theta`` is the Gaussian correlation for the Gaussian family and the
    usual Archimedean parameter otherwise.
    """

    family: Family
    theta: float

    def __post_init__(self):
        fam = Family.parse(self.family)
        object.__setattr__(self, "family", fam)
        t = float(self.theta)
        object.__setattr__(self, "theta", t)
        ok = math.isfinite(t) and {
            Family.CLAYTON: t > 0.0,
            Family.FRANK: t != 0.0,
            Family.GUMBEL: t >= 1.0,
            Family.GAUSSIAN: -1.0 < t < 1.0,
        }[fam]
        if not ok:
            raise DomainError(f"theta={t!r} is not admissible for the {fam.value} family")


# ---------------------------------------------------------------------------
# sampling


def sample_copula(spec: CopulaSpec, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` i.i.d. pairs from the copula.

    Gaussian pairs come from correlated normals; Clayton and Frank use the
    conditional-distribution method; Gumbel uses the Marshall-Olkin
    construction with a positive stable frailty.

    Returns
    -------
    ndarray of shape (n, 2) with every coordinate strictly inside (0, 1).
    """
    if n < 1:
        raise InsufficientDataError("n must be at least 1")
    rng = np.random.default_rng(seed)
    th = spec.theta
    fam = spec.family
    if fam is Family.GAUSSIAN:
        z = rng.standard_normal((n, 2))
        z[:, 1] = th * z[:, 0] + math.sqrt(1.0 - th * th) * z[:, 1]
        u = special.ndtr(z)
    elif fam is Family.CLAYTON:
        u1 = rng.uniform(size=n)
        w = rng.uniform(size=n)
        # u2 = (u1^-th (w^(-th/(1+th)) - 1) + 1)^(-1/th), evaluated in logs
        a = -th * np.log(u1) + np.log(np.expm1(-th / (1.0 + th) * np.log(w)))
        u2 = np.exp(-np.logaddexp(a, 0.0) / th)
        u = np.column_stack([u1, u2])
    elif fam is Family.FRANK:
        u1 = rng.uniform(size=n)
        w = rng.uniform(size=n)
        if abs(th) < 1.0:
            num = w * np.expm1(-th)
            den = w + (1.0 - w) * np.exp(-th * u1)
            u2 = -np.log1p(num / den) / th
        else:
            # same expression in logs; 1 + num/den underflows for large theta
            lw, l1w = np.log(w), np.log1p(-w)
            top = np.logaddexp(l1w - th * u1, lw - th)
            bot = np.logaddexp(lw, l1w - th * u1)
            u2 = -(top - bot) / th
        u = np.column_stack([u1, u2])
    else:
        u = _sample_gumbel(th, n, rng)
    return np.clip(u, _EPS, 1.0 - 1e-16)


def _sample_gumbel(th: float, n: int, rng: np.random.Generator) -> np.ndarray:
    e = rng.standard_exponential((n, 2))
    if th == 1.0:
        return np.exp(-e)
    alpha = 1.0 / th
    # Chambers-Mallows-Stuck draw of V with Laplace transform exp(-s^alpha)
    phi = rng.uniform(0.0, math.pi, size=n)
    w = rng.standard_exponential(n)
    v = (np.sin(alpha * phi) / np.sin(phi) ** (1.0 / alpha)) * (
        np.sin((1.0 - alpha) * phi) / w
    ) ** ((1.0 - alpha) / alpha)
    return np.exp(-((e / v[:, None]) ** alpha))


# ---------------------------------------------------------------------------
# copula CDF


def copula_cdf(spec: CopulaSpec, u1, u2):
    """Evaluate C(u1, u2); arguments broadcast."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    th = spec.theta
    fam = spec.family
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if fam is Family.CLAYTON:
            a = -th * np.log(u1)
            b = -th * np.log(u2)
            s = np.logaddexp(a, b)
            big = s + np.log1p(-np.exp(-s))
            small = np.log1p(np.expm1(np.minimum(a, 30.0)) + np.expm1(np.minimum(b, 30.0)))
            out = np.exp(-np.where(s < 30.0, small, big) / th)
        elif fam is Family.GUMBEL:
            out = np.exp(-(((-np.log(u1)) ** th + (-np.log(u2)) ** th) ** (1.0 / th)))
        elif fam is Family.FRANK:
            num = np.expm1(-th * u1) * np.expm1(-th * u2)
            out = -np.log1p(num / np.expm1(-th)) / th
        else:
            cov = [[1.0, th], [th, 1.0]]
            z = np.stack(np.broadcast_arrays(special.ndtri(u1), special.ndtri(u2)), axis=-1)
            out = stats.multivariate_normal(mean=[0.0, 0.0], cov=cov).cdf(z)
    out = np.where((u1 <= 0) | (u2 <= 0), 0.0, out)
    out = np.where(u1 >= 1, u2, out)
    out = np.where(u2 >= 1, u1, out)
    return out


# ---------------------------------------------------------------------------
# parameter -> functional maps


def _debye(k: int, x: float) -> float:
    """Debye function D_k(x) = k / x^k * int_0^x t^k / (e^t - 1) dt."""
    if x == 0.0:
        return 1.0

    def f(t):
        return 1.0 if t == 0.0 else t**k / math.expm1(t)

    val, _ = integrate.quad(f, 0.0, x, epsabs=1e-13, epsrel=1e-12, limit=200)
    return k * val / x**k


def theta_to_tau(spec: CopulaSpec) -> float:
    th = spec.theta
    fam = spec.family
    if fam is Family.CLAYTON:
        return th / (th + 2.0)
    if fam is Family.GUMBEL:
        return 1.0 - 1.0 / th
    if fam is Family.GAUSSIAN:
        return 2.0 / math.pi * math.asin(th)
    if abs(th) < 1e-4:
        # series: tau = th/9 - th^3/900 + ...
        return th / 9.0 - th**3 / 900.0
    return 1.0 - 4.0 / th * (1.0 - _debye(1, th))


@functools.lru_cache(maxsize=8)
def _triangle_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    s, v = np.meshgrid(x, x, indexing="ij")
    ws, wv = np.meshgrid(w, w, indexing="ij")
    # {0 < u < v < 1} with u = s * v, Jacobian v
    return (s * v).ravel(), v.ravel(), (ws * wv * v).ravel()


@functools.lru_cache(maxsize=4096)
def _rho_quadrature(family: Family, theta: float) -> float:
    """12 * int C - 3 by Gauss-Legendre on the two triangles split at the
    diagonal, doubling the order until successive values agree."""
    spec = CopulaSpec(family, theta)
    prev = None
    for order in (32, 64, 128, 256, 512):
        u, v, w = _triangle_rule(order)
        with np.errstate(all="ignore"):
            total = float(np.sum(w * copula_cdf(spec, u, v)) + np.sum(w * copula_cdf(spec, v, u)))
        if prev is not None and abs(total - prev) < 1e-10:
            return 12.0 * total - 3.0
        prev = total
    raise NumericError(
        f"rho quadrature did not converge for {family.value} theta={theta}: "
        f"last two integrals {prev!r}, {total!r}"
    )


def theta_to_rho(spec: CopulaSpec) -> float:
    """Spearman's rho of the copula."""
    th = spec.theta
    fam = spec.family
    if fam is Family.GAUSSIAN:
        return 6.0 / math.pi * math.asin(th / 2.0)
    if fam is Family.GUMBEL and th == 1.0:
        return 0.0
    if fam is Family.FRANK:
        if abs(th) < 1e-4:
            # series: rho = th/6 - th^3/450 + ...
            return th / 6.0 - th**3 / 450.0
        return 1.0 - 12.0 / th * (_debye(1, th) - _debye(2, th))
    return _rho_quadrature(fam, th)


# ---------------------------------------------------------------------------
# inversion


def feasible_range(family, which: Functional) -> tuple[float, float]:
    """Open interval of attainable tau/rho values (Gumbel includes 0)."""
    fam = Family.parse(family)
    if fam in (Family.FRANK, Family.GAUSSIAN):
        return (-1.0, 1.0)
    return (0.0, 1.0)


def functional_to_theta(family, target: float, which: Functional = "tau", tol: float = 1e-10) -> CopulaSpec:
    """Find the copula parameter whose tau (or rho) equals ``target``.

    Closed-form inverses are used where they exist; otherwise the monotone
    forward map is inverted by bracketed root finding.
    """
    fam = Family.parse(family)
    if which not in ("tau", "rho"):
        raise DomainError(f"unknown functional {which!r}")
    t = float(target)
    lo, hi = feasible_range(fam, which)
    gumbel_zero = fam is Family.GUMBEL and t == 0.0
    if not (lo < t < hi or gumbel_zero) or (fam is Family.FRANK and t == 0.0):
        rng = "(-1, 0) U (0, 1)" if fam is Family.FRANK else ("[0, 1)" if fam is Family.GUMBEL else f"({lo:g}, {hi:g})")
        raise DomainError(f"{which}={t!r} is not attainable by the {fam.value} family; feasible range {rng}")

    if fam is Family.GAUSSIAN:
        theta = math.sin(math.pi * t / 2.0) if which == "tau" else 2.0 * math.sin(math.pi * t / 6.0)
        return CopulaSpec(fam, theta)
    if which == "tau":
        if fam is Family.CLAYTON:
            return CopulaSpec(fam, 2.0 * t / (1.0 - t))
        if fam is Family.GUMBEL:
            return CopulaSpec(fam, 1.0 / (1.0 - t))
    if gumbel_zero:
        return CopulaSpec(fam, 1.0)

    forward = theta_to_tau if which == "tau" else theta_to_rho

    def g(th):
        return forward(CopulaSpec(fam, th)) - t

    if fam is Family.FRANK:
        sign = 1.0 if t > 0 else -1.0
        a, b = sign * 1e-6, sign * 1.0
        while sign * g(b) < 0:
            a, b = b, 2.0 * b
            if abs(b) > 1e4:
                raise NumericError(f"could not bracket {which}={t} for frank")
    elif fam is Family.CLAYTON:
        a, b = 1e-8, 1.0
        while g(b) < 0:
            a, b = b, 2.0 * b
            if b > 1e4:
                raise NumericError(f"could not bracket {which}={t} for clayton")
    else:
        a, b = 1.0, 2.0
        while g(b) < 0:
            a, b = b, 2.0 * b
            if b > 1e4:
                raise NumericError(f"could not bracket {which}={t} for gumbel")
    theta = optimize.brentq(g, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
    return CopulaSpec(fam, theta)


# ---------------------------------------------------------------------------
# data-side helpers


def pseudo_observe(raw) -> np.ndarray:
    """Rank-transform each column to (0, 1): mid-rank / (n + 1)."""
    y = np.asarray(raw, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    n = y.shape[0]
    if n < 2:
        raise InsufficientDataError("pseudo-observations need at least 2 rows")
    return stats.rankdata(y, axis=0, method="average") / (n + 1.0)


def kendall_tau(u) -> float:
    """Sample Kendall tau (tau-b, tie corrected) of an (n, 2) array."""
    u = np.asarray(u, dtype=float)
    with warnings.catch_warnings():
        # a constant column gives NaN, which callers handle
        warnings.simplefilter("ignore", stats.ConstantInputWarning)
        res = stats.kendalltau(u[:, 0], u[:, 1])
    return float(res.statistic)


def spearman_rho(u) -> float:
    u = np.asarray(u, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", stats.ConstantInputWarning)
        res = stats.spearmanr(u[:, 0], u[:, 1])
    return float(res.statistic)
