"""Log-space densities and samplers for every distribution family used here.

Each family is a small validated dataclass with two methods:

* ``sample(rng, size=None)`` draws from the distribution (``size=None`` for
  a single draw, an int for a batch),
* ``log_density(x)`` evaluates the natural-log density at a point,
  returning ``-inf`` outside the support and never NaN.

All downstream weight and acceptance arithmetic happens in log space;
densities are exponentiated only at normalization time, because tempered
mechanism densities underflow double precision long before they stop
mattering.

The module-level ``sample`` / ``log_density`` / ``multinomial_resample``
functions are thin conveniences over the same machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, gammaln

from .streams import RandomStream, as_generator

LOG_2PI = math.log(2.0 * math.pi)


class DegenerateWeightsError(ValueError):
    """All weights are zero (or not normalizable), so resampling is undefined."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


def _finite_scalar(x) -> float:
    x = float(x)
    _require(math.isfinite(x), "parameter must be finite")
    return x


@dataclass
class Normal:
    loc: float
    scale: float

    def __post_init__(self) -> None:
        self.loc = _finite_scalar(self.loc)
        self.scale = _finite_scalar(self.scale)
        _require(self.scale >= 0.0, "scale must be non-negative")

    def sample(self, rng, size=None):
        return self.loc + self.scale * as_generator(rng).standard_normal(size)

    def log_density(self, x):
        if self.scale == 0.0:
            return 0.0 if x == self.loc else -np.inf
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        with np.errstate(over="ignore"):
            return -0.5 * z * z - math.log(self.scale) - 0.5 * LOG_2PI


@dataclass
class MultivariateNormal:
    mean: np.ndarray
    cov: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        d = self.mean.shape[0]
        _require(self.cov.shape == (d, d), "covariance shape must match mean")
        _require(np.allclose(self.cov, self.cov.T), "covariance must be symmetric")
        try:
            self._chol = np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive definite") from None

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def sample(self, rng, size=None):
        z = as_generator(rng).standard_normal(
            self.dim if size is None else (size, self.dim)
        )
        return self.mean + z @ self._chol.T

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.mean.shape:
            raise ValueError(f"point has shape {x.shape}, expected {self.mean.shape}")
        u = np.linalg.solve(self._chol, x - self.mean)
        logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))
        return -0.5 * (self.dim * LOG_2PI + logdet + u @ u)


@dataclass
class Laplace:
    loc: float
    scale: float

    def __post_init__(self) -> None:
        self.loc = _finite_scalar(self.loc)
        self.scale = _finite_scalar(self.scale)
        _require(self.scale > 0.0, "scale must be positive")

    def sample(self, rng, size=None):
        return as_generator(rng).laplace(self.loc, self.scale, size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        return -np.abs(x - self.loc) / self.scale - math.log(2.0 * self.scale)


@dataclass
class Gamma:
    """Shape/rate parameterization: mean = shape / rate."""

    shape: float
    rate: float

    def __post_init__(self) -> None:
        self.shape = _finite_scalar(self.shape)
        self.rate = _finite_scalar(self.rate)
        _require(self.shape > 0.0, "shape must be positive")
        _require(self.rate > 0.0, "rate must be positive")

    def sample(self, rng, size=None):
        return as_generator(rng).gamma(self.shape, 1.0 / self.rate, size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                self.shape * math.log(self.rate)
                - gammaln(self.shape)
                + (self.shape - 1.0) * np.log(x)
                - self.rate * x
            )
        return np.where((x > 0.0) & np.isfinite(x), out, -np.inf)[()]


@dataclass
class InverseGamma:
    """1/X for X ~ Gamma(shape, rate=scale); mean = scale/(shape-1) when shape > 1."""

    shape: float
    scale: float

    def __post_init__(self) -> None:
        self.shape = _finite_scalar(self.shape)
        self.scale = _finite_scalar(self.scale)
        _require(self.shape > 0.0, "shape must be positive")
        _require(self.scale > 0.0, "scale must be positive")

    def sample(self, rng, size=None):
        return self.scale / as_generator(rng).gamma(self.shape, 1.0, size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                self.shape * math.log(self.scale)
                - gammaln(self.shape)
                - (self.shape + 1.0) * np.log(x)
                - self.scale / x
            )
        return np.where(x > 0.0, out, -np.inf)[()]


@dataclass
class Weibull:
    scale: float
    shape: float

    def __post_init__(self) -> None:
        self.scale = _finite_scalar(self.scale)
        self.shape = _finite_scalar(self.shape)
        _require(self.scale > 0.0, "scale must be positive")
        _require(self.shape > 0.0, "shape must be positive")

    def sample(self, rng, size=None):
        return self.scale * as_generator(rng).weibull(self.shape, size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            z = x / self.scale
            out = (
                math.log(self.shape / self.scale)
                + (self.shape - 1.0) * np.log(z)
                - z**self.shape
            )
        return np.where((x > 0.0) & np.isfinite(x), out, -np.inf)[()]


@dataclass
class StudentT:
    """Location-scale (possibly multivariate) Student t.

    Scalar ``loc``/``scale`` give the univariate family; a location vector
    with a scale *matrix* gives the multivariate one. Sampled as
    loc + L z * sqrt(df / chi2_df) with L the Cholesky factor.
    """

    loc: "float | np.ndarray"
    scale: "float | np.ndarray"
    df: float
    _chol: np.ndarray = field(init=False, repr=False)
    _scalar: bool = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.df = _finite_scalar(self.df)
        _require(self.df > 0.0, "df must be positive")
        self._scalar = np.ndim(self.loc) == 0
        self.loc = np.atleast_1d(np.asarray(self.loc, dtype=float))
        d = self.loc.shape[0]
        scale = np.asarray(self.scale, dtype=float)
        if scale.ndim < 2:
            _require(bool(np.all(scale > 0.0)), "scale must be positive")
            scale = np.diag(np.broadcast_to(scale, (d,)) ** 2)
        self.scale = scale
        _require(self.scale.shape == (d, d), "scale matrix shape must match loc")
        _require(np.allclose(self.scale, self.scale.T), "scale matrix must be symmetric")
        try:
            self._chol = np.linalg.cholesky(self.scale)
        except np.linalg.LinAlgError:
            raise ValueError("scale matrix must be positive definite") from None

    @property
    def dim(self) -> int:
        return self.loc.shape[0]

    def sample(self, rng, size=None):
        gen = as_generator(rng)
        n = 1 if size is None else size
        z = gen.standard_normal((n, self.dim)) @ self._chol.T
        g = np.sqrt(self.df / gen.chisquare(self.df, n))
        draws = self.loc + z * g[:, None]
        if size is None:
            return float(draws[0, 0]) if self._scalar else draws[0]
        return draws[:, 0] if self._scalar else draws

    def log_density(self, x):
        df = self.df
        if self._scalar:
            s = self._chol[0, 0]
            z = (np.asarray(x, dtype=float) - self.loc[0]) / s
            with np.errstate(over="ignore"):
                return (
                    gammaln(0.5 * (df + 1.0))
                    - gammaln(0.5 * df)
                    - 0.5 * math.log(df * math.pi)
                    - math.log(s)
                    - 0.5 * (df + 1.0) * np.log1p(z * z / df)
                )[()]
        x = np.asarray(x, dtype=float)
        if x.shape != self.loc.shape:
            raise ValueError(f"point has shape {x.shape}, expected {self.loc.shape}")
        d = self.dim
        u = np.linalg.solve(self._chol, x - self.loc)
        logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))
        return (
            gammaln(0.5 * (df + d))
            - gammaln(0.5 * df)
            - 0.5 * d * math.log(df * math.pi)
            - 0.5 * logdet
            - 0.5 * (df + d) * np.log1p(u @ u / df)
        )


@dataclass
class FoldedT:
    """|X| for X univariate Student t. For loc=0 the density is 2 t(x)."""

    df: float
    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        self._base = StudentT(self.loc, self.scale, self.df)

    def sample(self, rng, size=None):
        return np.abs(self._base.sample(rng, size))

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        if self.loc == 0.0:
            out = math.log(2.0) + self._base.log_density(x)
        else:
            out = np.logaddexp(self._base.log_density(x), self._base.log_density(-x))
        return np.where(x >= 0.0, out, -np.inf)[()]


@dataclass
class Beta:
    a: float
    b: float

    def __post_init__(self) -> None:
        self.a = _finite_scalar(self.a)
        self.b = _finite_scalar(self.b)
        _require(self.a > 0.0, "a must be positive")
        _require(self.b > 0.0, "b must be positive")

    def sample(self, rng, size=None):
        return as_generator(rng).beta(self.a, self.b, size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                (self.a - 1.0) * np.log(x)
                + (self.b - 1.0) * np.log1p(-x)
                - betaln(self.a, self.b)
            )
        return np.where((x > 0.0) & (x < 1.0), out, -np.inf)[()]


@dataclass
class ChiSquared:
    df: float

    def __post_init__(self) -> None:
        self.df = _finite_scalar(self.df)
        _require(self.df > 0.0, "df must be positive")

    def sample(self, rng, size=None):
        return as_generator(rng).chisquare(self.df, size)

    def log_density(self, x):
        return Gamma(0.5 * self.df, 0.5).log_density(x)


@dataclass
class Uniform:
    low: float
    high: float

    def __post_init__(self) -> None:
        self.low = _finite_scalar(self.low)
        self.high = _finite_scalar(self.high)
        _require(self.high > self.low, "high must exceed low")

    def sample(self, rng, size=None):
        return as_generator(rng).uniform(self.low, self.high, size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.low) & (x <= self.high)
        return np.where(inside, -math.log(self.high - self.low), -np.inf)[()]


@dataclass
class Bernoulli:
    p: float

    def __post_init__(self) -> None:
        self.p = _finite_scalar(self.p)
        _require(0.0 <= self.p <= 1.0, "p must lie in [0, 1]")

    def sample(self, rng, size=None):
        draw = as_generator(rng).random(size) < self.p
        return int(draw) if size is None else draw.astype(np.int64)

    def log_density(self, x):
        x = float(x)
        if x == 1.0:
            return math.log(self.p) if self.p > 0.0 else -np.inf
        if x == 0.0:
            return math.log1p(-self.p) if self.p < 1.0 else -np.inf
        return -np.inf


@dataclass
class Multinomial:
    n: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        _require(int(self.n) == self.n and self.n >= 0, "n must be a non-negative integer")
        self.n = int(self.n)
        self.probs = np.asarray(self.probs, dtype=float)
        _require(bool(np.all(self.probs >= 0.0)), "probabilities must be non-negative")
        _require(abs(self.probs.sum() - 1.0) <= 1e-12, "probabilities must sum to 1")

    def sample(self, rng, size=None):
        return as_generator(rng).multinomial(self.n, self.probs, size)

    def log_density(self, x):
        k = np.asarray(x, dtype=float)
        if k.shape != self.probs.shape:
            raise ValueError(f"point has shape {k.shape}, expected {self.probs.shape}")
        if np.any(k < 0.0) or np.any(k != np.floor(k)) or k.sum() != self.n:
            return -np.inf
        if np.any((self.probs == 0.0) & (k > 0.0)):
            return -np.inf
        with np.errstate(divide="ignore"):
            terms = np.where(k > 0.0, k * np.log(self.probs), 0.0)
        return float(gammaln(self.n + 1.0) - gammaln(k + 1.0).sum() + terms.sum())


@dataclass
class Geometric:
    """Number of trials up to and including the first success; support 1, 2, ..."""

    p: float

    def __post_init__(self) -> None:
        self.p = _finite_scalar(self.p)
        _require(0.0 < self.p <= 1.0, "p must lie in (0, 1]")

    def sample(self, rng, size=None):
        return as_generator(rng).geometric(self.p, size)

    def log_density(self, x):
        x = float(x)
        if x < 1.0 or x != math.floor(x):
            return -np.inf
        if self.p == 1.0:
            return 0.0 if x == 1.0 else -np.inf
        return (x - 1.0) * math.log1p(-self.p) + math.log(self.p)


def sample(dist, rng: "RandomStream | np.random.Generator", size=None):
    """Draw from ``dist`` using the given stream or generator."""
    return dist.sample(rng, size)


def log_density(dist, point):
    """Natural-log density of ``dist`` at ``point`` (-inf outside support)."""
    return dist.log_density(point)


def multinomial_resample(
    weights: np.ndarray,
    count: int,
    rng: "RandomStream | np.random.Generator",
) -> np.ndarray:
    """``count`` i.i.d. categorical draws over indices 0..N-1.

    Weights must be non-negative and sum to 1 within 1e-12; returns an int64
    index array. Inverse-CDF draws, so the cost is O(N + count log N).
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-D vector")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be non-negative and finite")
    total = w.sum()
    if total == 0.0:
        raise DegenerateWeightsError("all resampling weights are zero")
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"weights must sum to 1 (got {total!r})")
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    u = as_generator(rng).random(count)
    return np.searchsorted(cdf, u, side="right").astype(np.int64)
