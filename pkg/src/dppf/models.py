"""Model families: priors, confidential-data simulators, and released summaries.

Each family bundles a joint prior over its parameter vector, a simulator for
the confidential records, and the map from raw records to the summary vector
that the privacy mechanism perturbs.  Parameter vectors are flat float arrays
with a fixed per-family layout (documented on the factory functions), so the
filtering engine can treat every family uniformly.

Two conventions differ between the continuous and the counting families.  The
continuous families (location-scale normal, both regression priors) clamp each
record into ``[lower, upper]`` and rescale affinely onto ``[-1, 1]`` before
summing; the counting families (bernoulli-toy, logistic-beta) publish sums of
the clipped raw values, whose natural range already matches the release
convention.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .distributions import (
    Bernoulli,
    Beta,
    ChiSquared,
    FoldedT,
    Gamma,
    InverseGamma,
    MultivariateNormal,
    Normal,
    StudentT,
    Uniform,
    Weibull,
    log_density,
    sample,
)
from .mechanisms import ClampSpec, clamp_normalize
from .streams import as_generator

MODEL_NAMES = (
    "bernoulli-toy",
    "locscale-normal",
    "linreg-conjugate",
    "linreg-nonconjugate",
    "logistic-beta",
)

_THETA_DIM = {
    "bernoulli-toy": 1,
    "locscale-normal": 2,
    "linreg-conjugate": 5,
    "linreg-nonconjugate": 5,
    "logistic-beta": 4,
}

PARAMETER_NAMES = {
    "bernoulli-toy": ("theta",),
    "locscale-normal": ("mu", "sigma2"),
    "linreg-conjugate": ("beta0", "beta1", "tau", "mu", "phi"),
    "linreg-nonconjugate": ("beta0", "beta1", "tau", "mu", "phi"),
    "logistic-beta": ("beta0", "beta1", "a", "b"),
}

# Worst-case summary movement when one record changes, in the norm the
# release mechanism for that family is calibrated to (l1 for the additive
# Laplace families, sup-norm for the K-norm / objective-perturbation pair).
SUMMARY_SENSITIVITY = {
    "bernoulli-toy": 1.0,
    "locscale-normal": 3.0,
    "linreg-conjugate": 8.0,
    "linreg-nonconjugate": 8.0,
    "logistic-beta": 2.0,
}


@dataclass(frozen=True)
class ModelSpec:
    """One model family: its prior blocks, record clamp, and sample size.

    ``prior`` holds one distribution object per parameter block, ordered to
    match the flat parameter layout.  All blocks are independent except in
    the conjugate regression family, where the coefficient block's covariance
    is scaled by the reciprocal of the noise precision; ``prior_sample`` and
    ``prior_logdensity`` apply that conditioning.
    """

    name: str
    prior: tuple
    clamp: ClampSpec
    n: int
    theta_dim: int

    def __post_init__(self):
        if self.name not in MODEL_NAMES:
            raise ValueError(f"unknown model family {self.name!r}")
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.theta_dim != _THETA_DIM[self.name]:
            raise ValueError(
                f"{self.name} has parameter dimension {_THETA_DIM[self.name]}, "
                f"got {self.theta_dim}"
            )


@dataclass(frozen=True)
class SyntheticData:
    """Raw simulated records plus their released-summary vector."""

    raw: np.ndarray
    summaries: np.ndarray


def bernoulli_toy(n: int) -> ModelSpec:
    """Coin-flip model whose posterior is exactly enumerable.

    Records are Bernoulli(theta) with a flat Uniform(0, 1) prior on the
    success probability; the released summary is the success count.
    Parameter layout: ``(success probability,)``.
    """
    return ModelSpec(
        name="bernoulli-toy",
        prior=(Uniform(0.0, 1.0),),
        clamp=ClampSpec(0.0, 1.0),
        n=n,
        theta_dim=1,
    )


def locscale_normal(
    n: int,
    prior_mean: float = 0.0,
    prior_var: float = 16.0,
    var_shape: float = 1.0,
    var_scale: float = 0.5,
    clamp: ClampSpec = ClampSpec(-5.0, 5.0),
) -> ModelSpec:
    """Normal records with unknown mean and variance.

    The mean has a normal prior and the variance an inverse-gamma prior;
    the released summaries are the first two power sums of the
    clamped-normalized records.  Parameter layout: ``(mean, variance)``.
    """
    return ModelSpec(
        name="locscale-normal",
        prior=(
            Normal(prior_mean, float(np.sqrt(prior_var))),
            InverseGamma(var_shape, var_scale),
        ),
        clamp=clamp,
        n=n,
        theta_dim=2,
    )


def linreg_nonconjugate(
    n: int,
    coef_loc=(0.0, 0.0),
    coef_scale=((1.0, 0.0), (0.0, 1.0)),
    coef_df: float = 2.0,
    noise_scale: float = 1.25,
    noise_shape: float = 2.0,
    cov_df: float = 2.0,
    clamp: ClampSpec = ClampSpec(-5.0, 5.0),
) -> ModelSpec:
    """Simple linear regression with heavy-tailed independent priors.

    Records are pairs (covariate, response): the covariate is normal with
    unknown mean and precision, the response is normal around the regression
    line with unknown precision.  The coefficient pair has a bivariate-t
    prior, the noise precision a Weibull prior, the covariate mean a
    univariate-t prior, and the covariate precision a folded-t prior.
    Parameter layout: ``(intercept, slope, noise precision, covariate mean,
    covariate precision)``.
    """
    return ModelSpec(
        name="linreg-nonconjugate",
        prior=(
            StudentT(np.asarray(coef_loc, dtype=float),
                     np.asarray(coef_scale, dtype=float), coef_df),
            Weibull(noise_scale, noise_shape),
            StudentT(0.0, 1.0, cov_df),
            FoldedT(cov_df, 0.0, 1.0),
        ),
        clamp=clamp,
        n=n,
        theta_dim=5,
    )


def linreg_conjugate(
    n: int,
    coef_loc=(0.0, 0.0),
    coef_prec=((1.0, 0.0), (0.0, 1.0)),
    noise_a: float = 2.0,
    noise_b: float = 2.0,
    cov_mean_loc: float = 0.0,
    cov_mean_var: float = 1.0,
    cov_prec_df: float = 2.0,
    clamp: ClampSpec = ClampSpec(-5.0, 5.0),
) -> ModelSpec:
    """Linear regression under the normal-gamma conjugate prior.

    Same data model as the non-conjugate family.  The noise precision is
    Gamma(noise_a / 2, noise_b / 2), and the coefficient pair given that
    precision is bivariate normal with covariance ``inv(coef_prec) /
    precision``; the stored coefficient block is the unscaled base normal.
    The covariate mean is normal, the covariate precision chi-squared.
    Parameter layout matches the non-conjugate family.
    """
    base_cov = np.linalg.inv(np.asarray(coef_prec, dtype=float))
    return ModelSpec(
        name="linreg-conjugate",
        prior=(
            MultivariateNormal(np.asarray(coef_loc, dtype=float), base_cov),
            Gamma(noise_a / 2.0, noise_b / 2.0),
            Normal(cov_mean_loc, float(np.sqrt(cov_mean_var))),
            ChiSquared(cov_prec_df),
        ),
        clamp=clamp,
        n=n,
        theta_dim=5,
    )


def logistic_beta(
    n: int,
    coef_sd: float = 4.0,
    shape_a: float = 6.0,
    shape_rate: float = 4.0,
) -> ModelSpec:
    """Logistic regression with a Beta-distributed covariate.

    The covariate Z lives on the unit interval with Z ~ Beta(a, b); the
    label is Bernoulli with log-odds ``intercept + slope * (2Z - 1)``, so the
    regression runs on the recentered covariate X = 2Z - 1 in [-1, 1].  The
    summary map publishes the first two power sums of Z (the coefficient
    release comes from objective perturbation, not from this map).
    Parameter layout: ``(intercept, slope, covariate shape a, covariate
    shape b)``.
    """
    return ModelSpec(
        name="logistic-beta",
        prior=(
            Normal(0.0, coef_sd),
            Normal(0.0, coef_sd),
            Gamma(shape_a, shape_rate),
            Gamma(shape_a, shape_rate),
        ),
        clamp=ClampSpec(0.0, 1.0),
        n=n,
        theta_dim=4,
    )


def _check_theta(model: ModelSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.theta_dim,):
        raise ValueError(
            f"expected parameter vector of shape ({model.theta_dim},), "
            f"got {theta.shape}"
        )
    return theta


def prior_sample(model: ModelSpec, rng) -> np.ndarray:
    """Draw one flat parameter vector from the model's joint prior."""
    rng = as_generator(rng)
    if model.name == "linreg-conjugate":
        coef_base, noise_prec, cov_mean, cov_prec = model.prior
        tau = sample(noise_prec, rng)
        coef = sample(
            MultivariateNormal(coef_base.mean, coef_base.cov / tau), rng
        )
        return np.concatenate(
            [coef, [tau, sample(cov_mean, rng), sample(cov_prec, rng)]]
        )
    parts = []
    for block in model.prior:
        draw = sample(block, rng)
        parts.append(np.atleast_1d(np.asarray(draw, dtype=float)))
    return np.concatenate(parts)


def prior_logdensity(model: ModelSpec, theta) -> float:
    """Joint prior log-density at a flat parameter vector; -inf off support."""
    theta = _check_theta(model, theta)
    if model.name == "linreg-conjugate":
        coef_base, noise_prec, cov_mean, cov_prec = model.prior
        tau = theta[2]
        if not (np.isfinite(tau) and tau > 0.0):
            return -np.inf
        total = log_density(noise_prec, tau)
        total += log_density(
            MultivariateNormal(coef_base.mean, coef_base.cov / tau), theta[:2]
        )
        total += log_density(cov_mean, theta[3])
        total += log_density(cov_prec, theta[4])
        return float(total)
    total = 0.0
    pos = 0
    for block in model.prior:
        # The coefficient block of the non-conjugate regression family is
        # the only multivariate prior block; everything else is scalar.
        if isinstance(block, StudentT) and not block._scalar:
            width = block.loc.size
        else:
            width = 1
        point = theta[pos] if width == 1 else theta[pos:pos + width]
        total += float(log_density(block, point))
        pos += width
        if total == -np.inf:
            return -np.inf
    return total


def simulate_data(model: ModelSpec, theta, rng) -> SyntheticData:
    """Simulate n confidential records at theta and compute their summaries.

    Raw layouts: one column of values for bernoulli-toy and
    locscale-normal; columns (covariate, response) for the regression
    families; columns (unit-interval covariate, label) for logistic-beta.
    """
    theta = _check_theta(model, theta)
    rng = as_generator(rng)
    n = model.n
    if model.name == "bernoulli-toy":
        raw = sample(Bernoulli(theta[0]), rng, size=n).reshape(n, 1)
    elif model.name == "locscale-normal":
        mean, var = theta
        raw = rng.normal(mean, np.sqrt(var), size=n).reshape(n, 1)
    elif model.name in ("linreg-conjugate", "linreg-nonconjugate"):
        b0, b1, tau, mu, phi = theta
        x = rng.normal(mu, 1.0 / np.sqrt(phi), size=n)
        y = rng.normal(b0 + b1 * x, 1.0 / np.sqrt(tau), size=n)
        raw = np.column_stack([x, y])
    else:
        b0, b1, a, b = theta
        z = sample(Beta(a, b), rng, size=n)
        labels = rng.random(n) < expit(b0 + b1 * (2.0 * z - 1.0))
        raw = np.column_stack([z, labels.astype(float)])
    return SyntheticData(raw=raw, summaries=summary_stats(model, raw))


def summary_stats(model: ModelSpec, raw) -> np.ndarray:
    """Map raw records to the summary vector the mechanism perturbs.

    locscale-normal releases (sum t, sum t^2) of the clamped-normalized
    values; the regression families release (sum y, sum xy, sum y^2, sum x,
    sum x^2) of the clamped-normalized pairs; logistic-beta releases
    (sum z, sum z^2) of the clipped unit-interval covariate; bernoulli-toy
    releases the clipped success count.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2:
        raise ValueError("raw records must be a 2-d array with n rows")
    if model.name == "bernoulli-toy":
        x = np.clip(raw[:, 0], model.clamp.lower, model.clamp.upper)
        return np.array([np.sum(x)])
    if model.name == "locscale-normal":
        t = clamp_normalize(raw[:, 0], model.clamp)
        return np.array([np.sum(t), np.sum(t * t)])
    if model.name == "logistic-beta":
        z = np.clip(raw[:, 0], model.clamp.lower, model.clamp.upper)
        return np.array([np.sum(z), np.sum(z * z)])
    x = clamp_normalize(raw[:, 0], model.clamp)
    y = clamp_normalize(raw[:, 1], model.clamp)
    return np.array(
        [np.sum(y), np.sum(x * y), np.sum(y * y), np.sum(x), np.sum(x * x)]
    )


def prior_support_mask(model: ModelSpec, thetas) -> np.ndarray:
    """Vectorized prior-support test for a batch of parameter vectors.

    Rows are flat parameter vectors; the result marks rows the perturbation
    step may keep.  This is the support of the joint prior, except that
    precision-like components must be strictly positive even where the prior
    density is positive at zero, because the data simulator needs finite
    scales there.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 2 or thetas.shape[1] != model.theta_dim:
        raise ValueError(
            f"expected batch of shape (B, {model.theta_dim}), "
            f"got {thetas.shape}"
        )
    ok = np.all(np.isfinite(thetas), axis=1)
    if model.name == "bernoulli-toy":
        return ok & (thetas[:, 0] >= 0.0) & (thetas[:, 0] <= 1.0)
    if model.name == "locscale-normal":
        return ok & (thetas[:, 1] > 0.0)
    if model.name == "logistic-beta":
        return ok & (thetas[:, 2] > 0.0) & (thetas[:, 3] > 0.0)
    return ok & (thetas[:, 2] > 0.0) & (thetas[:, 4] > 0.0)


def logistic_design(raw) -> tuple[np.ndarray, np.ndarray]:
    """Split logistic-beta records into a design matrix and label vector.

    The design has an intercept column and the recentered covariate
    2Z - 1, matching the parameterization of the coefficient prior.
    """
    raw = np.asarray(raw, dtype=float)
    design = np.column_stack([np.ones(raw.shape[0]), 2.0 * raw[:, 0] - 1.0])
    return design, raw[:, 1].copy()


def synthesize_census_like(n: int, rng) -> np.ndarray:
    """Generate (age, retired) pairs shaped like a public-census extract.

    Age is Beta(1.1, 1.1) on [0, 1]: near-uniform with softened edges.
    Retirement is Bernoulli with log-odds -3.825 + 6.822 * age, matching
    the published fit this dataset stands in for.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    rng = as_generator(rng)
    age = sample(Beta(1.1, 1.1), rng, size=n)
    retired = rng.random(n) < expit(-3.825 + 6.822 * age)
    return np.column_stack([age, retired.astype(float)])
