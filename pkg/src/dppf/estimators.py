"""Weighted posterior estimates with ESS, variance, and confidence intervals.

Every operation here is a pure reduction over a finished :class:`ParticleSet`.
The variance estimator keeps the finite-sample remainder term rather than
dropping it, so confidence intervals stay honest at moderate particle counts
where the weights are visibly non-uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import DegenerateWeightsError
from .engine import ParticleSet

__all__ = [
    "EstimateReport",
    "confidence_interval",
    "error_scaling_slope",
    "ess_hat",
    "estimate_report",
    "normal_quantile",
    "variance_hat",
    "weighted_mean",
]


@dataclass(frozen=True)
class EstimateReport:
    """Point estimates plus the uncertainty bookkeeping for one sampler run.

    ``estimate``, ``variance_hat``, ``ci_lower`` and ``ci_upper`` are aligned
    per coordinate of the test function; ``ess`` and ``n_particles`` describe
    the weight vector they were computed from.
    """

    estimate: np.ndarray
    ess: float
    variance_hat: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    alpha: float
    n_particles: int

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self.n_particles < 1:
            raise ValueError("n_particles must be positive")
        if not 1.0 <= self.ess <= self.n_particles * (1.0 + 1e-12):
            raise ValueError("ess must lie in [1, n_particles]")
        if np.any(self.variance_hat < 0.0):
            raise ValueError("variance_hat must be nonnegative")
        if np.any(self.ci_lower > self.estimate) or np.any(
            self.estimate > self.ci_upper
        ):
            raise ValueError("interval must bracket the estimate")


def _evaluate(particles: ParticleSet, phi) -> tuple[np.ndarray, bool]:
    """Apply ``phi`` to every particle; returns ``(values, was_scalar)``.

    ``values`` has shape (N, k).  Raises on any non-finite output so a bad
    test function fails loudly instead of poisoning the estimate.
    """
    rows = []
    scalar = True
    for i in range(particles.size):
        value = np.asarray(
            phi(particles.theta[i], particles.summaries[i]), dtype=float
        )
        if value.ndim > 1:
            raise ValueError("test function must return a scalar or 1-d vector")
        scalar = scalar and value.ndim == 0
        if not np.all(np.isfinite(value)):
            raise ValueError(
                f"test function returned a non-finite value at particle {i}"
            )
        rows.append(np.atleast_1d(value))
    values = np.stack(rows)
    if values.shape[0] != particles.size:
        raise ValueError("test function evaluation lost particles")
    return values, scalar


def weighted_mean(particles: ParticleSet, phi):
    """Self-normalized estimate sum_i w_i phi(theta_i, x_i).

    ``phi`` maps one (theta row, summary row) pair to a scalar or a fixed
    length vector.  Scalar-valued ``phi`` gives a float back; vector-valued
    ``phi`` gives the per-coordinate estimate vector.
    """
    values, scalar = _evaluate(particles, phi)
    estimate = values.T @ particles.w
    return float(estimate[0]) if scalar else estimate


def ess_hat(w_tilde: np.ndarray) -> float:
    """Effective sample size (sum w)^2 / sum w^2 of a nonnegative weight vector.

    Invariant under rescaling, so normalized and unnormalized weights give the
    identical answer.
    """
    w_tilde = np.asarray(w_tilde, dtype=float)
    if w_tilde.ndim != 1 or w_tilde.size == 0:
        raise ValueError("weights must form a nonempty 1-d vector")
    if np.any(~np.isfinite(w_tilde)) or np.any(w_tilde < 0.0):
        raise ValueError("weights must be finite and nonnegative")
    total = w_tilde.sum()
    if total == 0.0:
        raise DegenerateWeightsError("all weights are zero")
    return float(total * total / np.dot(w_tilde, w_tilde))


def variance_hat(particles: ParticleSet, phi):
    """Asymptotic variance estimate of the weighted mean, per coordinate.

    Two pieces: the weighted spread inflated by N/ESS, plus the finite-sample
    remainder sum_i w_i (w_i - 1/N) (phi_i - est)^2.  The remainder vanishes
    identically at uniform weights and is kept in full otherwise.
    """
    n = particles.size
    if n < 2:
        raise ValueError("variance estimation needs at least two particles")
    values, scalar = _evaluate(particles, phi)
    w = particles.w
    ess = ess_hat(w)
    estimate = values.T @ w
    centered_sq = (values - estimate) ** 2
    spread = centered_sq.T @ w
    first = spread / (ess / n)
    remainder = centered_sq.T @ (w * (w - 1.0 / n))
    out = first + remainder
    return float(out[0]) if scalar else out


def normal_quantile(p: float) -> float:
    """Standard normal quantile via rational minimax polynomials.

    Absolute error is far below 1e-9 over the full open unit interval
    (three-branch scheme: central, moderate tail, extreme tail).  Endpoints
    map to signed infinity.
    """
    if math.isnan(p) or p < 0.0 or p > 1.0:
        raise ValueError("probability must lie in [0, 1]")
    if p == 0.0:
        return -math.inf
    if p == 1.0:
        return math.inf
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r
                     + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r
                   + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r
                 + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r
               + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r
                     + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r
                   + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r
                 + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r
               + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.74545014278341407640e-4 * r
                     + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r
                   + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r
                 + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r
               + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r
                     + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r
                   + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r
                 + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r
               + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r
                     + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r
                   + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r
                 + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r
               + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r
                     + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r
                   + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r
                 + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r
               + 1.0)
    value = num / den
    return -value if q < 0.0 else value


def confidence_interval(estimate, v_hat, n_particles: int, alpha: float):
    """Two-sided interval estimate +/- z_{1-alpha/2} sqrt(v_hat / N).

    Accepts scalars or aligned arrays for ``estimate`` and ``v_hat``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    if n_particles < 1:
        raise ValueError("n_particles must be positive")
    v_hat = np.asarray(v_hat, dtype=float)
    if np.any(v_hat < 0.0) or np.any(~np.isfinite(v_hat)):
        raise ValueError("variance must be finite and nonnegative")
    z = normal_quantile(1.0 - alpha / 2.0)
    half = z * np.sqrt(v_hat / n_particles)
    estimate = np.asarray(estimate, dtype=float)
    lower = estimate - half
    upper = estimate + half
    if lower.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


def estimate_report(
    particles: ParticleSet, phi, alpha: float = 0.05
) -> EstimateReport:
    """Bundle mean, ESS, variance, and interval for one test function."""
    values, _ = _evaluate(particles, phi)
    w = particles.w
    n = particles.size
    ess = ess_hat(particles.w_tilde)
    estimate = values.T @ w
    centered_sq = (values - estimate) ** 2
    variance = centered_sq.T @ w / (ess / n) + centered_sq.T @ (
        w * (w - 1.0 / n)
    )
    lower, upper = confidence_interval(estimate, variance, n, alpha)
    return EstimateReport(
        estimate=estimate,
        ess=ess,
        variance_hat=variance,
        ci_lower=np.atleast_1d(lower),
        ci_upper=np.atleast_1d(upper),
        alpha=alpha,
        n_particles=n,
    )


def error_scaling_slope(sizes, errors) -> float:
    """Least-squares slope of log10(error) against log10(size)."""
    sizes = np.asarray(sizes, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if sizes.shape != errors.shape or sizes.ndim != 1 or sizes.size < 2:
        raise ValueError("need matched 1-d grids of at least two points")
    if np.any(sizes <= 0.0) or np.any(errors <= 0.0):
        raise ValueError("sizes and errors must be positive")
    slope, _ = np.polyfit(np.log10(sizes), np.log10(errors), 1)
    return float(slope)
