"""Exact i.i.d. rejection baseline and the enumerable coin-flip posterior.

The rejection sampler proposes parameters straight from the prior, simulates
a confidential dataset, and accepts with the release mechanism's acceptance
ratio at the full budget, which makes every accepted draw an exact sample
from the private posterior.  The coin-flip model's posterior is also
computable outright, because its summary takes only n + 1 values: summing
the mechanism density over them gives the posterior up to quadrature on a
parameter grid.  Together these are the ground truth the filter is judged
against.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

from ._kernels import bernoulli_prior_attempts, locscale_prior_attempts
from .distributions import InverseGamma, Normal, Uniform
from .engine import (
    DEFAULT_ATTEMPT_CAP,
    AcceptanceHook,
    StallError,
    make_acceptance_hook,
)
from .mechanisms import MechanismSpec, PrivateRelease
from .models import ModelSpec, prior_sample, simulate_data
from .streams import RandomStream

__all__ = [
    "OraclePosterior",
    "RejectionDraws",
    "bernoulli_acceptance_rate",
    "bernoulli_oracle",
    "dp_reject_abc",
    "rejection_sample",
]


@dataclass(frozen=True)
class RejectionDraws:
    """Accepted parameter draws from the prior-rejection sampler."""

    samples: np.ndarray
    trial_counts: np.ndarray
    acceptance_rate: float

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[0] == 0:
            raise ValueError("samples must form a nonempty (count, dim) array")
        if self.trial_counts.shape != (self.samples.shape[0],):
            raise ValueError("one trial count per sample is required")
        if np.any(self.trial_counts < 1):
            raise ValueError("trial counts must be at least 1")
        if not 0.0 < self.acceptance_rate <= 1.0:
            raise ValueError("acceptance rate must lie in (0, 1]")

    @property
    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)


@dataclass(frozen=True)
class OraclePosterior:
    """Grid evaluation of the coin-flip private posterior."""

    theta_grid: np.ndarray
    posterior_density: np.ndarray
    posterior_mean: float

    def __post_init__(self):
        grid = self.theta_grid
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("theta_grid must be a 1-d grid")
        if np.any(np.diff(grid) <= 0.0) or grid[0] < 0.0 or grid[-1] > 1.0:
            raise ValueError("theta_grid must increase within [0, 1]")
        if self.posterior_density.shape != grid.shape:
            raise ValueError("density must align with the grid")
        if np.any(self.posterior_density < 0.0):
            raise ValueError("density must be nonnegative")
        mass = np.trapezoid(self.posterior_density, grid)
        if abs(mass - 1.0) > 1e-8:
            raise ValueError("density must integrate to 1 within 1e-8")
        if not 0.0 <= self.posterior_mean <= 1.0:
            raise ValueError("posterior mean must lie in [0, 1]")


def _resolve_budget(mech, epsilon, q):
    if epsilon is None:
        if isinstance(mech, PrivateRelease):
            epsilon = mech.mechanism.epsilon
        elif isinstance(mech, MechanismSpec):
            epsilon = mech.epsilon
        else:
            raise ValueError(
                "a bare acceptance hook does not carry the total budget; "
                "pass epsilon explicitly"
            )
    if q is None:
        spec = mech.mechanism if isinstance(mech, PrivateRelease) else mech
        q = getattr(spec, "q", None)
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    return float(epsilon), q


def rejection_sample(model: ModelSpec, hook: AcceptanceHook, epsilon: float,
                     q, rng: RandomStream,
                     max_attempts: int = DEFAULT_ATTEMPT_CAP):
    """Draw one exact private-posterior sample from its own stream.

    Returns (theta, trial_count).  The draw order per attempt is prior
    parameters, acceptance uniform, then records, matching the compiled
    loops, so the compiled and interpreted paths follow the same law.
    """
    gen = rng.generator()
    fast = (
        hook.kind == "laplace"
        and hook.s_dp is not None
        and model.name in ("locscale-normal", "bernoulli-toy")
        and hook.s_dp.size == (2 if model.name == "locscale-normal" else 1)
    )
    if fast:
        rate = epsilon / hook.delta
        if model.name == "locscale-normal" and \
                isinstance(model.prior[0], Normal) and \
                isinstance(model.prior[1], InverseGamma):
            mu, var = model.prior
            trials, th0, th1, _, _, best, status = locscale_prior_attempts(
                gen, mu.loc, mu.scale, var.shape, var.scale,
                float(hook.s_dp[0]), float(hook.s_dp[1]), rate, model.n,
                model.clamp.lower, model.clamp.upper, max_attempts,
            )
            theta = np.array([th0, th1])
        elif model.name == "bernoulli-toy" and \
                isinstance(model.prior[0], Uniform):
            u = model.prior[0]
            trials, th, _, best, status = bernoulli_prior_attempts(
                gen, u.low, u.high, float(hook.s_dp[0]), rate, model.n,
                max_attempts,
            )
            theta = np.array([th])
        else:
            fast = False
        if fast:
            if status == -2:
                raise RuntimeError("prior sampling failed to produce a "
                                   "usable variance draw")
            if status != 1:
                raise StallError(0, 0, trials, best)
            return theta, int(trials)

    best = -np.inf
    trials = 0
    while trials < max_attempts:
        trials += 1
        theta = prior_sample(model, gen)
        log_u = np.log(gen.random())
        data = simulate_data(model, theta, gen)
        log_r = float(hook.log_ratio(data, epsilon, q))
        if log_r > best:
            best = log_r
        if log_u < log_r:
            return theta, trials
    raise StallError(0, 0, trials, best)


def dp_reject_abc(model: ModelSpec, mech, s_dp, count: int,
                  rng: RandomStream, *, epsilon=None, q=None,
                  max_attempts: int = DEFAULT_ATTEMPT_CAP) -> RejectionDraws:
    """Exact rejection sampler: ``count`` i.i.d. private-posterior draws.

    ``mech`` follows the engine's convention (hook, MechanismSpec, or
    PrivateRelease); the acceptance ratio is evaluated at the full budget,
    taken from the mechanism or the ``epsilon`` override.  Sample ``i``
    draws from ``rng.child(i)``, so any subset can be reproduced alone and
    splitting the loop across workers cannot change the result.
    """
    if count < 1:
        raise ValueError("count must be a positive integer")
    if not isinstance(rng, RandomStream):
        raise TypeError("an addressable RandomStream is required")
    hook = make_acceptance_hook(mech, s_dp)
    epsilon, q = _resolve_budget(mech, epsilon, q)
    samples = np.empty((count, model.theta_dim))
    trial_counts = np.empty(count, dtype=np.int64)
    for i in range(count):
        try:
            theta, trials = rejection_sample(
                model, hook, epsilon, q, rng.child(i), max_attempts
            )
        except StallError as err:
            raise StallError(0, i, err.attempts, err.best_log_ratio) from None
        samples[i] = theta
        trial_counts[i] = trials
    return RejectionDraws(
        samples=samples,
        trial_counts=trial_counts,
        acceptance_rate=float(count / trial_counts.sum()),
    )


def bernoulli_oracle(n: int, s_dp: float, eps: float,
                     grid_size: int = 4001) -> OraclePosterior:
    """Exact coin-flip private posterior by summation over the n + 1 counts.

    The unnormalized density at theta is the binomial likelihood of each
    possible success count times the Laplace release density of ``s_dp``
    given that count, summed in log space; the prior is the model's flat
    one.  Normalization and the mean use trapezoid quadrature on a uniform
    grid, whose error at the default size is far below the Monte Carlo
    tolerances it serves.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    grid = np.linspace(0.0, 1.0, grid_size)
    k = np.arange(n + 1, dtype=float)
    log_binom = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    log_release = -eps * np.abs(s_dp - k)
    log_terms = (
        log_binom[:, None]
        + xlogy(k[:, None], grid[None, :])
        + xlog1py(n - k[:, None], -grid[None, :])
        + log_release[:, None]
    )
    log_density = logsumexp(log_terms, axis=0)
    density = np.exp(log_density - log_density.max())
    density /= np.trapezoid(density, grid)
    mean = float(np.trapezoid(grid * density, grid))
    return OraclePosterior(
        theta_grid=grid, posterior_density=density, posterior_mean=mean
    )


def bernoulli_acceptance_rate(n: int, s_dp: float, eps: float) -> float:
    """Expected acceptance probability of the coin-flip rejection sampler.

    Under the flat prior each success count is equally likely marginally
    (mass 1 / (n + 1)), so the acceptance probability has the closed form
    sum_k exp(-eps |s_dp - k|) / (n + 1).
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    k = np.arange(n + 1, dtype=float)
    return float(np.exp(-eps * np.abs(s_dp - k)).sum() / (n + 1))
