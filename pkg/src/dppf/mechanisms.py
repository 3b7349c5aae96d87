"""Privacy mechanisms: clamping, noise injection, and acceptance ratios.

Three release mechanisms live here. Componentwise Laplace noise for vector
summaries, the l-infinity K-norm mechanism (a single noise radius shared by
all coordinates), and objective perturbation for logistic regression (noise
enters the fitting objective rather than the fitted coefficients).

For each mechanism there are three faces:

* a *release* function that turns a confidential statistic into its
  differentially private published form,
* the *noise log-density* of the mechanism, and
* an *acceptance ratio* r = m(s_dp | x) / sup m(s_dp | .), the probability
  with which a candidate synthetic dataset x is kept when filtering. The
  supremum is taken over unconstrained statistic values; any upper bound on
  the feasible supremum keeps rejection exact, it only costs efficiency
  when the release lands outside the feasible box.

Acceptance ratios are computed in log space (`*_log_acceptance`) because
tempering multiplies exponents that underflow quickly; the plain-probability
forms just exponentiate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .streams import as_generator


class OptimizationError(RuntimeError):
    """The inner Newton solver failed to converge; with a strongly convex
    objective this signals bad inputs rather than an unlucky run."""


@dataclass(frozen=True)
class ClampSpec:
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not (self.lower < self.upper):
            raise ValueError("clamp lower bound must be below upper bound")


@dataclass(frozen=True)
class MechanismSpec:
    """Configuration of one release mechanism.

    ``kind`` is one of ``laplace``, ``knorm-linf``, ``objective-perturbation``.
    Objective perturbation additionally carries the budget fraction ``q``
    spent on its noise draw and the per-record Hessian bound ``lam``; its
    ridge coefficient gamma follows from those.
    """

    kind: str
    delta: float
    epsilon: float
    q: float | None = None
    lam: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("laplace", "knorm-linf", "objective-perturbation"):
            raise ValueError(f"unknown mechanism kind {self.kind!r}")
        if not self.delta > 0.0:
            raise ValueError("sensitivity must be positive")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.kind == "objective-perturbation":
            if self.q is None or not 0.0 < self.q < 1.0:
                raise ValueError("objective perturbation needs q in (0, 1)")
            if self.lam is None or not self.lam > 0.0:
                raise ValueError("objective perturbation needs a positive Hessian bound")

    @property
    def gamma(self) -> float:
        if self.kind != "objective-perturbation":
            raise ValueError("gamma is defined only for objective perturbation")
        return regularizer_gamma(self.epsilon, self.q, self.lam)


@dataclass(frozen=True)
class PrivateRelease:
    """A published statistic plus the mechanism that produced it."""

    s_dp: np.ndarray
    mechanism: MechanismSpec
    budget_shares: tuple[float, ...] = (1.0,)

    def __post_init__(self) -> None:
        shares = np.asarray(self.budget_shares, dtype=float)
        if np.any(shares <= 0.0) or abs(shares.sum() - 1.0) > 1e-12:
            raise ValueError("budget shares must be positive and sum to 1")


def clamp_normalize(values, clamp: ClampSpec):
    """Clamp into [lower, upper], then map affinely onto [-1, 1]."""
    v = np.clip(np.asarray(values, dtype=float), clamp.lower, clamp.upper)
    return 2.0 * (v - clamp.lower) / (clamp.upper - clamp.lower) - 1.0


def compose_budget(epsilon: float, shares) -> np.ndarray:
    """Split a total budget into per-release budgets; basic composition."""
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    shares = np.asarray(shares, dtype=float)
    if np.any(shares <= 0.0):
        raise ValueError("budget shares must be positive")
    if abs(shares.sum() - 1.0) > 1e-12:
        raise ValueError(f"budget shares must sum to 1 (got {shares.sum()!r})")
    return shares * epsilon


# -- componentwise Laplace -------------------------------------------------

def laplace_release(stats, delta: float, epsilon: float, rng) -> np.ndarray:
    """Add i.i.d. Laplace(delta/epsilon) noise to each component."""
    stats = np.asarray(stats, dtype=float)
    scale = delta / epsilon
    return stats + as_generator(rng).laplace(0.0, scale, stats.shape)


def laplace_log_acceptance(stats_of_x, s_dp, delta: float, eps_t: float):
    gaps = np.abs(np.asarray(s_dp, dtype=float) - np.asarray(stats_of_x, dtype=float))
    return -(eps_t / delta) * gaps.sum(axis=-1)


def laplace_acceptance(stats_of_x, s_dp, delta: float, eps_t: float):
    """exp(-(eps_t/delta) * l1 gap); 1 exactly when the summaries match."""
    return np.exp(laplace_log_acceptance(stats_of_x, s_dp, delta, eps_t))


# -- l-infinity K-norm -----------------------------------------------------

def knorm_linf_sample(c: float, d: int, rng, size=None) -> np.ndarray:
    """Draw with density proportional to exp(-c * max_j |v_j|).

    Radius r ~ Gamma(shape d+1, rate c) times a uniform point of the
    l-infinity unit ball; the extra unit of shape is exactly what the
    d-dimensional volume element eats, leaving ||V||_inf ~ Gamma(d, c).
    Returns shape (d,), or (size, d) when ``size`` is given.
    """
    if not c > 0.0:
        raise ValueError("noise rate must be positive")
    if not (int(d) == d and d >= 1):
        raise ValueError("dimension must be a positive integer")
    d = int(d)
    gen = as_generator(rng)
    if size is None:
        return gen.gamma(d + 1, 1.0 / c) * gen.uniform(-1.0, 1.0, d)
    r = gen.gamma(d + 1, 1.0 / c, size)
    return r[:, None] * gen.uniform(-1.0, 1.0, (size, d))


def knorm_log_density(v, c: float, d: int):
    """Normalized log-density of the l-infinity K-norm noise."""
    v = np.asarray(v, dtype=float)
    norm = d * math.log(2.0) + math.lgamma(d + 1.0) - d * math.log(c)
    return -c * np.abs(v).max(axis=-1) - norm


def knorm_log_acceptance(stats_of_z, z_dp, delta: float, eps_t: float):
    gap = np.abs(np.asarray(stats_of_z, dtype=float) - np.asarray(z_dp, dtype=float))
    return -(eps_t / delta) * gap.max(axis=-1)


def knorm_acceptance(stats_of_z, z_dp, delta: float, eps_t: float):
    """exp(-(eps_t/delta) * l-infinity gap)."""
    return np.exp(knorm_log_acceptance(stats_of_z, z_dp, delta, eps_t))


# -- objective perturbation ------------------------------------------------

def regularizer_gamma(epsilon: float, q: float, lam: float) -> float:
    """Ridge coefficient lam / (exp(epsilon*(1-q)) - 1); always positive."""
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if not lam > 0.0:
        raise ValueError("Hessian bound must be positive")
    return lam / math.expm1(epsilon * (1.0 - q))


def logistic_loss_total(design, labels, theta) -> float:
    """Sum over records of log(1 + exp(x't)) - y * x't."""
    t = np.asarray(design, dtype=float) @ np.asarray(theta, dtype=float)
    return float(np.sum(np.logaddexp(0.0, t) - np.asarray(labels, dtype=float) * t))


def logistic_grad_total(design, labels, theta) -> np.ndarray:
    X = np.asarray(design, dtype=float)
    p = expit(X @ np.asarray(theta, dtype=float))
    return X.T @ (p - np.asarray(labels, dtype=float))


def logistic_hessian_total(design, theta) -> np.ndarray:
    X = np.asarray(design, dtype=float)
    p = expit(X @ np.asarray(theta, dtype=float))
    return (X * (p * (1.0 - p))[:, None]).T @ X


def fit_penalized_logistic(design, labels, gamma: float, v,
                           tol: float = 1e-8, max_iter: int = 200) -> np.ndarray:
    """Minimize sum_i l(theta; x_i, y_i) + (gamma/2)|theta|^2 + v'theta.

    Damped Newton with halving line search. The objective is strongly
    convex for gamma > 0 (and coercive for gamma = 0 on non-separable
    data), so hitting the iteration cap raises rather than returning a
    half-converged point.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(labels, dtype=float)
    v = np.asarray(v, dtype=float)
    d = X.shape[1]
    theta = np.zeros(d)

    def objective(th):
        return logistic_loss_total(X, y, th) + 0.5 * gamma * th @ th + v @ th

    f = objective(theta)
    for _ in range(max_iter):
        g = logistic_grad_total(X, y, theta) + gamma * theta + v
        if np.abs(g).max() <= tol:
            return theta
        H = logistic_hessian_total(X, theta) + gamma * np.eye(d)
        step = np.linalg.solve(H, g)
        scale = 1.0
        while scale >= 2.0**-40:
            trial = theta - scale * step
            f_trial = objective(trial)
            if f_trial <= f - 1e-4 * scale * (g @ step):
                theta, f = trial, f_trial
                break
            scale *= 0.5
        else:
            raise OptimizationError("line search failed to find a decrease")
    g = logistic_grad_total(X, y, theta) + gamma * theta + v
    if np.abs(g).max() <= tol:
        return theta
    raise OptimizationError(
        f"Newton did not reach tolerance {tol} in {max_iter} iterations"
    )


def objective_perturbation(design, labels, delta: float, epsilon: float,
                           q: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Release logistic coefficients by perturbing the fitting objective.

    Draws V with density proportional to exp(-(epsilon*q/delta)*||V||_inf),
    then solves the V-tilted ridge-penalized logistic fit. Returns both the
    released coefficients and the drawn noise (the latter is recoverable
    from the former given the data, which is what the acceptance ratio
    exploits).
    """
    X = np.asarray(design, dtype=float)
    d = X.shape[1]
    lam = d / 4.0
    gamma = regularizer_gamma(epsilon, q, lam)
    v = knorm_linf_sample(epsilon * q / delta, d, rng)
    theta = fit_penalized_logistic(X, labels, gamma, v)
    return theta, v


def implied_noise(theta_dp, design, labels, gamma: float) -> np.ndarray:
    """The noise vector that would have produced theta_dp on this dataset:
    V = -(gamma*theta + total log-loss gradient)."""
    theta_dp = np.asarray(theta_dp, dtype=float)
    return -(gamma * theta_dp + logistic_grad_total(design, labels, theta_dp))


def objperb_log_acceptance(theta_dp, design, labels, delta: float,
                           eps_t: float, q_t: float):
    X = np.asarray(design, dtype=float)
    d = X.shape[1]
    gamma = regularizer_gamma(eps_t, q_t, d / 4.0)
    v = implied_noise(theta_dp, X, labels, gamma)
    hess = logistic_hessian_total(X, theta_dp)
    if not np.all(np.isfinite(hess)):
        raise ArithmeticError("non-finite Hessian")
    eigs = np.linalg.eigvalsh(hess)
    if not np.all(np.isfinite(eigs)):
        raise ArithmeticError("non-finite Hessian eigenvalues")
    log_det_ratio = d * math.log(gamma) - np.sum(np.log(gamma + eigs))
    return -(eps_t * q_t / delta) * np.abs(v).max() + log_det_ratio


def objperb_acceptance(theta_dp, design, labels, delta: float,
                       eps_t: float, q_t: float):
    """Probability of keeping a candidate dataset given the released fit.

    The exponential factor penalizes the l-infinity size of the implied
    noise; the determinant factor gamma^d / prod(gamma + eig_i) accounts
    for the fit-to-noise change of variables. Both lie in (0, 1].
    """
    return math.exp(objperb_log_acceptance(theta_dp, design, labels,
                                           delta, eps_t, q_t))


def objperb_release_log_density(theta_dp, design, labels, delta: float,
                                epsilon: float, q: float):
    """Log of the release-density form the acceptance ratio is built on:
    noise log-density at the implied V minus log det(gamma*I + Hessian).

    With this form, objperb_log_acceptance is exactly this density minus
    its dataset-supremum (noise mode, all Hessian eigenvalues zero), so
    rejection is exact by construction. The adjacency bound exp(epsilon)
    holds for ratios of this quantity: the noise factor moves by at most
    exp(epsilon*q) and the determinant factor by at most
    exp(epsilon*(1-q)) when one record changes.
    """
    X = np.asarray(design, dtype=float)
    d = X.shape[1]
    gamma = regularizer_gamma(epsilon, q, d / 4.0)
    v = implied_noise(theta_dp, X, labels, gamma)
    sign, logabsdet = np.linalg.slogdet(
        gamma * np.eye(d) + logistic_hessian_total(X, theta_dp)
    )
    assert sign > 0.0
    return float(knorm_log_density(v, epsilon * q / delta, d) - logabsdet)
