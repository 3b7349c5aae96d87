"""Tempered sequential Monte Carlo over privatized releases.

The sampler starts from prior draws and, over iterations t = 1..T with an
increasing privacy-budget schedule, repeats: multinomially resample a source
particle, perturb it with a Gaussian kernel (retrying until the draw lands in
the prior support), simulate a fresh confidential dataset, and accept with
the tempered acceptance ratio of the release mechanism.  On rejection the
cycle restarts at resampling, so each acceptance attempt is an independent
draw from the same mixture proposal; the literal variant that keeps the
resampled source fixed across rejections is available behind
``rejection_restart="reperturb"``.  Accepted particles are reweighted by
prior density over the mixture kernel density, evaluated with raw
(untruncated) kernel terms in log space, and normalized.

Every particle at every iteration draws from its own substream, addressed
``(iteration, particle)`` below the stream the caller passes in, so results
are reproducible and independent of how the per-particle loop would be
scheduled across workers.
"""

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from ._kernels import bernoulli_attempts, locscale_attempts
from .distributions import LOG_2PI, DegenerateWeightsError
from .mechanisms import (
    MechanismSpec,
    PrivateRelease,
    knorm_log_acceptance,
    laplace_log_acceptance,
    objperb_log_acceptance,
)
from .models import (
    ModelSpec,
    SyntheticData,
    logistic_design,
    prior_logdensity,
    prior_sample,
    prior_support_mask,
    simulate_data,
    summary_stats,
)
from .streams import RandomStream

DEFAULT_ATTEMPT_CAP = 10 ** 7
_SUPPORT_RETRY_CAP = 100000


class StallError(RuntimeError):
    """Raised when a particle exhausts its acceptance-attempt budget."""

    def __init__(self, iteration, particle_index, attempts, best_log_ratio):
        self.iteration = iteration
        self.particle_index = particle_index
        self.attempts = attempts
        self.best_log_ratio = best_log_ratio
        self.best_ratio = float(np.exp(best_log_ratio))
        super().__init__(
            f"particle {particle_index} at iteration {iteration} made "
            f"{attempts} attempts without acceptance; best acceptance ratio "
            f"seen {self.best_ratio:.3e} suggests the release and schedule "
            f"are jointly infeasible"
        )


@dataclass(frozen=True)
class Schedule:
    """Privacy-budget tempering plan for one run.

    ``eps_t`` must be positive and nondecreasing, with its last entry equal
    to the release's total budget.  ``kernel_scale`` is either a length-T
    vector of isotropic kernel standard deviations, the string ``adaptive``
    (kernel covariance = twice the weighted sample covariance of the
    previous particles, regularized), or the string ``prior`` (propose fresh
    prior draws, ignoring the resampled source).  ``q_t`` carries the
    per-iteration budget split of the objective-perturbation mechanism and
    is None for purely additive releases.
    """

    eps_t: np.ndarray
    kernel_scale: "np.ndarray | str" = "adaptive"
    q_t: "np.ndarray | None" = None

    def __post_init__(self):
        eps = np.asarray(self.eps_t, dtype=float)
        if eps.ndim != 1 or eps.size == 0:
            raise ValueError("eps_t must be a nonempty 1-d vector")
        if not np.all(np.isfinite(eps)) or np.any(eps <= 0.0):
            raise ValueError("eps_t entries must be positive and finite")
        if np.any(np.diff(eps) < 0.0):
            raise ValueError("eps_t must be nondecreasing")
        object.__setattr__(self, "eps_t", eps)
        ks = self.kernel_scale
        if isinstance(ks, str):
            if ks not in ("adaptive", "prior"):
                raise ValueError(
                    "kernel_scale must be a vector, 'adaptive', or 'prior'"
                )
        else:
            ks = np.asarray(ks, dtype=float)
            if ks.shape != eps.shape or np.any(ks <= 0.0):
                raise ValueError(
                    "kernel_scale vector must be positive with one entry "
                    "per iteration"
                )
            object.__setattr__(self, "kernel_scale", ks)
        if self.q_t is not None:
            q = np.asarray(self.q_t, dtype=float)
            if q.shape != eps.shape or np.any((q <= 0.0) | (q >= 1.0)):
                raise ValueError("q_t must match eps_t in length with "
                                 "entries strictly inside (0, 1)")
            object.__setattr__(self, "q_t", q)

    @property
    def T(self) -> int:
        return int(self.eps_t.size)

    @property
    def final_eps(self) -> float:
        return float(self.eps_t[-1])


def linear_schedule(eps: float, T: int, start_frac: float = 0.1,
                    **kwargs) -> Schedule:
    """Evenly spaced budgets from start_frac * eps up to eps."""
    if T < 1:
        raise ValueError("T must be at least 1")
    return Schedule(eps * np.linspace(start_frac, 1.0, T), **kwargs)


def two_step_schedule(eps: float, **kwargs) -> Schedule:
    """The (eps / 2, eps) plan used for the location-scale family."""
    return Schedule(np.array([0.5 * eps, eps]), **kwargs)


def logistic_schedule(eps: float, q: float, T: int = 10,
                      kernel_scale=0.25) -> Schedule:
    """Ten-step plan for the coefficient-plus-moments release.

    The budget rises linearly to eps while the mechanism's internal split
    stays flattened at 0.02 q until the final iteration restores q, which
    keeps the intermediate targets diffuse.  The kernel scale is
    pre-specified (scalar, broadcast across iterations).
    """
    q_t = np.full(T, 0.02 * q)
    q_t[-1] = q
    return Schedule(
        eps * np.linspace(0.1, 1.0, T),
        kernel_scale=np.full(T, float(kernel_scale)),
        q_t=q_t,
    )


@dataclass
class ParticleSet:
    """State of the sampler after one iteration.

    ``log_w_tilde`` is the exact log of the unnormalized weights;
    ``w_tilde`` is its exponential shifted so the largest entry is 1 (every
    downstream use of the unnormalized weights is scale-free).
    """

    iteration: int
    theta: np.ndarray
    summaries: np.ndarray
    log_w_tilde: np.ndarray
    w_tilde: np.ndarray
    w: np.ndarray
    trial_counts: np.ndarray

    @property
    def size(self) -> int:
        return self.theta.shape[0]

    def validate(self, model: "ModelSpec | None" = None):
        if abs(self.w.sum() - 1.0) > 1e-12:
            raise ValueError("normalized weights must sum to 1 within 1e-12")
        if not (np.all(np.isfinite(self.w_tilde))
                and np.all(self.w_tilde >= 0.0)):
            raise ValueError("unnormalized weights must be finite and >= 0")
        if not np.all(np.isfinite(self.log_w_tilde)):
            raise ValueError("log weights must be finite")
        if not np.all(self.trial_counts >= 1):
            raise ValueError("trial counts must be at least 1")
        if model is not None:
            if not np.all(prior_support_mask(model, self.theta)):
                raise ValueError("a particle left the prior support")
        return self

    def weight_cdf(self) -> np.ndarray:
        cdf = np.cumsum(self.w)
        cdf[-1] = 1.0
        return cdf


@dataclass(frozen=True)
class AcceptanceHook:
    """Evaluator of the tempered acceptance ratio for one candidate dataset.

    ``log_ratio(data, eps_t, q_t)`` must return a log-probability (<= 0);
    the engine compares it against the log of a fresh uniform.  ``s_dp`` and
    ``delta`` are carried for the compiled fast paths and for diagnostics;
    custom hooks may leave them None.
    """

    kind: str
    log_ratio: Callable
    s_dp: "np.ndarray | None" = None
    delta: "float | None" = None

    def probability(self, data: SyntheticData, eps_t: float,
                    q_t: "float | None" = None) -> float:
        return float(np.exp(min(self.log_ratio(data, eps_t, q_t), 0.0)))


def laplace_hook(s_dp, delta: float) -> AcceptanceHook:
    """Acceptance under a componentwise-Laplace release of the summaries."""
    s_dp = np.atleast_1d(np.asarray(s_dp, dtype=float))

    def log_ratio(data, eps_t, q_t=None):
        return laplace_log_acceptance(s_dp, data.summaries, delta, eps_t)

    return AcceptanceHook("laplace", log_ratio, s_dp, float(delta))


def knorm_hook(s_dp, delta: float) -> AcceptanceHook:
    """Acceptance under a sup-norm K-norm release of the summaries."""
    s_dp = np.atleast_1d(np.asarray(s_dp, dtype=float))

    def log_ratio(data, eps_t, q_t=None):
        return knorm_log_acceptance(s_dp, data.summaries, delta, eps_t)

    return AcceptanceHook("knorm-linf", log_ratio, s_dp, float(delta))


def objective_perturbation_hook(s_dp, delta: float, q: float,
                                shares=(0.9, 0.1)) -> AcceptanceHook:
    """Joint acceptance for the coefficient-plus-moments logistic release.

    ``s_dp`` is (coefficient release, covariate power sums); the tempered
    budget is split between the two mechanisms by ``shares``.  The
    per-iteration q comes from the schedule and falls back to ``q``.
    """
    s_dp = np.asarray(s_dp, dtype=float)
    if s_dp.shape != (4,):
        raise ValueError("expected a release of shape (4,)")
    share_coef, share_mom = float(shares[0]), float(shares[1])
    if not (share_coef > 0.0 and share_mom > 0.0):
        raise ValueError("both budget shares must be positive")
    coef_dp = s_dp[:2].copy()
    mom_dp = s_dp[2:].copy()

    def log_ratio(data, eps_t, q_t=None):
        split = q if q_t is None else q_t
        design, labels = logistic_design(data.raw)
        coef = objperb_log_acceptance(
            coef_dp, design, labels, delta, share_coef * eps_t, split
        )
        mom = knorm_log_acceptance(
            mom_dp, data.summaries, delta, share_mom * eps_t
        )
        return coef + mom

    return AcceptanceHook("objective-perturbation", log_ratio, s_dp,
                          float(delta))


def constant_hook(ratio: float) -> AcceptanceHook:
    """Accept every attempt with the same fixed probability."""
    if not (0.0 < ratio <= 1.0):
        raise ValueError("acceptance ratio must lie in (0, 1]")
    log_r = float(np.log(ratio))

    def log_ratio(data, eps_t, q_t=None):
        return log_r

    return AcceptanceHook("custom", log_ratio)


def make_acceptance_hook(mech, s_dp, shares=(0.9, 0.1)) -> AcceptanceHook:
    """Build the acceptance hook for a mechanism description.

    ``mech`` may be an AcceptanceHook (returned unchanged), a
    MechanismSpec, or a PrivateRelease (which supplies s_dp and the budget
    shares itself).
    """
    if isinstance(mech, AcceptanceHook):
        return mech
    if isinstance(mech, PrivateRelease):
        shares = mech.budget_shares if mech.budget_shares is not None \
            else shares
        return make_acceptance_hook(mech.mechanism, mech.s_dp, shares)
    if not isinstance(mech, MechanismSpec):
        raise TypeError(
            "mech must be an AcceptanceHook, MechanismSpec, or "
            "PrivateRelease"
        )
    if s_dp is None:
        raise ValueError("a released statistic is required")
    if mech.kind == "laplace":
        return laplace_hook(s_dp, mech.delta)
    if mech.kind == "knorm-linf":
        return knorm_hook(s_dp, mech.delta)
    return objective_perturbation_hook(s_dp, mech.delta, mech.q, shares)


# ----------------------------------------------------------------- kernels

@dataclass(frozen=True)
class GaussianKernel:
    """Gaussian perturbation kernel with a fixed covariance."""

    cov: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)
    _log_norm: float = field(init=False, repr=False)

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape[0] != cov.shape[1]:
            raise ValueError("covariance must be square")
        object.__setattr__(self, "cov", cov)
        chol = np.linalg.cholesky(cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(
            self, "_log_norm",
            0.5 * cov.shape[0] * LOG_2PI + np.log(np.diag(chol)).sum(),
        )

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    def perturb(self, base: np.ndarray, gen, support_fn) -> np.ndarray:
        """Perturb each row of ``base``, redrawing rows off support."""
        out = base + gen.standard_normal(base.shape) @ self._chol.T
        bad = ~support_fn(out)
        rounds = 0
        while bad.any():
            rounds += 1
            if rounds > _SUPPORT_RETRY_CAP:
                raise RuntimeError(
                    "perturbation cannot reach the prior support"
                )
            redraw = gen.standard_normal((int(bad.sum()), base.shape[1]))
            out[bad] = base[bad] + redraw @ self._chol.T
            bad_rows = ~support_fn(out[bad])
            idx = np.flatnonzero(bad)
            bad = np.zeros(base.shape[0], dtype=bool)
            bad[idx[bad_rows]] = True
        return out

    def log_density_chunk(self, sources: np.ndarray,
                          targets: np.ndarray) -> np.ndarray:
        """Log kernel density from every source to every target row.

        Returns shape (targets, sources).  Raw Gaussian density: no
        support truncation or acceptance conditioning enters the weights.
        """
        d = self.dim
        diff = targets[:, None, :] - sources[None, :, :]
        flat = diff.reshape(-1, d)
        # Distances vast enough to overflow the quadratic form legitimately
        # produce a log density of -inf.
        with np.errstate(over="ignore"):
            if d == 1:
                q = (flat[:, 0] / self._chol[0, 0]) ** 2
            else:
                sol = solve_triangular(self._chol, flat.T, lower=True)
                q = np.einsum("ij,ij->j", sol, sol)
            return -0.5 * q.reshape(diff.shape[:2]) - self._log_norm


@dataclass(frozen=True)
class PriorKernel:
    """Independence kernel proposing fresh prior draws."""

    model: ModelSpec

    def perturb(self, base: np.ndarray, gen, support_fn) -> np.ndarray:
        draws = [prior_sample(self.model, gen) for _ in range(base.shape[0])]
        return np.asarray(draws)

    def log_density_chunk(self, sources, targets) -> np.ndarray:
        dens = np.array(
            [prior_logdensity(self.model, th) for th in targets]
        )
        return np.broadcast_to(
            dens[:, None], (targets.shape[0], sources.shape[0])
        ).copy()


def kernel_for_iteration(schedule: Schedule, t: int, prev: ParticleSet,
                         model: ModelSpec):
    """Build iteration t's perturbation kernel from the schedule."""
    if not 1 <= t <= schedule.T:
        raise ValueError(f"iteration must lie in 1..{schedule.T}")
    ks = schedule.kernel_scale
    if isinstance(ks, str) and ks == "prior":
        return PriorKernel(model)
    if isinstance(ks, str):
        cov = 2.0 * _weighted_covariance(prev.theta, prev.w)
        cov += 1e-10 * np.eye(model.theta_dim)
        return GaussianKernel(cov)
    s = float(ks[t - 1])
    return GaussianKernel(s * s * np.eye(model.theta_dim))


def _weighted_covariance(theta: np.ndarray, w: np.ndarray) -> np.ndarray:
    mean = w @ theta
    centered = theta - mean
    return (centered * w[:, None]).T @ centered


# ------------------------------------------------------------------- steps

def initialize(model: ModelSpec, N: int, rng) -> ParticleSet:
    """Iteration-0 state: N prior draws with uniform weights."""
    if N < 2:
        raise ValueError("at least two particles are required")
    gen = rng.generator() if isinstance(rng, RandomStream) else rng
    theta = np.asarray([prior_sample(model, gen) for _ in range(N)])
    return ParticleSet(
        iteration=0,
        theta=theta,
        summaries=np.empty((N, 0)),
        log_w_tilde=np.zeros(N),
        w_tilde=np.ones(N),
        w=np.full(N, 1.0 / N),
        trial_counts=np.ones(N, dtype=np.int64),
    )


def propagate_accept(prev: ParticleSet, model: ModelSpec, mech,
                     schedule: Schedule, t: int, particle_index: int,
                     rng: RandomStream, *, kernel=None,
                     rejection_restart: str = "resample",
                     max_attempts: int = DEFAULT_ATTEMPT_CAP):
    """Produce one accepted particle for iteration t.

    Draws come from the child stream addressed by ``particle_index`` under
    ``rng``, so any subset of particles can be recomputed independently.
    Returns (theta, summaries, trial_count).  Raises StallError when
    ``max_attempts`` acceptance attempts all fail.
    """
    if rejection_restart not in ("resample", "reperturb"):
        raise ValueError("rejection_restart must be 'resample' or "
                         "'reperturb'")
    if not isinstance(rng, RandomStream):
        raise TypeError("an addressable RandomStream is required")
    if isinstance(mech, (AcceptanceHook, PrivateRelease)):
        hook = make_acceptance_hook(mech, None)
    else:
        raise TypeError(
            "mech must be an AcceptanceHook or PrivateRelease here; bind a "
            "bare MechanismSpec to its release with make_acceptance_hook"
        )
    if kernel is None:
        kernel = kernel_for_iteration(schedule, t, prev, model)
    eps_t = float(schedule.eps_t[t - 1])
    q_t = None if schedule.q_t is None else float(schedule.q_t[t - 1])
    gen = rng.child(particle_index).generator()
    cdf = prev.weight_cdf()

    fast = (
        rejection_restart == "resample"
        and hook.kind == "laplace"
        and hook.s_dp is not None
        and isinstance(kernel, GaussianKernel)
        and model.name in ("locscale-normal", "bernoulli-toy")
        and hook.s_dp.size == (2 if model.name == "locscale-normal" else 1)
    )
    if fast:
        rate = eps_t / hook.delta
        if model.name == "locscale-normal":
            L = kernel._chol
            trials, th0, th1, s0, s1, best, status = locscale_attempts(
                gen, prev.theta, cdf, L[0, 0], L[1, 0], L[1, 1],
                float(hook.s_dp[0]), float(hook.s_dp[1]), rate, model.n,
                model.clamp.lower, model.clamp.upper, max_attempts,
            )
            theta_acc = np.array([th0, th1])
            summ = np.array([s0, s1])
        else:
            trials, th, count, best, status = bernoulli_attempts(
                gen, prev.theta, cdf, float(np.sqrt(kernel.cov[0, 0])),
                float(hook.s_dp[0]), rate, model.n, max_attempts,
            )
            theta_acc = np.array([th])
            summ = np.array([count])
        if status == -2:
            raise RuntimeError("perturbation cannot reach the prior support")
        if status != 1:
            raise StallError(t, particle_index, trials, best)
        return theta_acc, summ, int(trials)

    support_fn = lambda th: prior_support_mask(model, th)
    best = -np.inf
    trials = 0
    fixed_source = None
    if rejection_restart == "reperturb":
        fixed_source = prev.theta[_pick_index(cdf, gen.random())]
    while trials < max_attempts:
        trials += 1
        if fixed_source is None:
            source = prev.theta[_pick_index(cdf, gen.random())]
        else:
            source = fixed_source
        cand = kernel.perturb(source[None, :], gen, support_fn)[0]
        log_u = np.log(gen.random())
        data = simulate_data(model, cand, gen)
        log_r = float(hook.log_ratio(data, eps_t, q_t))
        if log_r > best:
            best = log_r
        if log_u < log_r:
            return cand, data.summaries, trials
    raise StallError(t, particle_index, trials, best)


def _pick_index(cdf: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cdf, u, side="right"))


def log_reweight(thetas: np.ndarray, prev: ParticleSet, model: ModelSpec,
                 kernel, chunk: int = 512) -> np.ndarray:
    """Log unnormalized weights: prior density over mixture kernel density.

    The denominator mixes the raw kernel density from every previous
    particle, weighted by its normalized weight, and is accumulated with
    log-sum-exp in chunks so no full pairwise matrix is materialized.
    """
    thetas = np.asarray(thetas, dtype=float)
    M = thetas.shape[0]
    with np.errstate(divide="ignore"):
        log_w_prev = np.log(prev.w)
    log_denom = np.empty(M)
    for start in range(0, M, chunk):
        block = thetas[start:start + chunk]
        log_k = kernel.log_density_chunk(prev.theta, block)
        log_denom[start:start + chunk] = logsumexp(
            log_k + log_w_prev[None, :], axis=1
        )
    dead = np.flatnonzero(np.isneginf(log_denom))
    if dead.size:
        raise DegenerateWeightsError(
            f"mixture kernel density underflowed to zero for particle "
            f"{int(dead[0])} (and {dead.size - 1} more)"
        )
    log_prior = np.array([prior_logdensity(model, th) for th in thetas])
    return log_prior - log_denom


def reweight(thetas: np.ndarray, prev: ParticleSet, model: ModelSpec,
             kernel) -> np.ndarray:
    """Unnormalized weights, rescaled so the largest is 1.

    The common rescaling is harmless: normalization and effective-sample
    diagnostics are invariant to it, and it keeps the linear values
    representable when the log weights are far from zero.
    """
    log_w = log_reweight(thetas, prev, model, kernel)
    return np.exp(log_w - log_w.max())


def normalize(w_tilde: np.ndarray) -> np.ndarray:
    """Normalize nonnegative weights to a probability vector."""
    w_tilde = np.asarray(w_tilde, dtype=float)
    if w_tilde.ndim != 1 or w_tilde.size == 0:
        raise ValueError("weights must form a nonempty 1-d vector")
    if np.any(~np.isfinite(w_tilde)) or np.any(w_tilde < 0.0):
        raise ValueError("weights must be finite and nonnegative")
    if np.all(w_tilde == 0.0):
        raise DegenerateWeightsError("all weights are zero")
    with np.errstate(divide="ignore"):
        log_w = np.log(w_tilde)
    return normalize_log(log_w)


def normalize_log(log_w: np.ndarray) -> np.ndarray:
    """Normalize weights given in log space via log-sum-exp."""
    log_w = np.asarray(log_w, dtype=float)
    total = logsumexp(log_w)
    if np.isneginf(total):
        raise DegenerateWeightsError("all weights are zero")
    return np.exp(log_w - total)


@dataclass(frozen=True)
class IterationDiagnostics:
    iteration: int
    eps_t: float
    q_t: "float | None"
    ess: float
    acceptance_rate: float
    mean_trial_count: float
    max_trial_count: int
    wall_seconds: float


@dataclass(frozen=True)
class RunResult:
    particles: ParticleSet
    diagnostics: tuple


def run_dp_pf(model: ModelSpec, mech, s_dp, N: int, schedule: Schedule,
              rng: RandomStream, *, rejection_restart: str = "resample",
              max_attempts: int = DEFAULT_ATTEMPT_CAP) -> RunResult:
    """Run the full tempered sampler and return the final particles.

    ``mech`` may be a MechanismSpec (s_dp supplied separately), a
    PrivateRelease (s_dp may then be None), or a prebuilt AcceptanceHook.
    When the mechanism declares a total budget, the schedule must end
    exactly at it.
    """
    if not isinstance(rng, RandomStream):
        raise TypeError("an addressable RandomStream is required")
    hook = make_acceptance_hook(mech, s_dp)
    _check_budget_consistency(mech, schedule)

    pset = initialize(model, N, rng.child(0))
    diagnostics = []
    for t in range(1, schedule.T + 1):
        started = time.perf_counter()
        kernel = kernel_for_iteration(schedule, t, pset, model)
        iter_rng = rng.child(t)
        theta = np.empty((N, model.theta_dim))
        summaries = None
        trials = np.empty(N, dtype=np.int64)
        for i in range(N):
            th, summ, count = propagate_accept(
                pset, model, hook, schedule, t, i, iter_rng,
                kernel=kernel, rejection_restart=rejection_restart,
                max_attempts=max_attempts,
            )
            if summaries is None:
                summaries = np.empty((N, summ.size))
            theta[i] = th
            summaries[i] = summ
            trials[i] = count
        log_w = log_reweight(theta, pset, model, kernel)
        w = normalize_log(log_w)
        pset = ParticleSet(
            iteration=t,
            theta=theta,
            summaries=summaries,
            log_w_tilde=log_w,
            w_tilde=np.exp(log_w - log_w.max()),
            w=w,
            trial_counts=trials,
        ).validate(model)
        total_trials = int(trials.sum())
        diagnostics.append(IterationDiagnostics(
            iteration=t,
            eps_t=float(schedule.eps_t[t - 1]),
            q_t=None if schedule.q_t is None else float(schedule.q_t[t - 1]),
            ess=float(1.0 / np.sum(w * w)),
            acceptance_rate=N / total_trials,
            mean_trial_count=total_trials / N,
            max_trial_count=int(trials.max()),
            wall_seconds=time.perf_counter() - started,
        ))
    return RunResult(particles=pset, diagnostics=tuple(diagnostics))


def _check_budget_consistency(mech, schedule: Schedule):
    spec = None
    if isinstance(mech, PrivateRelease):
        spec = mech.mechanism
    elif isinstance(mech, MechanismSpec):
        spec = mech
    if spec is not None and spec.epsilon != schedule.final_eps:
        raise ValueError(
            f"schedule must end exactly at the release budget "
            f"{spec.epsilon}, got {schedule.final_eps}"
        )
