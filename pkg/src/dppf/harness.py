"""Config-driven benchmark runner: replicate loops, coverage, and outputs.

Experiments are described by a sectioned key/value text file with a closed
schema: unknown sections or keys are errors, and every run is fully
determined by the file plus the master seed.  Three runners cover the three
study shapes: ``run_experiment`` sweeps a budget-by-sample-size grid of
replicates, ``run_coverage`` repeats the filter at a fixed release to
measure interval coverage against the enumerable toy posterior, and
``run_logistic_analysis`` performs the private logistic regression on
synthesized census-like records.

Outputs split into deterministic artifacts (result CSVs, JSON summaries,
plot-ready .dat files) and a timing sidecar CSV per runner; wall-clock
numbers never enter the deterministic files, so reruns are byte-identical
regardless of machine load or worker count.  Timed spans cover the sampler
call only, excluding data synthesis and I/O.
"""

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import bernoulli_oracle, dp_reject_abc
from .engine import (
    DEFAULT_ATTEMPT_CAP,
    Schedule,
    StallError,
    linear_schedule,
    logistic_schedule,
    run_dp_pf,
    two_step_schedule,
)
from .estimators import confidence_interval, estimate_report
from .mechanisms import (
    MechanismSpec,
    PrivateRelease,
    compose_budget,
    fit_penalized_logistic,
    knorm_linf_sample,
    laplace_release,
    objective_perturbation,
)
from .models import (
    MODEL_NAMES,
    PARAMETER_NAMES,
    SUMMARY_SENSITIVITY,
    bernoulli_toy,
    linreg_conjugate,
    linreg_nonconjugate,
    locscale_normal,
    logistic_beta,
    logistic_design,
    simulate_data,
    summary_stats,
    synthesize_census_like,
)
from .streams import (
    DOMAIN_BASELINE,
    DOMAIN_DATA,
    DOMAIN_FILTER,
    DOMAIN_RELEASE,
    RandomStream,
)

CSV_SCHEMA_VERSION = 1

__all__ = [
    "CSV_SCHEMA_VERSION",
    "ConfigError",
    "ExperimentConfig",
    "InfeasibleExperimentError",
    "ResultRow",
    "load_config",
    "parse_config",
    "preset_text",
    "result_columns",
    "run_coverage",
    "run_experiment",
    "run_logistic_analysis",
]


class ConfigError(ValueError):
    """A config file failed to parse or validate."""


class InfeasibleExperimentError(RuntimeError):
    """Every sampler run in an experiment stalled."""


# -------------------------------------------------------------- config

def _parse_int(raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}") from None


def _parse_float(raw):
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}") from None
    if math.isnan(value):
        raise ConfigError("nan is not a valid config number")
    return value


def _parse_ints(raw):
    return tuple(_parse_int(part) for part in _split(raw))


def _parse_floats(raw):
    return tuple(_parse_float(part) for part in _split(raw))


def _split(raw):
    parts = [part.strip() for part in str(raw).split(",")]
    parts = [part for part in parts if part]
    if not parts:
        raise ConfigError("expected a nonempty comma-separated list")
    return parts


def _parse_str(raw):
    return str(raw).strip()


def _parse_kernel(raw):
    text = str(raw).strip()
    if text in ("adaptive", "prior"):
        return text
    value = _parse_float(text)
    if not value > 0.0:
        raise ConfigError("a numeric kernel scale must be positive")
    return value


def _parse_phi(raw):
    text = str(raw).strip()
    if text == "all":
        return None
    return _parse_ints(text)


_SCHEMA = {
    "experiment": {
        "kind": _parse_str,
        "model": _parse_str,
        "sampler": _parse_str,
        "replicates": _parse_int,
        "master_seed": _parse_int,
        "workers": _parse_int,
        "phi": _parse_phi,
        "out_dir": _parse_str,
    },
    "model": {
        "n_grid": _parse_ints,
        "true_theta": _parse_floats,
        "prior_mean": _parse_float,
        "prior_var": _parse_float,
        "var_shape": _parse_float,
        "var_scale": _parse_float,
        "noise_scale": _parse_float,
        "noise_shape": _parse_float,
        "noise_a": _parse_float,
        "noise_b": _parse_float,
        "cov_mean_var": _parse_float,
        "coef_sd": _parse_float,
        "shape_a": _parse_float,
        "shape_rate": _parse_float,
    },
    "mechanism": {
        "kind": _parse_str,
        "delta": _parse_float,
        "epsilon_grid": _parse_floats,
        "shares": _parse_floats,
        "q": _parse_float,
    },
    "schedule": {
        "kind": _parse_str,
        "t": _parse_int,
        "start_frac": _parse_float,
        "kernel": _parse_kernel,
    },
    "sampler": {
        "n_particles": _parse_int,
        "rejection_restart": _parse_str,
        "max_attempts": _parse_int,
        "reject_count": _parse_int,
        "alpha": _parse_float,
    },
    "coverage": {
        "s_dp": _parse_floats,
        "particles_grid": _parse_ints,
        "runs": _parse_int,
    },
    "logistic": {
        "curve_points": _parse_int,
        "curve_keep": _parse_float,
    },
}

_HYPER_KEYS = {
    "bernoulli-toy": (),
    "locscale-normal": ("prior_mean", "prior_var", "var_shape", "var_scale"),
    "linreg-nonconjugate": ("noise_scale", "noise_shape"),
    "linreg-conjugate": ("noise_a", "noise_b", "cov_mean_var"),
    "logistic-beta": ("coef_sd", "shape_a", "shape_rate"),
}

_DEFAULT_TRUTH = {
    "bernoulli-toy": (0.5,),
    "locscale-normal": (1.0, 1.0),
    "linreg-conjugate": (1.0, 2.0, 1.0, 0.0, 1.0),
    "linreg-nonconjugate": (1.0, 2.0, 1.0, 0.0, 1.0),
    "logistic-beta": (1.0, 3.0, 1.5, 1.5),
}

_DEFAULT_SCHEDULE = {
    "bernoulli-toy": ("linear", 4),
    "locscale-normal": ("two-step", 2),
    "linreg-conjugate": ("linear", 10),
    "linreg-nonconjugate": ("linear", 10),
    "logistic-beta": ("logistic", 10),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully typed description of one experiment."""

    kind: str
    model: str
    sampler: str
    replicates: int
    master_seed: int
    workers: int
    phi: "tuple[int, ...] | None"
    out_dir: str
    n_grid: "tuple[int, ...]"
    true_theta: "tuple[float, ...] | None"
    hyper: "tuple[tuple[str, float], ...]"
    mech_kind: str
    delta: "float | None"
    eps_grid: "tuple[float, ...]"
    shares: "tuple[float, ...]"
    q: "float | None"
    schedule_kind: str
    big_t: int
    start_frac: float
    kernel: "str | float"
    n_particles: int
    rejection_restart: str
    max_attempts: int
    reject_count: int
    alpha: float
    cov_s_dp: "tuple[float, ...] | None"
    cov_particles_grid: "tuple[int, ...] | None"
    cov_runs: "int | None"
    curve_points: int
    curve_keep: float

    def __post_init__(self):
        if self.kind not in ("simulate", "coverage", "logistic"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.model not in MODEL_NAMES:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.sampler not in ("dp-pf", "dp-reject-abc"):
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if self.workers < 0:
            raise ConfigError("workers must be nonnegative (0 = all cores)")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ConfigError("n_grid must list positive record counts")
        if not self.eps_grid or any(e <= 0.0 for e in self.eps_grid):
            raise ConfigError("epsilon_grid must list positive budgets")
        if self.n_particles < 2:
            raise ConfigError("n_particles must be at least 2")
        if self.reject_count < 1:
            raise ConfigError("reject_count must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie strictly between 0 and 1")
        if self.rejection_restart not in ("resample", "reperturb"):
            raise ConfigError("rejection_restart must be 'resample' or "
                              "'reperturb'")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be positive")
        if self.schedule_kind not in ("linear", "two-step", "logistic"):
            raise ConfigError(f"unknown schedule kind {self.schedule_kind!r}")
        if self.big_t < 1:
            raise ConfigError("the iteration count must be positive")
        if self.schedule_kind == "two-step" and self.big_t != 2:
            raise ConfigError("the two-step plan fixes the iteration "
                              "count at 2")
        if not 0.0 < self.start_frac <= 1.0:
            raise ConfigError("start_frac must lie in (0, 1]")
        if self.mech_kind not in ("laplace", "knorm-linf",
                                  "objective-perturbation"):
            raise ConfigError(f"unknown mechanism kind {self.mech_kind!r}")
        if self.delta is not None and not self.delta > 0.0:
            raise ConfigError("delta must be positive")
        dim = len(PARAMETER_NAMES[self.model])
        if self.phi is not None:
            if not self.phi or any(not 0 <= i < dim for i in self.phi):
                raise ConfigError(
                    f"phi indices must lie in 0..{dim - 1} for {self.model}"
                )
        if self.true_theta is not None and len(self.true_theta) != dim:
            raise ConfigError(
                f"true_theta needs {dim} components for {self.model}"
            )
        for key, _ in self.hyper:
            if key not in _HYPER_KEYS[self.model]:
                raise ConfigError(
                    f"hyperparameter {key!r} does not apply to {self.model}"
                )
        if self.kind == "simulate":
            if self.mech_kind not in ("laplace", "knorm-linf"):
                raise ConfigError(
                    "simulate supports additive releases only; use the "
                    "logistic runner for objective perturbation"
                )
            if any(math.isinf(e) for e in self.eps_grid):
                raise ConfigError("simulate budgets must be finite")
        if self.kind == "coverage":
            if self.cov_s_dp is None or self.cov_particles_grid is None \
                    or self.cov_runs is None:
                raise ConfigError(
                    "coverage needs s_dp, particles_grid, and runs"
                )
            if self.model not in ("bernoulli-toy", "linreg-nonconjugate"):
                raise ConfigError(
                    "coverage needs the enumerable toy model or the fixed "
                    "regression release"
                )
            if len(self.eps_grid) != 1 or len(self.n_grid) != 1:
                raise ConfigError(
                    "coverage uses a single budget and record count"
                )
            if any(n < 2 for n in self.cov_particles_grid):
                raise ConfigError("particles_grid entries must be at least 2")
            if self.cov_runs < 1:
                raise ConfigError("runs must be positive")
        if self.kind == "logistic":
            if self.model != "logistic-beta":
                raise ConfigError("the logistic runner fixes the model")
            if self.mech_kind != "objective-perturbation":
                raise ConfigError(
                    "the logistic runner uses objective perturbation"
                )
            if self.q is None or not 0.0 < self.q < 1.0:
                raise ConfigError("logistic runs need q in (0, 1)")
            if len(self.shares) != 2:
                raise ConfigError("logistic runs split the budget two ways")
            if len(self.n_grid) != 1:
                raise ConfigError("logistic runs use a single record count")
            if self.curve_points < 2:
                raise ConfigError("curve_points must be at least 2")
            if not 0.0 < self.curve_keep <= 1.0:
                raise ConfigError("curve_keep must lie in (0, 1]")
        shares = np.asarray(self.shares, dtype=float)
        if np.any(shares <= 0.0) or abs(shares.sum() - 1.0) > 1e-12:
            raise ConfigError("shares must be positive and sum to 1")
        # A schedule must be constructible at every finite budget.
        for eps in self.eps_grid:
            if math.isfinite(eps):
                build_schedule(self, eps)

    def parameter_indices(self):
        dim = len(PARAMETER_NAMES[self.model])
        return tuple(range(dim)) if self.phi is None else self.phi

    def parameter_labels(self):
        names = PARAMETER_NAMES[self.model]
        return tuple(names[i] for i in self.parameter_indices())


def parse_config(text: str, expected_kind: "str | None" = None
                 ) -> ExperimentConfig:
    """Parse and validate config text; raises ConfigError on any problem."""
    parser = ConfigParser(interpolation=None,
                          inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except ConfigParserError as err:
        raise ConfigError(f"unparsable config: {err}") from None
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[(section, key)] = _SCHEMA[section][key](raw)

    def get(section, key, default=None):
        return values.pop((section, key), default)

    kind = get("experiment", "kind")
    if kind is None:
        raise ConfigError("[experiment] kind is required")
    if kind not in ("simulate", "coverage", "logistic"):
        raise ConfigError(f"unknown experiment kind {kind!r}")
    if expected_kind is not None and kind != expected_kind:
        raise ConfigError(
            f"config describes a {kind!r} experiment, not {expected_kind!r}"
        )
    model = get("experiment", "model",
                {"coverage": "bernoulli-toy",
                 "logistic": "logistic-beta"}.get(kind))
    if model is None:
        raise ConfigError("[experiment] model is required")
    if model not in MODEL_NAMES:
        raise ConfigError(f"unknown model {model!r}")
    seed = get("experiment", "master_seed")
    if seed is None:
        raise ConfigError("[experiment] master_seed is required")
    hyper = tuple(
        (key, values.pop(("model", key)))
        for key in _HYPER_KEYS.get(model, ())
        if ("model", key) in values
    )
    default_sched, default_t = _DEFAULT_SCHEDULE[model]
    sched_kind = get("schedule", "kind", default_sched)
    big_t = get("schedule", "t",
                2 if sched_kind == "two-step" else default_t)
    n_grid = get("model", "n_grid",
                 (20,) if kind == "coverage"
                 else (1000,) if kind == "logistic" else None)
    if n_grid is None:
        raise ConfigError("[model] n_grid is required")
    eps_grid = get("mechanism", "epsilon_grid")
    if eps_grid is None:
        raise ConfigError("[mechanism] epsilon_grid is required")
    n_particles = get("sampler", "n_particles")
    if n_particles is None:
        raise ConfigError("[sampler] n_particles is required")
    mech_kind = get("mechanism", "kind",
                    "objective-perturbation" if kind == "logistic"
                    else "laplace")
    config = ExperimentConfig(
        kind=kind,
        model=model,
        sampler=get("experiment", "sampler", "dp-pf"),
        replicates=get("experiment", "replicates", 1),
        master_seed=seed,
        workers=get("experiment", "workers", 0),
        phi=get("experiment", "phi", None),
        out_dir=get("experiment", "out_dir", "results"),
        n_grid=n_grid,
        true_theta=get("model", "true_theta", None),
        hyper=hyper,
        mech_kind=mech_kind,
        delta=get("mechanism", "delta", None),
        eps_grid=eps_grid,
        shares=get("mechanism", "shares",
                   (0.9, 0.1) if kind == "logistic" else (1.0,)),
        q=get("mechanism", "q", 0.5 if kind == "logistic" else None),
        schedule_kind=sched_kind,
        big_t=big_t,
        start_frac=get("schedule", "start_frac", 0.1),
        kernel=get("schedule", "kernel",
                   0.25 if sched_kind == "logistic" else "adaptive"),
        n_particles=n_particles,
        rejection_restart=get("sampler", "rejection_restart", "resample"),
        max_attempts=get("sampler", "max_attempts", DEFAULT_ATTEMPT_CAP),
        reject_count=get("sampler", "reject_count", 500),
        alpha=get("sampler", "alpha", 0.05),
        cov_s_dp=get("coverage", "s_dp", None),
        cov_particles_grid=get("coverage", "particles_grid", None),
        cov_runs=get("coverage", "runs", None),
        curve_points=get("logistic", "curve_points", 101),
        curve_keep=get("logistic", "curve_keep", 0.95),
    )
    if values:
        section, key = next(iter(values))
        raise ConfigError(f"key {key!r} in [{section}] does not apply "
                          f"to this experiment")
    return config


def load_config(path, expected_kind: "str | None" = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from None
    return parse_config(text, expected_kind)


def build_model(config: ExperimentConfig, n: int):
    factory = {
        "bernoulli-toy": bernoulli_toy,
        "locscale-normal": locscale_normal,
        "linreg-conjugate": linreg_conjugate,
        "linreg-nonconjugate": linreg_nonconjugate,
        "logistic-beta": logistic_beta,
    }[config.model]
    return factory(n, **dict(config.hyper))


def build_schedule(config: ExperimentConfig, eps: float) -> Schedule:
    kernel = config.kernel
    if config.schedule_kind == "logistic":
        if isinstance(kernel, str):
            raise ConfigError(
                "the logistic plan pre-specifies a numeric kernel scale"
            )
        q = config.q if config.q is not None else 0.5
        return logistic_schedule(eps, q, config.big_t, kernel_scale=kernel)
    if config.schedule_kind == "two-step":
        if isinstance(kernel, float):
            kernel = np.full(2, kernel)
        return two_step_schedule(eps, kernel_scale=kernel)
    if isinstance(kernel, float):
        kernel = np.full(config.big_t, kernel)
    return linear_schedule(eps, config.big_t, config.start_frac,
                           kernel_scale=kernel)


# -------------------------------------------------------------- rows

@dataclass(frozen=True)
class ResultRow:
    """One sampler run: estimates, uncertainty, cost accounting."""

    replicate: int
    sampler: str
    model: str
    eps: float
    n: int
    n_particles: int
    status: str
    param_names: "tuple[str, ...]"
    estimate: "tuple[float, ...]"
    variance: "tuple[float, ...]"
    ci_lower: "tuple[float, ...]"
    ci_upper: "tuple[float, ...]"
    ess: float
    mean_trials: float
    wall_seconds: float
    seconds_per_ess: float

    def __post_init__(self):
        k = len(self.param_names)
        for name in ("estimate", "variance", "ci_lower", "ci_upper"):
            if len(getattr(self, name)) != k:
                raise ValueError(f"{name} must have one entry per parameter")
        if self.status == "ok":
            expected = self.wall_seconds / self.ess
            if not math.isclose(self.seconds_per_ess, expected,
                                rel_tol=1e-12, abs_tol=1e-15):
                raise ValueError(
                    "seconds_per_ess must equal wall_seconds / ess"
                )


def result_columns(param_names) -> "list[str]":
    columns = ["replicate", "sampler", "model", "eps", "n", "n_particles",
               "status", "ess", "mean_trials"]
    for name in param_names:
        columns += [f"est_{name}", f"var_{name}",
                    f"ci_lo_{name}", f"ci_hi_{name}"]
    return columns


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _row_record(row: ResultRow) -> "list[str]":
    record = [row.replicate, row.sampler, row.model, row.eps, row.n,
              row.n_particles, row.status, row.ess, row.mean_trials]
    for i in range(len(row.param_names)):
        record += [row.estimate[i], row.variance[i],
                   row.ci_lower[i], row.ci_upper[i]]
    return [_fmt(v) for v in record]


def _write_csv(path, header, records):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(records)


def _write_rows(out_dir: Path, stem: str, rows: "list[ResultRow]"):
    names = rows[0].param_names
    _write_csv(out_dir / f"{stem}.csv", result_columns(names),
               [_row_record(row) for row in rows])
    _write_csv(
        out_dir / f"{stem}_timing.csv",
        ["replicate", "eps", "n", "wall_seconds", "seconds_per_ess"],
        [[_fmt(v) for v in (row.replicate, row.eps, row.n,
                            row.wall_seconds, row.seconds_per_ess)]
         for row in rows],
    )


def _write_dat(path, header_names, columns):
    rows = np.column_stack(columns)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("# " + " ".join(header_names) + "\n")
        for row in rows:
            handle.write(" ".join(repr(float(v)) for v in row) + "\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {key: _json_safe(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(value) for value in obj]
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
    return obj


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(_json_safe(payload), handle, indent=2, sort_keys=True,
                  allow_nan=False)
        handle.write("\n")


# -------------------------------------------------------------- replicates

def _released_statistic(config, model, data, delta, eps, gen):
    if config.mech_kind == "laplace":
        return laplace_release(data.summaries, delta, eps, gen)
    return data.summaries + knorm_linf_sample(
        eps / delta, data.summaries.size, gen
    )


def _phi_function(indices):
    idx = list(indices)

    def phi(theta, summaries):
        return theta[idx]

    return phi


def _failed_row(config, eps, n, rep, n_particles, attempts, wall):
    k = len(config.parameter_labels())
    nan = (float("nan"),) * k
    return ResultRow(
        replicate=rep, sampler=config.sampler, model=config.model,
        eps=eps, n=n, n_particles=n_particles, status="stalled",
        param_names=config.parameter_labels(),
        estimate=nan, variance=nan, ci_lower=nan, ci_upper=nan,
        ess=float("nan"), mean_trials=float(attempts),
        wall_seconds=wall, seconds_per_ess=float("nan"),
    )


def _simulate_replicate(config: ExperimentConfig, eps_idx: int, n_idx: int,
                        rep: int) -> ResultRow:
    eps = config.eps_grid[eps_idx]
    n = config.n_grid[n_idx]
    model = build_model(config, n)
    truth = np.asarray(
        config.true_theta or _DEFAULT_TRUTH[config.model], dtype=float
    )
    delta = config.delta if config.delta is not None \
        else SUMMARY_SENSITIVITY[config.model]
    data_gen = RandomStream(
        config.master_seed, (DOMAIN_DATA, n_idx, rep)
    ).generator()
    data = simulate_data(model, truth, data_gen)
    release_gen = RandomStream(
        config.master_seed, (DOMAIN_RELEASE, eps_idx, n_idx, rep)
    ).generator()
    s_dp = _released_statistic(config, model, data, delta, eps, release_gen)
    mech = MechanismSpec(kind=config.mech_kind, delta=delta, epsilon=eps)
    indices = config.parameter_indices()
    labels = config.parameter_labels()

    if config.sampler == "dp-reject-abc":
        stream = RandomStream(
            config.master_seed, (DOMAIN_BASELINE, eps_idx, n_idx, rep)
        )
        start = time.perf_counter()
        try:
            draws = dp_reject_abc(model, mech, s_dp, config.reject_count,
                                  stream, max_attempts=config.max_attempts)
        except StallError as err:
            return _failed_row(config, eps, n, rep, config.reject_count,
                               err.attempts, time.perf_counter() - start)
        wall = time.perf_counter() - start
        picked = draws.samples[:, list(indices)]
        est = picked.mean(axis=0)
        var = picked.var(axis=0, ddof=1)
        lo, hi = confidence_interval(est, var, config.reject_count,
                                     config.alpha)
        ess = float(config.reject_count)
        return ResultRow(
            replicate=rep, sampler=config.sampler, model=config.model,
            eps=eps, n=n, n_particles=config.reject_count, status="ok",
            param_names=labels,
            estimate=tuple(float(v) for v in est),
            variance=tuple(float(v) for v in var),
            ci_lower=tuple(float(v) for v in np.atleast_1d(lo)),
            ci_upper=tuple(float(v) for v in np.atleast_1d(hi)),
            ess=ess, mean_trials=float(draws.trial_counts.mean()),
            wall_seconds=wall, seconds_per_ess=wall / ess,
        )

    schedule = build_schedule(config, eps)
    stream = RandomStream(
        config.master_seed, (DOMAIN_FILTER, eps_idx, n_idx, rep)
    )
    start = time.perf_counter()
    try:
        result = run_dp_pf(
            model, mech, s_dp, config.n_particles, schedule, stream,
            rejection_restart=config.rejection_restart,
            max_attempts=config.max_attempts,
        )
    except StallError as err:
        return _failed_row(config, eps, n, rep, config.n_particles,
                           err.attempts, time.perf_counter() - start)
    wall = time.perf_counter() - start
    report = estimate_report(result.particles, _phi_function(indices),
                             alpha=config.alpha)
    return ResultRow(
        replicate=rep, sampler=config.sampler, model=config.model,
        eps=eps, n=n, n_particles=config.n_particles, status="ok",
        param_names=labels,
        estimate=tuple(float(v) for v in report.estimate),
        variance=tuple(float(v) for v in report.variance_hat),
        ci_lower=tuple(float(v) for v in report.ci_lower),
        ci_upper=tuple(float(v) for v in report.ci_upper),
        ess=report.ess,
        mean_trials=float(result.particles.trial_counts.mean()),
        wall_seconds=wall, seconds_per_ess=wall / report.ess,
    )


def _pool_map(config: ExperimentConfig, worker, jobs):
    workers = config.workers or (os.cpu_count() or 1)
    if workers <= 1 or len(jobs) <= 1:
        return [worker(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, jobs, chunksize=1))


def _simulate_star(args):
    return _simulate_replicate(*args)


def _cell_summary(rows: "list[ResultRow]"):
    cells = []
    keys = sorted({(row.eps, row.n) for row in rows})
    for eps, n in keys:
        members = [row for row in rows if row.eps == eps and row.n == n]
        ok = [row for row in members if row.status in ("ok", "exact")]
        names = members[0].param_names
        mean = {}
        sd = {}
        for j, name in enumerate(names):
            values = np.array([row.estimate[j] for row in ok])
            mean[name] = float(values.mean()) if ok else float("nan")
            sd[name] = float(values.std(ddof=1)) if len(ok) > 1 \
                else float("nan")
        cells.append({
            "eps": eps,
            "n": n,
            "sampler": members[0].sampler,
            "replicates": len(members),
            "failed": len(members) - len(ok),
            "mean": mean,
            "sd": sd,
            "mean_ess": float(np.mean([row.ess for row in ok]))
            if ok else float("nan"),
            "mean_trials": float(np.mean([row.mean_trials for row in ok]))
            if ok else float("nan"),
        })
    return {
        "schema_version": CSV_SCHEMA_VERSION,
        "model": rows[0].model,
        "sampler": rows[0].sampler,
        "cells": cells,
    }


def run_experiment(config: ExperimentConfig):
    """Replicate sweep over the budget-by-sample-size grid.

    Returns (rows, summary) and writes results.csv, results_timing.csv,
    and summary.json under the config's output directory.  Stalled runs
    become failed rows; the experiment only errors when nothing succeeds.
    """
    if config.kind != "simulate":
        raise ConfigError("run_experiment needs a 'simulate' config")
    jobs = [
        (config, eps_idx, n_idx, rep)
        for eps_idx in range(len(config.eps_grid))
        for n_idx in range(len(config.n_grid))
        for rep in range(config.replicates)
    ]
    rows = _pool_map(config, _simulate_star, jobs)
    if all(row.status != "ok" for row in rows):
        raise InfeasibleExperimentError(
            "every replicate stalled; the release and schedule are "
            "jointly infeasible at this attempt cap"
        )
    summary = _cell_summary(rows)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_rows(out_dir, "results", rows)
    _write_json(out_dir / "summary.json", summary)
    return rows, summary


# -------------------------------------------------------------- coverage

def _coverage_truth(config: ExperimentConfig) -> float:
    eps = config.eps_grid[0]
    n = config.n_grid[0]
    if config.model == "bernoulli-toy":
        if len(config.cov_s_dp) != 1:
            raise ConfigError("the toy release is a single count")
        return bernoulli_oracle(n, config.cov_s_dp[0], eps).posterior_mean
    # Regression preset: no enumerable posterior exists, so the reference
    # value comes from one run at several times the largest grid size.
    model = build_model(config, n)
    delta = config.delta if config.delta is not None \
        else SUMMARY_SENSITIVITY[config.model]
    mech = MechanismSpec(kind=config.mech_kind, delta=delta, epsilon=eps)
    # Grid indices address the coverage runs, so the index one past the
    # grid is free to address the reference stream.
    reference = run_dp_pf(
        model, mech, np.asarray(config.cov_s_dp, dtype=float),
        4 * max(config.cov_particles_grid), build_schedule(config, eps),
        RandomStream(config.master_seed,
                     (DOMAIN_FILTER, len(config.cov_particles_grid), 0)),
        max_attempts=config.max_attempts,
    )
    report = estimate_report(
        reference.particles, _phi_function(config.parameter_indices()),
        alpha=config.alpha,
    )
    return float(report.estimate[0])


def _coverage_run(args) -> "tuple[str, float, float, float, float]":
    config, grid_idx, run_idx = args
    eps = config.eps_grid[0]
    n = config.n_grid[0]
    model = build_model(config, n)
    delta = config.delta if config.delta is not None \
        else SUMMARY_SENSITIVITY[config.model]
    mech = MechanismSpec(kind=config.mech_kind, delta=delta, epsilon=eps)
    stream = RandomStream(
        config.master_seed, (DOMAIN_FILTER, grid_idx, run_idx)
    )
    start = time.perf_counter()
    try:
        result = run_dp_pf(
            model, mech, np.asarray(config.cov_s_dp, dtype=float),
            config.cov_particles_grid[grid_idx],
            build_schedule(config, eps), stream,
            rejection_restart=config.rejection_restart,
            max_attempts=config.max_attempts,
        )
    except StallError:
        return "stalled", float("nan"), float("nan"), float("nan"), \
            time.perf_counter() - start
    wall = time.perf_counter() - start
    report = estimate_report(
        result.particles, _phi_function(config.parameter_indices()),
        alpha=config.alpha,
    )
    return ("ok", float(report.ci_lower[0]), float(report.ci_upper[0]),
            report.ess, wall)


def run_coverage(config: ExperimentConfig):
    """Interval coverage and width against fixed-release ground truth.

    Returns (table, truth) where the table has one entry per particle
    count; writes coverage.csv, coverage_timing.csv, and the two
    plot-ready files coverage_vs_n.dat and width_vs_n.dat.
    """
    if config.kind != "coverage":
        raise ConfigError("run_coverage needs a 'coverage' config")
    truth = _coverage_truth(config)
    jobs = [
        (config, grid_idx, run_idx)
        for grid_idx in range(len(config.cov_particles_grid))
        for run_idx in range(config.cov_runs)
    ]
    outcomes = _pool_map(config, _coverage_run, jobs)
    table = []
    runs = config.cov_runs
    for grid_idx, n_particles in enumerate(config.cov_particles_grid):
        chunk = outcomes[grid_idx * runs:(grid_idx + 1) * runs]
        ok = [entry for entry in chunk if entry[0] == "ok"]
        if not ok:
            raise InfeasibleExperimentError(
                f"every coverage run stalled at {n_particles} particles"
            )
        covered = [entry[1] <= truth <= entry[2] for entry in ok]
        widths = [entry[2] - entry[1] for entry in ok]
        table.append({
            "n_particles": n_particles,
            "runs": runs,
            "failed": runs - len(ok),
            "coverage": float(np.mean(covered)),
            "mean_width": float(np.mean(widths)),
            "mean_ess": float(np.mean([entry[3] for entry in ok])),
            "mean_wall_seconds": float(np.mean([entry[4] for entry in ok])),
        })
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out_dir / "coverage.csv",
        ["n_particles", "runs", "failed", "coverage", "mean_width",
         "mean_ess"],
        [[_fmt(entry[key]) for key in
          ("n_particles", "runs", "failed", "coverage", "mean_width",
           "mean_ess")] for entry in table],
    )
    _write_csv(
        out_dir / "coverage_timing.csv",
        ["n_particles", "mean_wall_seconds"],
        [[_fmt(entry["n_particles"]), _fmt(entry["mean_wall_seconds"])]
         for entry in table],
    )
    grid = np.array([entry["n_particles"] for entry in table], dtype=float)
    _write_dat(out_dir / "coverage_vs_n.dat", ["n_particles", "coverage"],
               [grid, np.array([entry["coverage"] for entry in table])])
    _write_dat(out_dir / "width_vs_n.dat", ["n_particles", "mean_width"],
               [grid, np.array([entry["mean_width"] for entry in table])])
    _write_json(out_dir / "coverage_summary.json", {
        "schema_version": CSV_SCHEMA_VERSION,
        "model": config.model,
        "truth": truth,
        "table": [{k: v for k, v in entry.items()
                   if k != "mean_wall_seconds"} for entry in table],
    })
    return table, truth


# -------------------------------------------------------------- logistic

def _weighted_median(values, weights):
    order = np.argsort(values)
    cum = np.cumsum(weights[order])
    return float(values[order][np.searchsorted(cum, 0.5)])


def _central_curves(particles, keep: float, points: int):
    """Envelope of the most central coefficient curves, by Mahalanobis depth.

    Returns (ages, lower, upper, central) over an age grid in [0, 1].
    """
    coef = particles.theta[:, :2]
    w = particles.w
    med = np.array([_weighted_median(coef[:, j], w) for j in range(2)])
    centered = coef - med
    cov = (centered * w[:, None]).T @ centered + 1e-12 * np.eye(2)
    solved = np.linalg.solve(cov, centered.T)
    depth = np.einsum("ij,ji->i", centered, solved)
    order = np.argsort(depth)
    cum = np.cumsum(w[order])
    cutoff = depth[order][min(np.searchsorted(cum, keep),
                              depth.size - 1)]
    kept = coef[depth <= cutoff]
    ages = np.linspace(0.0, 1.0, points)
    design = np.column_stack([np.ones(points), 2.0 * ages - 1.0])
    logits = design @ kept.T
    curves = 1.0 / (1.0 + np.exp(-logits))
    central = 1.0 / (1.0 + np.exp(-(design @ med)))
    return ages, curves.min(axis=1), curves.max(axis=1), central


def _logistic_replicate(args):
    config, eps_idx, rep = args
    eps = config.eps_grid[eps_idx]
    n = config.n_grid[0]
    model = build_model(config, n)
    labels_names = config.parameter_labels()
    raw = synthesize_census_like(
        n, RandomStream(config.master_seed, (DOMAIN_DATA, rep)).generator()
    )
    design, labels = logistic_design(raw)
    delta = config.delta if config.delta is not None \
        else SUMMARY_SENSITIVITY[config.model]

    if math.isinf(eps):
        # Privacy disabled: the release is the exact unpenalized fit and
        # the data analysis reduces to it, with no sampler behind it.
        start = time.perf_counter()
        fit = fit_penalized_logistic(design, labels, 0.0, np.zeros(2))
        wall = time.perf_counter() - start
        k = len(labels_names)
        indices = config.parameter_indices()
        full = [float("nan")] * len(PARAMETER_NAMES[config.model])
        full[0], full[1] = float(fit[0]), float(fit[1])
        est = tuple(full[i] for i in indices)
        nan = (float("nan"),) * k
        row = ResultRow(
            replicate=rep, sampler="exact-fit", model=config.model,
            eps=eps, n=n, n_particles=config.n_particles, status="exact",
            param_names=labels_names, estimate=est, variance=nan,
            ci_lower=nan, ci_upper=nan, ess=float("nan"),
            mean_trials=float("nan"), wall_seconds=wall,
            seconds_per_ess=float("nan"),
        )
        return row, None

    release_gen = RandomStream(
        config.master_seed, (DOMAIN_RELEASE, eps_idx, rep)
    ).generator()
    eps_coef, eps_mom = compose_budget(eps, config.shares)
    theta_dp, _ = objective_perturbation(
        design, labels, delta, eps_coef, config.q, release_gen
    )
    moments = summary_stats(model, raw)
    mom_dp = moments + knorm_linf_sample(
        eps_mom / delta, moments.size, release_gen
    )
    s_dp = np.concatenate([theta_dp, mom_dp])
    mech = MechanismSpec(
        kind="objective-perturbation", delta=delta, epsilon=eps,
        q=config.q, lam=design.shape[1] / 4.0,
    )
    release = PrivateRelease(s_dp, mech, budget_shares=tuple(config.shares))
    stream = RandomStream(
        config.master_seed, (DOMAIN_FILTER, eps_idx, rep)
    )
    start = time.perf_counter()
    try:
        result = run_dp_pf(
            model, release, None, config.n_particles,
            build_schedule(config, eps), stream,
            rejection_restart=config.rejection_restart,
            max_attempts=config.max_attempts,
        )
    except StallError as err:
        return _failed_row(config, eps, n, rep, config.n_particles,
                           err.attempts, time.perf_counter() - start), None
    wall = time.perf_counter() - start
    report = estimate_report(
        result.particles, _phi_function(config.parameter_indices()),
        alpha=config.alpha,
    )
    row = ResultRow(
        replicate=rep, sampler=config.sampler, model=config.model,
        eps=eps, n=n, n_particles=config.n_particles, status="ok",
        param_names=labels_names,
        estimate=tuple(float(v) for v in report.estimate),
        variance=tuple(float(v) for v in report.variance_hat),
        ci_lower=tuple(float(v) for v in report.ci_lower),
        ci_upper=tuple(float(v) for v in report.ci_upper),
        ess=report.ess,
        mean_trials=float(result.particles.trial_counts.mean()),
        wall_seconds=wall, seconds_per_ess=wall / report.ess,
    )
    band = None
    if rep == 0:
        band = _central_curves(result.particles, config.curve_keep,
                               config.curve_points)
    return row, band


def run_logistic_analysis(config: ExperimentConfig):
    """Private logistic regression on synthesized census-like records.

    Returns (rows, summary); writes logistic_runs.csv, its timing sidecar,
    logistic_summary.json, and a curve_band .dat file per finite budget
    with the envelope of the most central sampled regression curves.
    """
    if config.kind != "logistic":
        raise ConfigError("run_logistic_analysis needs a 'logistic' config")
    jobs = [
        (config, eps_idx, rep)
        for eps_idx in range(len(config.eps_grid))
        for rep in range(config.replicates)
    ]
    outcomes = _pool_map(config, _logistic_replicate, jobs)
    rows = [row for row, _ in outcomes]
    if all(row.status == "stalled" for row in rows):
        raise InfeasibleExperimentError(
            "every logistic replicate stalled; the release and schedule "
            "are jointly infeasible at this attempt cap"
        )
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_rows(out_dir, "logistic_runs", rows)
    single = len(config.eps_grid) == 1
    for idx, (row, band) in enumerate(outcomes):
        if band is None:
            continue
        eps_idx = jobs[idx][1]
        name = "curve_band.dat" if single \
            else f"curve_band_eps{eps_idx}.dat"
        ages, lower, upper, central = band
        _write_dat(out_dir / name, ["age", "lower", "upper", "central"],
                   [ages, lower, upper, central])
    summary = _cell_summary(rows)
    summary["q"] = config.q
    summary["shares"] = list(config.shares)
    _write_json(out_dir / "logistic_summary.json", summary)
    return rows, summary


# -------------------------------------------------------------- presets

_PRESETS = {
    ("simulate", "desk"): """
[experiment]
kind = simulate
model = locscale-normal
sampler = dp-pf
replicates = 30
master_seed = 20260821
out_dir = results/simulate-desk

[model]
n_grid = 100, 1000
true_theta = 1.0, 1.0

[mechanism]
epsilon_grid = 0.5, 1, 2

[sampler]
n_particles = 150
""",
    ("simulate", "paper"): """
[experiment]
kind = simulate
model = locscale-normal
sampler = dp-pf
replicates = 100
master_seed = 20260821
out_dir = results/simulate-paper

[model]
n_grid = 100, 1000, 10000
true_theta = 1.0, 1.0

[mechanism]
epsilon_grid = 0.1, 0.5, 1, 2

[sampler]
n_particles = 1000
""",
    ("coverage", "desk"): """
[experiment]
kind = coverage
model = bernoulli-toy
master_seed = 20260822
out_dir = results/coverage-desk

[model]
n_grid = 20

[mechanism]
epsilon_grid = 1

[sampler]
n_particles = 2000

[coverage]
s_dp = 7.3
particles_grid = 100, 500, 2000
runs = 200
""",
    ("coverage", "paper"): """
[experiment]
kind = coverage
model = linreg-nonconjugate
master_seed = 20260822
out_dir = results/coverage-paper

[model]
n_grid = 100

[mechanism]
epsilon_grid = 1

[schedule]
kind = linear
t = 10

[sampler]
n_particles = 1600

[coverage]
s_dp = 0, 0, 50, 0, 50
particles_grid = 100, 200, 400, 800, 1600
runs = 100
""",
    ("logistic", "desk"): """
[experiment]
kind = logistic
master_seed = 20260823
out_dir = results/logistic-desk

[model]
n_grid = 1000

[mechanism]
epsilon_grid = 0.5
q = 0.5

[sampler]
n_particles = 200
""",
    ("logistic", "paper"): """
[experiment]
kind = logistic
replicates = 10
master_seed = 20260823
out_dir = results/logistic-paper

[model]
n_grid = 1000

[mechanism]
epsilon_grid = 0.5
q = 0.5

[sampler]
n_particles = 200
""",
}


def preset_text(kind: str, preset: str) -> str:
    """Built-in config text for a runner; same parser as config files."""
    try:
        return _PRESETS[(kind, preset)]
    except KeyError:
        raise ConfigError(
            f"no {preset!r} preset for the {kind!r} runner"
        ) from None
