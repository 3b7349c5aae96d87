"""End-to-end statistical acceptance gate.

Each test here checks one externally meaningful contract of the sampler at
realistic scale: agreement with enumerable ground truth, parameter
recovery on the location-scale family, equivalence with the exact
rejection baseline under shared seeds, the geometric law of trial counts,
effective-sample-size identities, confidence-interval coverage, the
distributional guarantees of the privacy mechanisms, the error-vs-N
scaling rate, and bitwise determinism of the benchmark outputs.

These are slow tests by design; every tolerance below is part of the
package's compatibility contract, so loosening one is a breaking change.
"""

import math
from dataclasses import replace

import numpy as np
from scipy import stats

from dppf.baselines import bernoulli_oracle
from dppf.engine import linear_schedule, run_dp_pf
from dppf.estimators import ess_hat, estimate_report, error_scaling_slope
from dppf.harness import parse_config, preset_text, run_coverage, run_experiment
from dppf.mechanisms import (
    MechanismSpec,
    implied_noise,
    knorm_linf_sample,
    laplace_release,
    objective_perturbation,
    objperb_release_log_density,
    regularizer_gamma,
)
from dppf.models import bernoulli_toy
from dppf.streams import RandomStream

TOY_N = 20
TOY_EPS = 1.0
TOY_S_DP = 7.3
TOY_MODEL = bernoulli_toy(TOY_N)
TOY_MECH = MechanismSpec(kind="laplace", delta=1.0, epsilon=TOY_EPS)
TOY_ORACLE = bernoulli_oracle(TOY_N, TOY_S_DP, TOY_EPS).posterior_mean


def toy_estimate(n_particles, stream, schedule=None):
    result = run_dp_pf(
        TOY_MODEL, TOY_MECH, np.array([TOY_S_DP]), n_particles,
        schedule if schedule is not None else linear_schedule(TOY_EPS, 4),
        stream,
    )
    return estimate_report(result.particles, lambda th, s: th[0])


def test_toy_posterior_matches_enumeration():
    # 100 independent filter runs at N=5000; the estimate must sit within
    # three estimated Monte Carlo standard errors of the enumerated
    # posterior mean in at least 95 of them.
    runs = 100
    n_particles = 5000
    hits = 0
    for r in range(runs):
        report = toy_estimate(n_particles, RandomStream(101, (r,)))
        err = abs(float(report.estimate[0]) - TOY_ORACLE)
        bound = 3.0 * math.sqrt(float(report.variance_hat[0]) / n_particles)
        hits += err <= bound
    print(f"\ntoy enumeration agreement: {hits}/{runs} runs inside 3 MCSE "
          f"(need >= 95)")
    assert hits >= 95


LOCSCALE_RECOVERY = """
[experiment]
kind = simulate
model = locscale-normal
sampler = dp-pf
replicates = 30
master_seed = 20260821
out_dir = {out}

[model]
n_grid = 1000
true_theta = 1.0, 1.0

[mechanism]
epsilon_grid = 2

[sampler]
n_particles = 150
"""


def test_locscale_mean_recovery(tmp_path):
    config = parse_config(LOCSCALE_RECOVERY.format(out=tmp_path))
    _, summary = run_experiment(config)
    cell = summary["cells"][0]
    assert cell["failed"] == 0
    mean_mu = cell["mean"]["mu"]
    mean_s2 = cell["mean"]["sigma2"]
    print(f"\nlocscale recovery: mean mu={mean_mu:.4f} "
          f"(band [0.97, 1.03]), mean sigma2={mean_s2:.4f} "
          f"(band [0.95, 1.20])")
    assert 0.97 <= mean_mu <= 1.03
    assert 0.95 <= mean_s2 <= 1.20


BASELINE_AGREEMENT = """
[experiment]
kind = simulate
model = locscale-normal
sampler = {sampler}
replicates = 30
master_seed = 20260824
out_dir = {out}

[model]
n_grid = 100
true_theta = 1.0, 1.0

[mechanism]
epsilon_grid = 1

[sampler]
n_particles = 150
reject_count = 500
"""


def test_filter_agrees_with_rejection_baseline(tmp_path):
    # Same master seed -> identical data and releases for both samplers.
    def cell_mu(sampler):
        text = BASELINE_AGREEMENT.format(sampler=sampler,
                                         out=tmp_path / sampler)
        _, summary = run_experiment(parse_config(text))
        cell = summary["cells"][0]
        assert cell["failed"] == 0
        return cell["mean"]["mu"]

    pf = cell_mu("dp-pf")
    rej = cell_mu("dp-reject-abc")
    gap = abs(pf - rej)
    print(f"\nshared-seed baseline agreement: filter mu={pf:.4f}, "
          f"rejection mu={rej:.4f}, gap={gap:.4f} (tolerance 0.1)")
    assert gap <= 0.1


def test_trial_counts_follow_geometric_law():
    # With restart-from-resampling, every attempt is a fresh draw from the
    # same proposal, so per-particle trial counts are i.i.d. geometric and
    # independent of the accepted parameter.
    count = 10_000
    result = run_dp_pf(
        TOY_MODEL, TOY_MECH, np.array([TOY_S_DP]), count,
        linear_schedule(TOY_EPS, 2), RandomStream(202, (0,)),
    )
    trials = result.particles.trial_counts
    theta = result.particles.theta[:, 0]
    p_hat = 1.0 / trials.mean()
    k_max = 11
    observed = np.array(
        [np.sum(trials == k) for k in range(1, k_max + 1)]
        + [np.sum(trials > k_max)], dtype=float)
    tail = (1.0 - p_hat) ** k_max
    expected = count * np.array(
        [p_hat * (1.0 - p_hat) ** (k - 1) for k in range(1, k_max + 1)]
        + [tail])
    while expected[-1] < 5.0 and expected.size > 2:
        expected[-2] += expected[-1]
        observed[-2] += observed[-1]
        expected = expected[:-1]
        observed = observed[:-1]
    pvalue = stats.chisquare(observed, expected, ddof=1).pvalue
    corr = float(np.corrcoef(trials, theta)[0, 1])
    limit = 4.0 / math.sqrt(count)
    print(f"\ngeometric trial law: GOF p={pvalue:.4f} (alpha 0.01), "
          f"|corr(trials, theta)|={abs(corr):.4f} (limit {limit:.4f})")
    assert pvalue >= 0.01
    assert abs(corr) <= limit


def test_ess_identities():
    for n in (2, 37, 1000, 5000):
        assert ess_hat(np.ones(n)) == float(n)
        point = np.zeros(n)
        point[n // 2] = 0.73
        assert ess_hat(point) == 1.0
    gen = RandomStream(505, (0,)).generator()
    w = gen.random(4096) + 1e-3
    base = ess_hat(w)
    worst = max(
        abs(ess_hat(scale * w) - base) / base
        for scale in (1e-8, 3.7e-2, 9.1, 1e8)
    )
    print(f"\nESS identities: exact at uniform and point mass; "
          f"scale drift {worst:.2e} (limit 1e-12)")
    assert worst <= 1e-12


def test_interval_coverage_and_width(tmp_path):
    config = parse_config(preset_text("coverage", "desk"), "coverage")
    table, truth = run_coverage(replace(config, out_dir=str(tmp_path)))
    assert truth == TOY_ORACLE
    assert [entry["n_particles"] for entry in table] == [100, 500, 2000]
    assert all(entry["failed"] == 0 for entry in table)
    final = table[-1]["coverage"]
    width_small = table[0]["mean_width"]
    width_large = table[-1]["mean_width"]
    print(f"\ninterval coverage: {final:.3f} at N=2000 "
          f"(band [0.90, 0.99]); widths {width_small:.4f} -> "
          f"{width_large:.4f} (must shrink)")
    assert 0.90 <= final <= 0.99
    assert width_large < width_small


def test_mechanism_noise_distributions():
    m = 100_000
    c, d = 1.3, 4
    draws = knorm_linf_sample(c, d, RandomStream(707, (0,)).generator(),
                              size=m)
    radius_p = stats.kstest(np.abs(draws).max(axis=1), "gamma",
                            args=(d, 0.0, 1.0 / c)).pvalue
    single = knorm_linf_sample(c, 1, RandomStream(707, (1,)).generator(),
                               size=m)
    laplace_p = stats.kstest(single[:, 0], "laplace",
                             args=(0.0, 1.0 / c)).pvalue
    delta, eps = 3.0, 2.0
    noise = laplace_release(np.zeros(m), delta, eps,
                            RandomStream(707, (2,)).generator())
    b = delta / eps
    var_gap = abs(noise.var() - 2.0 * b * b)
    var_tol = 3.0 * math.sqrt(20.0 * b ** 4 / m)
    print(f"\nmechanism distributions: sup-norm radius KS p={radius_p:.4f},"
          f" d=1 Laplace KS p={laplace_p:.4f} (alpha 0.001); "
          f"Laplace variance gap {var_gap:.4f} (tol {var_tol:.4f})")
    assert radius_p >= 0.001
    assert laplace_p >= 0.001
    assert var_gap <= var_tol


def test_objective_perturbation_guarantees():
    # Released coefficients must be an exact stationary point of the
    # perturbed objective, i.e. they encode the drawn noise vector.
    g = RandomStream(808, (0,)).generator()
    z = g.uniform(-1.0, 1.0, 200)
    design = np.column_stack([np.ones(200), z])
    labels = (g.random(200)
              < 1.0 / (1.0 + np.exp(-(0.4 + 1.2 * z)))).astype(float)
    theta, v = objective_perturbation(
        design, labels, 2.0, 0.8, 0.5, RandomStream(808, (1,)).generator()
    )
    gamma = regularizer_gamma(0.8, 0.5, 0.5)
    station_gap = np.abs(implied_noise(theta, design, labels, gamma)
                         - v).max()
    assert station_gap <= 1e-5

    # Changing one of five records moves the release log-density by at
    # most the privacy budget, across a grid of outputs.
    eps, q, delta = 0.8, 0.5, 2.0
    base_z = np.array([0.3, -0.9, 0.5, 0.1, -0.4])
    base_y = np.array([1.0, 0.0, 1.0, 1.0, 0.0])
    ref = np.column_stack([np.ones(5), base_z])
    worst = -np.inf
    grid = np.linspace(-3.0, 3.0, 13)
    for z_new in np.linspace(-1.0, 1.0, 5):
        for y_new in (0.0, 1.0):
            z2 = base_z.copy()
            z2[2] = z_new
            y2 = base_y.copy()
            y2[2] = y_new
            other = np.column_stack([np.ones(5), z2])
            for a in grid:
                for b in grid:
                    point = np.array([a, b])
                    gap = abs(
                        objperb_release_log_density(
                            point, ref, base_y, delta, eps, q)
                        - objperb_release_log_density(
                            point, other, y2, delta, eps, q))
                    worst = max(worst, gap)
    bound = eps + math.log1p(1e-6)
    assert worst <= bound

    # Per-record curvature never exceeds d/4 on clamped rows, which is
    # what makes the fixed ridge weight d/4 sufficient.
    g = RandomStream(808, (2,)).generator()
    rows = np.column_stack([np.ones(10_000),
                            g.uniform(-1.0, 1.0, 10_000)])
    ps = g.random(10_000)
    eig_max = (ps * (1.0 - ps) * np.sum(rows * rows, axis=1)).max()
    print(f"\nobjective perturbation: stationarity gap {station_gap:.2e} "
          f"(tol 1e-5); adjacency log-ratio {worst:.4f} "
          f"(bound {bound:.4f}); max per-record eigenvalue {eig_max:.4f} "
          f"(bound 0.5)")
    assert eig_max <= 2.0 / 4.0 + 1e-12


def test_error_scales_with_particle_count():
    sizes = (100, 1000, 10_000)
    seeds = 50
    medians = []
    for j, n_particles in enumerate(sizes):
        errors = [
            abs(float(toy_estimate(
                n_particles, RandomStream(909, (j, r))).estimate[0])
                - TOY_ORACLE)
            for r in range(seeds)
        ]
        medians.append(np.median(errors))
    slope = error_scaling_slope(sizes, medians)
    print(f"\nerror scaling: median errors {[f'{m:.5f}' for m in medians]} "
          f"over N={list(sizes)}, log-log slope {slope:.3f} "
          f"(band [-0.7, -0.3])")
    assert -0.7 <= slope <= -0.3


DETERMINISM = """
[experiment]
kind = simulate
model = bernoulli-toy
replicates = 3
master_seed = 77
workers = {workers}
out_dir = {out}

[model]
n_grid = 20
true_theta = 0.4

[mechanism]
epsilon_grid = 1, 2

[schedule]
kind = linear
t = 3

[sampler]
n_particles = 64
"""


def test_outputs_deterministic_across_workers(tmp_path):
    for name, workers in (("serial", 1), ("pooled", 3), ("again", 1)):
        run_experiment(parse_config(
            DETERMINISM.format(workers=workers, out=tmp_path / name)))
    serial = (tmp_path / "serial" / "results.csv").read_bytes()
    pooled = (tmp_path / "pooled" / "results.csv").read_bytes()
    again = (tmp_path / "again" / "results.csv").read_bytes()
    assert serial == pooled == again
    summaries = [
        (tmp_path / name / "summary.json").read_bytes()
        for name in ("serial", "pooled", "again")
    ]
    assert summaries[0] == summaries[1] == summaries[2]
    print("\ndeterminism: result files byte-identical across reruns and "
          "worker counts")
