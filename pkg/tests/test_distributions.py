import math

import numpy as np
import pytest
import scipy.stats as st
from hypothesis import given, settings
from hypothesis import strategies as hs

from dppf.distributions import (
    Bernoulli,
    Beta,
    ChiSquared,
    DegenerateWeightsError,
    FoldedT,
    Gamma,
    Geometric,
    InverseGamma,
    Laplace,
    Multinomial,
    MultivariateNormal,
    Normal,
    StudentT,
    Uniform,
    Weibull,
    log_density,
    multinomial_resample,
    sample,
)
from dppf.streams import RandomStream


def rng(seed=0):
    return np.random.default_rng(seed)


# Support-covering quadrature grids. Heavy-tailed families get a dense core
# plus log-spaced tails; everything else gets one fine linspace.
def _grid(core_lo, core_hi, core_n, tail_hi=None, tail_n=100_000, tail_lo=None):
    xs = np.linspace(core_lo, core_hi, core_n)
    if tail_hi is not None:
        upper = np.geomspace(core_hi, tail_hi, tail_n)[1:]
        parts = [xs, upper]
        if tail_lo is not None:
            parts.insert(0, -np.geomspace(-core_lo, -tail_lo, tail_n)[1:][::-1])
        xs = np.concatenate(parts)
    return xs

CONTINUOUS_CASES = [
    (Normal(0.7, 1.3), _grid(0.7 - 16.0, 0.7 + 16.0, 400_001)),
    (Laplace(-0.5, 2.0), _grid(-80.5, 79.5, 800_001)),
    (Gamma(6.0, 4.0), _grid(0.0, 30.0, 600_001)),
    (InverseGamma(1.0, 0.5), _grid(1e-4, 50.0, 500_001, tail_hi=1e7, tail_n=300_000)),
    (Weibull(1.25, 2.0), _grid(0.0, 10.0, 200_001)),
    (
        StudentT(0.0, 1.25, 2.0),
        _grid(-60.0, 60.0, 1_200_001, tail_hi=3e4, tail_lo=-3e4),
    ),
    (FoldedT(4.0, 0.0, 1.25), _grid(1e-6, 40.0, 400_001, tail_hi=2e3, tail_n=50_000)),
    (Beta(1.1, 1.1), _grid(0.0, 1.0, 2_000_001)),
    (ChiSquared(3.0), _grid(0.0, 80.0, 800_001)),
    (Uniform(-2.0, 3.0), _grid(-2.0, 3.0, 11)),
]


CONTINUOUS_IDS = [type(d).__name__ for d, _ in CONTINUOUS_CASES]


@pytest.mark.parametrize("dist,xs", CONTINUOUS_CASES, ids=CONTINUOUS_IDS)
def test_density_integrates_to_one(dist, xs):
    mass = np.trapezoid(np.exp(dist.log_density(xs)), xs)
    assert abs(mass - 1.0) <= 1e-6


@pytest.mark.parametrize("dist,xs", CONTINUOUS_CASES, ids=CONTINUOUS_IDS)
def test_draws_match_own_density(dist, xs):
    # KS of 1e5 draws against the CDF obtained by integrating log_density
    draws = dist.sample(rng(201), 100_000)
    pdf = np.exp(dist.log_density(xs))
    cdf = np.concatenate([[0.0], np.cumsum(np.diff(xs) * (pdf[1:] + pdf[:-1]) / 2.0)])
    res = st.kstest(draws, lambda v: np.interp(v, xs, cdf))
    assert res.pvalue > 0.001


SCIPY_EQUIVALENTS = [
    (Normal(0.7, 1.3), st.norm(0.7, 1.3)),
    (Laplace(-0.5, 2.0), st.laplace(-0.5, 2.0)),
    (Gamma(6.0, 4.0), st.gamma(6.0, scale=0.25)),
    (InverseGamma(1.0, 0.5), st.invgamma(1.0, scale=0.5)),
    (Weibull(1.25, 2.0), st.weibull_min(2.0, scale=1.25)),
    (StudentT(0.3, 1.25, 2.0), st.t(2.0, loc=0.3, scale=1.25)),
    (Beta(1.1, 1.1), st.beta(1.1, 1.1)),
    (ChiSquared(3.0), st.chi2(3.0)),
    (Uniform(-2.0, 3.0), st.uniform(-2.0, 5.0)),
]


@pytest.mark.parametrize("ours,ref", SCIPY_EQUIVALENTS, ids=lambda c: type(c).__name__)
def test_log_density_against_reference(ours, ref):
    pts = np.array([-3.7, -0.9, 0.01, 0.4, 0.99, 2.6, 14.0])
    got = np.array([float(ours.log_density(p)) for p in pts])
    want = ref.logpdf(pts)
    assert np.allclose(got, want, rtol=1e-12, atol=1e-12, equal_nan=False)


def test_folded_t_density_is_two_halves():
    d = FoldedT(4.0, 0.0, 1.25)
    base = st.t(4.0, scale=1.25)
    for x in [0.05, 0.8, 3.0, 11.0]:
        assert float(d.log_density(x)) == pytest.approx(math.log(2.0) + base.logpdf(x))
    assert d.log_density(-0.2) == -np.inf


def test_multivariate_normal_against_reference():
    mean = np.array([1.0, -2.0, 0.5])
    cov = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, -0.2], [0.0, -0.2, 0.7]])
    d = MultivariateNormal(mean, cov)
    ref = st.multivariate_normal(mean, cov)
    for pt in [mean, np.zeros(3), np.array([3.0, 1.0, -1.0])]:
        assert float(d.log_density(pt)) == pytest.approx(ref.logpdf(pt), abs=1e-10)


def test_multivariate_t_against_reference():
    loc = np.array([0.5, -1.0])
    shape = np.array([[1.5, 0.4], [0.4, 0.8]])
    d = StudentT(loc, shape, 2.0)
    ref = st.multivariate_t(loc, shape, df=2.0)
    for pt in [loc, np.zeros(2), np.array([4.0, 4.0])]:
        assert float(d.log_density(pt)) == pytest.approx(ref.logpdf(pt), abs=1e-10)


def test_multivariate_normal_moments():
    mean = np.array([1.0, -2.0])
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    draws = MultivariateNormal(mean, cov).sample(rng(11), 200_000)
    assert np.allclose(draws.mean(axis=0), mean, atol=0.02)
    assert np.allclose(np.cov(draws.T), cov, atol=0.03)


def test_multivariate_t_chisq_mixture_moments():
    # cov of t_df(loc, V) is V * df/(df-2)
    loc = np.array([0.0, 1.0])
    shape = np.array([[1.0, 0.2], [0.2, 0.5]])
    draws = StudentT(loc, shape, 6.0).sample(rng(12), 400_000)
    assert np.allclose(draws.mean(axis=0), loc, atol=0.02)
    assert np.allclose(np.cov(draws.T), shape * 6.0 / 4.0, atol=0.04)


def test_degenerate_normal_draw():
    assert Normal(0.0, 0.0).sample(rng()) == 0.0
    assert Normal(3.5, 0.0).log_density(3.5) == 0.0
    assert Normal(3.5, 0.0).log_density(3.6) == -np.inf


def test_laplace_mean_absolute_deviation():
    b = 2.0
    draws = Laplace(0.0, b).sample(rng(7), 1_000_000)
    # |X| is Exponential(1/b): mean b, sd b
    assert abs(np.abs(draws).mean() - b) <= 3.0 * b / 1000.0


def test_gamma_mean():
    draws = Gamma(6.0, 4.0).sample(rng(8), 1_000_000)
    sd = math.sqrt(6.0) / 4.0
    assert abs(draws.mean() - 1.5) <= 3.0 * sd / 1000.0


def test_inverse_gamma_reciprocal_is_gamma():
    draws = InverseGamma(3.0, 2.0).sample(rng(9), 100_000)
    res = st.kstest(1.0 / draws, st.gamma(3.0, scale=0.5).cdf)
    assert res.pvalue > 0.001


def test_known_log_density_values():
    assert Laplace(0.0, 1.0).log_density(0.0) == math.log(0.5)
    assert Normal(0.0, 1.0).log_density(0.0) == -0.5 * math.log(2.0 * math.pi)
    assert InverseGamma(1.0, 0.5).log_density(0.0) == -np.inf
    assert InverseGamma(1.0, 0.5).log_density(-2.0) == -np.inf
    assert Uniform(0.0, 4.0).log_density(2.0) == -math.log(4.0)
    assert Uniform(0.0, 4.0).log_density(4.5) == -np.inf


def test_log_density_never_nan_at_extremes():
    dists = [
        Normal(0.0, 1.0),
        Laplace(0.0, 1.0),
        Gamma(6.0, 4.0),
        Gamma(0.5, 1.0),
        InverseGamma(1.0, 0.5),
        Weibull(1.25, 2.0),
        StudentT(0.0, 1.0, 2.0),
        FoldedT(4.0),
        Beta(1.1, 1.1),
        ChiSquared(3.0),
        Uniform(-1.0, 1.0),
    ]
    pts = [-np.inf, -1e300, 0.0, 1e-300, 1.0, 1e300, np.inf]
    for d in dists:
        for p in pts:
            assert not np.isnan(float(d.log_density(p))), (d, p)


def test_bernoulli():
    d = Bernoulli(0.3)
    draws = d.sample(rng(13), 100_000)
    assert set(np.unique(draws)) <= {0, 1}
    assert abs(draws.mean() - 0.3) <= 4.0 * math.sqrt(0.3 * 0.7 / 100_000)
    assert d.log_density(1) == math.log(0.3)
    assert d.log_density(0) == pytest.approx(math.log(0.7), rel=1e-15)
    assert d.log_density(0.5) == -np.inf
    assert Bernoulli(1.0).log_density(0) == -np.inf


def test_geometric():
    d = Geometric(0.2)
    draws = d.sample(rng(14), 100_000)
    assert draws.min() >= 1
    assert abs(draws.mean() - 5.0) <= 4.0 * math.sqrt(0.8 / 0.04 / 100_000)
    # binned goodness of fit against the pmf itself
    kmax = 40
    counts = np.bincount(np.minimum(draws, kmax), minlength=kmax + 1)[1:]
    pk = np.exp([d.log_density(k) for k in range(1, kmax)])
    probs = np.concatenate([pk, [1.0 - pk.sum()]])
    res = st.chisquare(counts, 100_000 * probs)
    assert res.pvalue > 0.001
    assert d.log_density(0) == -np.inf
    assert d.log_density(2.5) == -np.inf
    assert Geometric(1.0).log_density(1) == 0.0


def test_multinomial():
    p = np.array([0.2, 0.3, 0.5])
    d = Multinomial(50, p)
    draws = d.sample(rng(15), 20_000)
    assert draws.shape == (20_000, 3)
    assert np.all(draws.sum(axis=1) == 50)
    totals = draws.sum(axis=0)
    res = st.chisquare(totals, 50 * 20_000 * p)
    assert res.pvalue > 0.001
    ref = st.multinomial(50, p)
    for k in [np.array([10, 15, 25]), np.array([0, 0, 50])]:
        assert float(d.log_density(k)) == pytest.approx(ref.logpmf(k), abs=1e-10)
    assert d.log_density(np.array([10, 15, 24])) == -np.inf
    assert d.log_density(np.array([10.5, 14.5, 25.0])) == -np.inf


def test_parameter_validation():
    bad = [
        lambda: Normal(0.0, -1.0),
        lambda: Normal(np.inf, 1.0),
        lambda: Laplace(0.0, 0.0),
        lambda: Gamma(0.0, 1.0),
        lambda: Gamma(1.0, -2.0),
        lambda: InverseGamma(-1.0, 1.0),
        lambda: Weibull(0.0, 1.0),
        lambda: StudentT(0.0, 1.0, 0.0),
        lambda: StudentT(0.0, -1.0, 2.0),
        lambda: Beta(0.0, 1.0),
        lambda: ChiSquared(-3.0),
        lambda: Uniform(1.0, 1.0),
        lambda: Bernoulli(1.5),
        lambda: Geometric(0.0),
        lambda: Multinomial(10, np.array([0.5, 0.6])),
        lambda: Multinomial(10, np.array([-0.1, 1.1])),
        lambda: MultivariateNormal(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]])),
        lambda: MultivariateNormal(np.zeros(3), np.eye(2)),
    ]
    for ctor in bad:
        with pytest.raises(ValueError):
            ctor()


def test_dimension_mismatch_rejected():
    d = MultivariateNormal(np.zeros(2), np.eye(2))
    with pytest.raises(ValueError):
        d.log_density(np.zeros(3))
    t = StudentT(np.zeros(2), np.eye(2), 3.0)
    with pytest.raises(ValueError):
        t.log_density(np.zeros(4))


def test_module_level_helpers():
    s = RandomStream(555, (1, 2, 3))
    d = Normal(1.0, 2.0)
    assert sample(d, s) == d.sample(s.generator())
    assert log_density(d, 1.0) == d.log_density(1.0)


# -- multinomial resampling ------------------------------------------------

def test_resample_point_mass():
    idx = multinomial_resample(np.array([1.0, 0.0, 0.0]), 5, rng(0))
    assert np.array_equal(idx, np.zeros(5, dtype=np.int64))


def test_resample_two_atoms():
    idx = multinomial_resample(np.array([0.5, 0.5]), 1, rng(1))
    assert idx[0] in (0, 1)


def test_resample_uniform_frequencies():
    n = 8
    idx = multinomial_resample(np.full(n, 1.0 / n), 100_000, rng(2))
    res = st.chisquare(np.bincount(idx, minlength=n))
    assert res.pvalue > 0.01


def test_resample_marginals_match_weights():
    w = np.array([0.1, 0.2, 0.3, 0.4])
    idx = multinomial_resample(w, 1_000_000, rng(3))
    freqs = np.bincount(idx, minlength=4) / 1_000_000
    tol = 4.0 * np.sqrt(w * (1.0 - w) / 1_000_000)
    assert np.all(np.abs(freqs - w) <= tol)


def test_resample_never_selects_zero_weight():
    w = np.array([0.5, 0.0, 0.5])
    idx = multinomial_resample(w, 200_000, rng(4))
    assert not np.any(idx == 1)


def test_resample_validation():
    with pytest.raises(DegenerateWeightsError):
        multinomial_resample(np.zeros(3), 1, rng())
    with pytest.raises(ValueError):
        multinomial_resample(np.array([0.3, 0.3]), 1, rng())
    with pytest.raises(ValueError):
        multinomial_resample(np.array([-0.5, 1.5]), 1, rng())
    with pytest.raises(ValueError):
        multinomial_resample(np.array([0.5, np.nan]), 1, rng())


# -- property checks -------------------------------------------------------

@given(
    loc=hs.floats(-100.0, 100.0),
    scale=hs.floats(1e-3, 1e3),
    x=hs.floats(allow_nan=False),
)
@settings(max_examples=200, deadline=None)
def test_normal_density_finite_or_neg_inf(loc, scale, x):
    v = float(Normal(loc, scale).log_density(x))
    assert not math.isnan(v)
    # bounded by the mode density 1/(scale*sqrt(2*pi))
    assert v <= -math.log(scale * math.sqrt(2.0 * math.pi)) + 1e-9


@given(
    shape=hs.floats(0.1, 50.0),
    rate=hs.floats(1e-3, 1e3),
    seed=hs.integers(0, 2**32 - 1),
)
@settings(max_examples=100, deadline=None)
def test_gamma_draws_live_in_support(shape, rate, seed):
    d = Gamma(shape, rate)
    x = d.sample(np.random.default_rng(seed))
    assert x > 0.0
    assert float(d.log_density(x)) > -np.inf


@given(
    a=hs.floats(0.1, 20.0),
    b=hs.floats(0.1, 20.0),
    seed=hs.integers(0, 2**32 - 1),
)
@settings(max_examples=100, deadline=None)
def test_beta_draws_live_in_support(a, b, seed):
    d = Beta(a, b)
    x = d.sample(np.random.default_rng(seed))
    assert 0.0 <= x <= 1.0


@given(df=hs.floats(0.5, 40.0), seed=hs.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_folded_t_draws_nonnegative(df, seed):
    d = FoldedT(df, 0.0, 1.25)
    x = d.sample(np.random.default_rng(seed))
    assert x >= 0.0
    assert float(d.log_density(x)) > -np.inf
