"""Compiled per-particle attempt loops for the two additive-release families.

These kernels run the resample-perturb-simulate-accept cycle for one particle
until acceptance or an attempt cap, drawing everything from one generator so
the sequence is fixed per particle.  The draw order per attempt is: resampling
uniform, perturbation normals (repeated on support retries), acceptance
uniform, then the record draws.  Drawing the acceptance uniform before the
records lets the record loop stop as soon as the remaining records can no
longer close the summary gap the acceptance threshold allows; the accepted
law and the attempt count distribution are unchanged because the acceptance
test compares the same pair of numbers either way.

Returns are (trials, theta..., summaries..., best_log_ratio, accepted); the
caller turns a cap overrun into an error.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _pick(cdf, u):
    # First index with cdf[index] > u: zero-weight plateaus are skipped.
    lo = 0
    hi = cdf.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def locscale_attempts(gen, theta_prev, weight_cdf, l00, l10, l11,
                      s0_obs, s1_obs, rate, n, lo, hi, max_attempts):
    """Attempt loop for the location-scale family under a Laplace release.

    ``rate`` is eps_t / delta; the log acceptance ratio of an attempt is
    -rate times the l1 distance between its two power sums and the released
    pair.  Records are clamped into [lo, hi] and mapped onto [-1, 1], so
    after k of n records the first sum can still move by at most n - k and
    the second can only grow by at most n - k; the induced lower bound on
    the final distance justifies the early stop.
    """
    width = hi - lo
    best = -np.inf
    trials = 0
    while trials < max_attempts:
        trials += 1
        j = _pick(weight_cdf, gen.random())
        m0 = theta_prev[j, 0]
        v0 = theta_prev[j, 1]
        retries = 0
        while True:
            z0 = gen.standard_normal()
            z1 = gen.standard_normal()
            th0 = m0 + l00 * z0
            th1 = v0 + l10 * z0 + l11 * z1
            if th1 > 0.0 and np.isfinite(th1):
                break
            retries += 1
            if retries > 100000:
                return trials, th0, th1, 0.0, 0.0, best, -2
        budget = -np.log(gen.random()) / rate
        sd = np.sqrt(th1)
        s0 = 0.0
        s1 = 0.0
        complete = True
        for k in range(n):
            y = th0 + sd * gen.standard_normal()
            if y < lo:
                y = lo
            elif y > hi:
                y = hi
            t = 2.0 * (y - lo) / width - 1.0
            s0 += t
            s1 += t * t
            rem = float(n - k - 1)
            d0 = abs(s0_obs - s0) - rem
            if d0 < 0.0:
                d0 = 0.0
            if s1 > s1_obs:
                d1 = s1 - s1_obs
            else:
                d1 = s1_obs - s1 - rem
                if d1 < 0.0:
                    d1 = 0.0
            if d0 + d1 >= budget:
                complete = False
                break
        if complete:
            gap = abs(s0_obs - s0) + abs(s1_obs - s1)
            log_r = -rate * gap
            if log_r > best:
                best = log_r
            if gap < budget:
                return trials, th0, th1, s0, s1, log_r, 1
    return trials, 0.0, 0.0, 0.0, 0.0, best, 0


@njit(cache=True)
def bernoulli_attempts(gen, theta_prev, weight_cdf, scale,
                       s_obs, rate, n, max_attempts):
    """Attempt loop for the coin-flip toy model under a Laplace release.

    The summary is the success count, so the log acceptance ratio is
    -rate * |count - s_obs|.
    """
    best = -np.inf
    trials = 0
    while trials < max_attempts:
        trials += 1
        j = _pick(weight_cdf, gen.random())
        base = theta_prev[j, 0]
        retries = 0
        while True:
            th = base + scale * gen.standard_normal()
            if 0.0 <= th <= 1.0:
                break
            retries += 1
            if retries > 100000:
                return trials, th, 0.0, best, -2
        budget = -np.log(gen.random()) / rate
        count = 0.0
        for _ in range(n):
            if gen.random() < th:
                count += 1.0
        gap = abs(s_obs - count)
        log_r = -rate * gap
        if log_r > best:
            best = log_r
        if gap < budget:
            return trials, th, count, log_r, 1
    return trials, 0.0, 0.0, best, 0


@njit(cache=True)
def locscale_prior_attempts(gen, mu_loc, mu_sd, ig_shape, ig_scale,
                            s0_obs, s1_obs, rate, n, lo, hi, max_attempts):
    """Rejection loop for location-scale draws proposed straight from the prior.

    Per attempt the draws are: one normal for the mean, one gamma for the
    variance (inverted), the acceptance uniform, then the records, with the
    same early stop as the filtering kernel.
    """
    width = hi - lo
    best = -np.inf
    trials = 0
    while trials < max_attempts:
        trials += 1
        th0 = mu_loc + mu_sd * gen.standard_normal()
        retries = 0
        while True:
            g = gen.standard_gamma(ig_shape)
            if g > 0.0 and np.isfinite(g):
                break
            retries += 1
            if retries > 100000:
                return trials, th0, 0.0, 0.0, 0.0, best, -2
        th1 = ig_scale / g
        budget = -np.log(gen.random()) / rate
        sd = np.sqrt(th1)
        s0 = 0.0
        s1 = 0.0
        complete = True
        for k in range(n):
            y = th0 + sd * gen.standard_normal()
            if y < lo:
                y = lo
            elif y > hi:
                y = hi
            t = 2.0 * (y - lo) / width - 1.0
            s0 += t
            s1 += t * t
            rem = float(n - k - 1)
            d0 = abs(s0_obs - s0) - rem
            if d0 < 0.0:
                d0 = 0.0
            if s1 > s1_obs:
                d1 = s1 - s1_obs
            else:
                d1 = s1_obs - s1 - rem
                if d1 < 0.0:
                    d1 = 0.0
            if d0 + d1 >= budget:
                complete = False
                break
        if complete:
            gap = abs(s0_obs - s0) + abs(s1_obs - s1)
            log_r = -rate * gap
            if log_r > best:
                best = log_r
            if gap < budget:
                return trials, th0, th1, s0, s1, log_r, 1
    return trials, 0.0, 0.0, 0.0, 0.0, best, 0


@njit(cache=True)
def bernoulli_prior_attempts(gen, low, high, s_obs, rate, n, max_attempts):
    """Rejection loop for the coin-flip toy with uniform prior proposals."""
    best = -np.inf
    trials = 0
    while trials < max_attempts:
        trials += 1
        th = low + (high - low) * gen.random()
        budget = -np.log(gen.random()) / rate
        count = 0.0
        for _ in range(n):
            if gen.random() < th:
                count += 1.0
        gap = abs(s_obs - count)
        log_r = -rate * gap
        if log_r > best:
            best = log_r
        if gap < budget:
            return trials, th, count, log_r, 1
    return trials, 0.0, 0.0, best, 0
