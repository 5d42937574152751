"""Monte Carlo envelopes from an independent numpy implementation of the weighted deviation
statistics (uniform kernel, d = 1, standard gaussian, psi = f^{-1/4}, a_t = t^{-0.7},
b_t = t^{-0.3}). Different random streams from the Rust code, so Rust results are compared
against distributional envelopes, not bit patterns.

Run with `python3 oracles/monte_carlo.py`; output is frozen into oracles/frozen_mc.json.
"""
import json

import numpy as np
from scipy import stats

rng = np.random.default_rng(20240611)
BETA = 0.25


def window(n):
    return n ** -0.7, n ** -0.3


def subgrid(n, k):
    a, b = window(n)
    hs = []
    i = 0
    while a * 2 ** (i / k) < b * (1 - 1e-12):
        hs.append(a * 2 ** (i / k))
        i += 1
    return np.array(hs + [b])


def bounding_half_width():
    # per-axis two-sided tail 0.5e-6
    return stats.norm.isf(0.25e-6)


def grid(n, x, cap=4096):
    a, _ = window(n)
    z = bounding_half_width()
    m = min(int(np.ceil(2 * z / (a / 2))) + 1, cap)
    return np.concatenate([np.linspace(-z, z, m), x])


def window_prob(lo, hi):
    # P{lo <= X <= hi} differencing tails on one side of zero
    out = np.empty_like(lo)
    pos = lo >= 0
    neg = hi <= 0
    mid = ~(pos | neg)
    out[pos] = stats.norm.sf(lo[pos]) - stats.norm.sf(hi[pos])
    out[neg] = stats.norm.sf(-hi[neg]) - stats.norm.sf(-lo[neg])
    out[mid] = 1 - stats.norm.sf(hi[mid]) - stats.norm.sf(-lo[mid])
    return out


def sup_weighted(x_sorted, t, h, psi):
    n = len(x_sorted)
    lo = np.searchsorted(x_sorted, t - h / 2, side="left")
    hi = np.searchsorted(x_sorted, t + h / 2, side="right")
    f_nh = (hi - lo) / (n * h)
    e = window_prob(t - h / 2, t + h / 2) / h
    return np.max(psi * np.abs(f_nh - e))


def delta_n(n, x, k):
    xs = np.sort(x)
    t = grid(n, x)
    psi = stats.norm.pdf(t) ** -BETA
    best = 0.0
    for h in subgrid(n, k):
        r = np.sqrt(n * h / abs(np.log(h))) * sup_weighted(xs, t, h, psi)
        best = max(best, r)
    return best


def rescaled_at_a(n, x):
    xs = np.sort(x)
    t = grid(n, x)
    psi = stats.norm.pdf(t) ** -BETA
    a, _ = window(n)
    return np.sqrt(n * a / abs(np.log(a))) * sup_weighted(xs, t, a, psi)


def plugin_clamp(x, h, c=0.2):
    # exact integral of min(f_{n,h}, c) for the piecewise constant estimator
    n = len(x)
    edges = np.sort(np.concatenate([x - h / 2, x + h / 2]))
    mids = 0.5 * (edges[1:] + edges[:-1])
    xs = np.sort(x)
    counts = np.searchsorted(xs, mids + h / 2, side="right") - np.searchsorted(xs, mids - h / 2, side="left")
    return float(np.sum(np.minimum(counts / (n * h), c) * np.diff(edges)))


out = {}
reps = 400
n = 1024
r_a = np.array([rescaled_at_a(n, rng.standard_normal(n)) for _ in range(reps)])
out["rescaled_at_a_1024"] = {
    "min": float(r_a.min()),
    "q005": float(np.quantile(r_a, 0.005)),
    "median": float(np.median(r_a)),
    "q995": float(np.quantile(r_a, 0.995)),
    "max": float(r_a.max()),
}
d = np.array([delta_n(n, rng.standard_normal(n), 8) for _ in range(reps)])
# standard error of the median of 200 draws, by resampling the oracle distribution
boot = [np.median(rng.choice(d, 200)) for _ in range(2000)]
out["delta_n_1024_k8"] = {
    "median": float(np.median(d)),
    "median_of_200_q001": float(np.quantile(boot, 0.001)),
    "median_of_200_q999": float(np.quantile(boot, 0.999)),
    "q005": float(np.quantile(d, 0.005)),
    "q995": float(np.quantile(d, 0.995)),
}
p = np.array([plugin_clamp(rng.standard_normal(4096), 2 ** -5) for _ in range(reps)])
out["plugin_clamp_0_2_n4096_h2m5"] = {
    "min": float(p.min()),
    "q005": float(np.quantile(p, 0.005)),
    "median": float(np.median(p)),
    "q995": float(np.quantile(p, 0.995)),
    "max": float(p.max()),
}
med = np.array([np.median(stats.cauchy.rvs(size=1000, random_state=rng)) for _ in range(reps)])
out["cauchy_median_1000_abs_max"] = float(np.abs(med).max())
out["cauchy_median_1000_sd"] = float(med.std())

if __name__ == "__main__":
    print(json.dumps(out, indent=2, sort_keys=True))
