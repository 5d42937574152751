"""Closed-form and high-precision reference values used by the Rust test suites.

Run with `python3 oracles/scalar_values.py`; output is frozen into oracles/frozen.json.
"""
import json

import mpmath as mp
from scipy import integrate, stats

mp.mp.dps = 50
out = {}

# window alpha=0.7, mu=0.3, L = 1 at n = 1024
n = mp.mpf(1024)
out["a_1024"] = float(n ** -0.7)
out["b_1024"] = float(n ** -0.3)
out["lambda_n_1024_h_1_64"] = float(mp.sqrt(n * mp.mpf(1) / 64 * abs(mp.log(mp.mpf(1) / 64))))

# A_n boundary for the gaussian with psi = f^{-1/4}, n = 1024: f(t) = 2^{-120}
phi = lambda t: mp.exp(-t * t / 2) / mp.sqrt(2 * mp.pi)
# solved on the log scale (absolute root tolerances are meaningless at 2^{-120})
out["gaussian_region_edge_1024"] = float(mp.findroot(lambda t: mp.log(phi(t)) + 120 * mp.log(2), 12.9))

# E f_{n,h}(0) for the gaussian and the uniform kernel
out["gaussian_centering_at_0"] = {
    str(k): float((mp.ncdf(mp.mpf(2) ** -k / 2) - mp.ncdf(-mp.mpf(2) ** -k / 2)) / mp.mpf(2) ** -k)
    for k in (3, 5, 7)
}
out["gaussian_pdf_0"] = float(phi(0))

# c_beta = int f^{1/4} for the standard gaussian
out["c_beta_gaussian_quarter"] = float(mp.quad(lambda t: phi(t) ** mp.mpf(0.25), [-mp.inf, mp.inf]))

# int min(f, 0.2) for the standard gaussian
t0 = float(mp.findroot(lambda t: phi(t) - mp.mpf("0.2"), 1.1))
out["gaussian_clamp_root"] = t0
out["int_min_gaussian_0_2"] = float(
    2 * (mp.mpf("0.2") * t0 + (1 - mp.ncdf(t0)))
)

# tail exponents 1 - (1 - alpha)/(2 beta) for t P{psi(X) > lambda(t)}
out["tail_exponent_gaussian_beta_0_25"] = 1 - 0.3 / (2 * 0.25)
out["tail_exponent_cauchy_beta_0_1"] = 1 - 0.3 / (4 * 0.1)

# chi-square upper tail, 3 degrees of freedom at 3
out["chi2_3_at_3"] = float(stats.chi2.sf(3, 3))

# Epanechnikov and triweight self-convolution at 0 (= L2 norm squared)
out["epanechnikov_l2"] = integrate.quad(lambda u: (1.5 * (1 - 4 * u * u)) ** 2, -0.5, 0.5)[0]
out["triweight_l2"] = integrate.quad(lambda u: (35 / 16 * (1 - 4 * u * u) ** 3) ** 2, -0.5, 0.5)[0]

if __name__ == "__main__":
    print(json.dumps(out, indent=2, sort_keys=True))
