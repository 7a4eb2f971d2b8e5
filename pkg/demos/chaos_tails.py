"""Quadratic forms in heavy-tailed vectors: empirical tails against the Hanson-Wright shape.

Run: python3 demos/chaos_tails.py   (about a minute)
"""

import numpy as np

from blockrip import (DistributionSpec, MatrixFamily, RngStream, empirical_moment_curve, empirical_tail,
                      gamma_u_quantities, hw_bound_alpha, uniform_hw_bound)

n = 64
family = MatrixFamily.of(np.eye(n) / np.sqrt(n))
t = np.geomspace(0.1, 4.0, 9)
for label, spec, alpha in (("gaussian", DistributionSpec.gaussian(1.0), 2.0),
                           ("weibull(1)", DistributionSpec.weibull(1.0), 1.0)):
    curve = empirical_tail(family, spec, t, 10**6, RngStream(4))
    print(f"\n{label}: P{{|(||A xi||^2 - E)| > t}} next to the alpha={alpha:g} bound shape "
          f"(c=1; the absolute constant is not known, so only the decay profile is comparable)")
    for ti, p in zip(t, curve.empirical_probs):
        print(f"  t={ti:6.3f}  {p:.2e}   shape {hw_bound_alpha(np.eye(n) / n, 1.0, alpha, ti):.2e}")

p = np.arange(4, 17, 2)
curve = empirical_moment_curve(np.outer([1.0, 2.0], [1.0, 0, 0, 0]), DistributionSpec.weibull(1.0), p, 2 * 10**6,
                               RngStream(5), pairing="cross")
print(f"\nL_p growth of a decoupled rank-one chaos with Laplace entries: slope {curve.slope(4, 16):.2f} "
      f"(asymptotically 2)")

rng = np.random.default_rng(6)
U = rng.standard_normal((40, 300))
U /= np.linalg.norm(U, axis=1, keepdims=True)
many = MatrixFamily(np.einsum("ki,kj->kij", U, U))
g = gamma_u_quantities(many, 2.0)
for variant in ("improved", "u2"):
    b = uniform_hw_bound(many, 2.0, 1.0, 10.0, (g.gamma_2, g.gamma_alpha), variant=variant)
    print(f"{variant:>8}: Gaussian-branch denominator {b.gaussian_denominator:.3f}")
