"""Weibull entries: tail frequencies, Orlicz norms and the increment check.

Run: python3 demos/heavy_tails.py
"""

import math

import numpy as np

from blockrip import DistributionSpec, PhiFunction, RngStream, estimate_psi_alpha_norm, increment_tail_check, sample

for alpha in (0.5, 1.0, 2.0):
    z = np.abs(sample(DistributionSpec.weibull(alpha), 10**6, RngStream(1)))
    cells = "  ".join(f"x={x}: {np.mean(z > x):.4f} / {math.exp(-x**alpha):.4f}" for x in (0.5, 1, 2))
    print(f"alpha={alpha:<4} empirical / exact tail   {cells}")
    print(f"           psi_alpha norm estimate {estimate_psi_alpha_norm(z, alpha):.3f}")

g = sample(DistributionSpec.gaussian(1.0), 10**6, RngStream(2))
print(f"\nGaussian psi_2 norm {estimate_psi_alpha_norm(g, 2.0):.4f} (closed form {math.sqrt(8 / 3):.4f})")

rep = increment_tail_check(DistributionSpec.gaussian(1.0), PhiFunction(2.0), [1, 2, 3, 4], 10**6, RngStream(3))
print("\nP{|X| >= u tau} against 2 exp(-phi*(u)):")
for u, emp, bound, _, ok in rep.rows():
    print(f"  u={u:g}  {emp:.2e}  <=  {bound:.2e}  {'ok' if ok else 'VIOLATED'}")
