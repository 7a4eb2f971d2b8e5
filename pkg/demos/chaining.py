"""Covering numbers and Dudley integrals for the operator set behind the RIP proof.

Run: python3 demos/chaining.py
"""

import math

import numpy as np

from blockrip import (GroupPartition, MetricPointSet, RngStream, build_rip_metric_set, coherence_mu,
                      covering_number, dudley_gamma, gamma_split_estimate, haar_orthogonal)

seg = MetricPointSet.from_vectors(np.linspace(0, 1, 200))
print("segment [0,1]:  radius  greedy-cover  2r-packing")
for r in (0.2, 0.05, 0.01):
    up, lo = covering_number(seg, r)
    print(f"               {r:6.2f}  {up:12d}  {lo:10d}")

d, L, s, m = 4, 4, 2, 8
part = GroupPartition.contiguous(d * L, 2)
for mode in ("identity", "haar"):
    psi = None if mode == "identity" else haar_orthogonal(d * L, RngStream(1))
    ms = build_rip_metric_set(psi, part, s, m, d, L, 600, RngStream(2))
    mu = coherence_mu(np.eye(d * L) if psi is None else psi, part, d)
    split = gamma_split_estimate(ms.points, mu, s)
    print(f"\n{mode} basis: mu_S={mu:.3f}, sampled radius {ms.M_22:.3f} <= sqrt(s) mu_S = {math.sqrt(s) * mu:.3f}")
    print(f"  gamma_2 ~ {dudley_gamma(ms.points, 2.0):.3f}, entropy integral split at mu_S: "
          f"{split.low:.3f} + {split.high:.3f}")
