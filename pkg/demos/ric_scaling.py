"""Exact group-RIC of block-diagonal Gaussian matrices and its decay in m.

Run: python3 demos/ric_scaling.py
"""

import numpy as np

from blockrip import (DistributionSpec, GroupPartition, RngStream, exact_group_ric, mc_group_ric_lower,
                      phase_transition, random_block_diagonal)

part = GroupPartition.contiguous(8, 2)
B = random_block_diagonal(DistributionSpec.gaussian(1.0), L=2, m=8, d=4, rng=RngStream(1))
exact = exact_group_ric(B, None, part, 2)
lower = mc_group_ric_lower(B, None, part, 2, 10**5, RngStream(2))
print(f"delta_2 exact {exact.delta:.4f} (worst support {exact.worst_support}), "
      f"Monte Carlo lower bound {lower.delta:.4f}")

m_grid = [8, 16, 32, 64, 128]
cells = phase_transition(DistributionSpec.gaussian(1.0), "identity", GroupPartition.contiguous(32, 2), [1], m_grid,
                         d=8, L=4, delta_target=0.3, trials_per_cell=50, rng=RngStream(3))
print("\n  m   mean delta_1   P{delta_1 <= 0.3}")
for c in cells:
    print(f"{c.m:4d}   {c.mean_delta:.4f}         {c.prob:.2f} +- {c.ci:.2f}")
slope = np.polyfit(np.log(m_grid), np.log([c.mean_delta for c in cells]), 1)[0]
print(f"log-log slope {slope:.3f}; square-root concentration predicts -0.5")
