"""Group-sparse recovery by iterative hard thresholding as the block height grows.

Run: python3 demos/recovery.py   (about a minute)
"""

from blockrip import DistributionSpec, GroupPartition, RngStream, recovery_experiment

rows = recovery_experiment(DistributionSpec.gaussian(1.0), "haar", GroupPartition.contiguous(64, 4), s=2,
                           m_grid=[2, 4, 8, 16, 64, 256], trials=8, solver="iht", rng=RngStream(7), d=16, L=4,
                           signals_per_matrix=10, check_gate=True)
print("  m  success  +-ci   gated matrices (all signals exact?)")
for r in rows:
    gated = [i for i in r.instances if i.gate]
    print(f"{r.m:3d}   {r.success_rate:.2f}   {r.ci:.2f}   {len(gated)} ({all(i.successes == i.signals for i in gated)})")
