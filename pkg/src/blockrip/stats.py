"""Small statistical helpers used by the Monte Carlo experiments."""

from __future__ import annotations

import numpy as np
from scipy import stats as _st


def wilson_interval(successes, trials, conf: float = 0.95):
    """Wilson score interval ``(low, high)`` for a binomial proportion.

    Works elementwise on arrays.
    """
    k = np.asarray(successes, dtype=float)
    n = np.asarray(trials, dtype=float)
    z = _st.norm.ppf(0.5 + conf / 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(n > 0, k / n, 0.0)
        denom = 1 + z**2 / n
        centre = (p + z**2 / (2 * n)) / denom
        half = z * np.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    low = np.clip(centre - half, 0.0, 1.0)
    high = np.clip(centre + half, 0.0, 1.0)
    return low, high


def wilson_halfwidth(successes, trials, conf: float = 0.95):
    low, high = wilson_interval(successes, trials, conf)
    return (high - low) / 2


def binomial_se(p, n):
    """Standard error of a proportion ``p`` estimated from ``n`` trials."""
    p = np.asarray(p, dtype=float)
    return np.sqrt(p * (1 - p) / n)
