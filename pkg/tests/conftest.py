import itertools
import math

import numpy as np
import pytest


def jacobi_eigenvalues(S, tol=1e-14, sweeps=100):
    """Cyclic Jacobi rotations; independent of LAPACK and of power iteration."""
    A = np.array(S, dtype=float)
    n = A.shape[0]
    for _ in range(sweeps):
        off = math.sqrt(max(np.sum(A**2) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * max(1.0, np.abs(A).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                A = J.T @ A @ J
    return np.sort(np.diag(A))


def interval_cover_count(x, r):
    """Minimum number of closed radius-r balls covering points on a line (exact greedy)."""
    xs = np.sort(np.asarray(x, dtype=float))
    count, i = 0, 0
    while i < xs.size:
        reach = xs[i] + 2 * r
        count += 1
        while i < xs.size and xs[i] <= reach + 1e-15:
            i += 1
    return count


def brute_group_ric(A, groups, s):
    """delta_s from Jacobi eigenvalues of every restricted Gram matrix."""
    worst = 0.0
    for k in range(1, s + 1):
        for T in itertools.combinations(range(len(groups)), k):
            cols = sorted(i for g in T for i in groups[g])
            ev = jacobi_eigenvalues(A[:, cols].T @ A[:, cols])
            worst = max(worst, ev[-1] - 1, 1 - ev[0])
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)
