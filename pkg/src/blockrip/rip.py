"""Group restricted isometry constants of ``A = B Psi / sqrt(m)``.

``exact_group_ric`` enumerates every support of at most ``s`` groups and reads
the extreme eigenvalues of the restricted Gram matrix, which gives the
supremum of ``| ||A x||^2 - 1 |`` over unit ``s``-group-sparse ``x`` exactly.
``mc_group_ric_lower`` evaluates the same objective on random unit vectors and
is therefore a lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DistributionSpec
from .errors import CapacityError
from .group_model import MAX_SUPPORTS, GroupPartition, count_group_supports, enumerate_group_supports, group_norms
from .matrices import BlockDiagonalMatrix, OrthogonalBasis, extreme_eigen_batch, haar_orthogonal, random_block_diagonal
from .rng import as_stream, ordered_map
from .stats import wilson_interval

RECOVERY_THRESHOLD = math.sqrt(2.0) - 1.0
MAX_GRAM = 512
_BATCH = 4096


@dataclass
class RicEstimate:
    delta: float
    mode: str
    supports_checked: int
    worst_support: tuple
    trials: int = 0
    delta_upper: float = 0.0
    """``lambda_max - 1`` at its worst support (exact mode)."""
    delta_lower: float = 0.0
    """``1 - lambda_min`` at its worst support (exact mode)."""


def sensing_matrix(B: BlockDiagonalMatrix, psi: OrthogonalBasis | None = None) -> np.ndarray:
    """Dense ``B Psi / sqrt(m)``; ``psi=None`` means the identity basis."""
    A = B.dense() if psi is None else B.times_basis(psi)
    return A / math.sqrt(B.m)


def ric_of_matrix(A, partition: GroupPartition, s: int, method: str = "eigh",
                  cap: int = MAX_SUPPORTS) -> RicEstimate:
    """Exact group-RIC of an explicit matrix ``A`` (columns indexed like ``partition``)."""
    A = np.asarray(A, dtype=float)
    if A.shape[1] != partition.D:
        raise ValueError(f"matrix has {A.shape[1]} columns, partition covers {partition.D}")
    supports = list(enumerate_group_supports(partition.G, s, cap))
    if not supports:
        return RicEstimate(0.0, "exact", 0, ())
    by_size: dict[int, list[int]] = {}
    cols = [partition.columns(T) for T in supports]
    for k, c in enumerate(cols):
        by_size.setdefault(c.size, []).append(k)
    if max(by_size) > MAX_GRAM:
        raise CapacityError(f"capacity: Gram size {max(by_size)} exceeds {MAX_GRAM}")
    lo = np.empty(len(supports))
    hi = np.empty(len(supports))
    for size, idx in by_size.items():
        for start in range(0, len(idx), _BATCH):
            part = idx[start:start + _BATCH]
            sub = A[:, np.stack([cols[k] for k in part])]  # (M, batch, size)
            grams = np.einsum("mki,mkj->kij", sub, sub)
            lo[part], hi[part] = extreme_eigen_batch(grams, method=method)
    up, down = hi - 1.0, 1.0 - lo
    dev = np.maximum(up, down)
    k = int(np.argmax(dev))
    return RicEstimate(float(dev[k]), "exact", len(supports), tuple(supports[k]),
                       delta_upper=float(up.max()), delta_lower=float(down.max()))


def exact_group_ric(B: BlockDiagonalMatrix, psi: OrthogonalBasis | None, partition: GroupPartition,
                    s: int, method: str = "eigh", cap: int = MAX_SUPPORTS) -> RicEstimate:
    """Exact ``delta_s`` of ``B Psi / sqrt(m)`` over all supports of <= ``s`` groups.

    ``method`` selects the eigen-solver for the restricted Gram matrices:
    ``"eigh"`` (LAPACK, default) or ``"power"`` (batched power iteration).
    """
    return ric_of_matrix(sensing_matrix(B, psi), partition, s, method, cap)


def _random_group_sparse(gen, partition: GroupPartition, s: int, n: int) -> np.ndarray:
    """``n`` unit vectors: uniform support of exactly ``s`` groups, Gaussian direction."""
    s = min(s, partition.G)
    X = np.zeros((n, partition.D))
    if s == 0:
        return X
    # uniform s-subsets: ranks of i.i.d. uniforms
    picks = np.argsort(gen.random((n, partition.G)), axis=1)[:, :s]
    mask = _one_hot(picks, partition.G)[:, partition.labels] > 0
    vals = gen.standard_normal((n, partition.D))
    X[mask] = vals[mask]
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X


def _one_hot(picks, G):
    out = np.zeros((picks.shape[0], G))
    np.put_along_axis(out, picks, 1.0, axis=1)
    return out


def mc_ric_of_matrix(A, partition: GroupPartition, s: int, trials: int, rng, chunk: int = 20_000) -> RicEstimate:
    A = np.asarray(A, dtype=float)
    gen = as_stream(rng).generator()
    best, best_support, done = 0.0, (), 0
    while done < trials:
        n = min(chunk, trials - done)
        X = _random_group_sparse(gen, partition, s, n)
        dev = np.abs(np.sum((X @ A.T) ** 2, axis=1) - 1.0)
        k = int(np.argmax(dev))
        if dev[k] > best:
            best = float(dev[k])
            best_support = tuple(int(i) for i in np.flatnonzero(group_norms(X[k], partition) > 0))
        done += n
    return RicEstimate(best, "monte_carlo_lower", trials, best_support, trials=trials)


def mc_group_ric_lower(B: BlockDiagonalMatrix, psi: OrthogonalBasis | None, partition: GroupPartition,
                       s: int, trials: int, rng) -> RicEstimate:
    """Lower bound on ``delta_s`` from ``trials`` random unit group-sparse vectors."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return mc_ric_of_matrix(sensing_matrix(B, psi), partition, s, trials, rng)


def recovery_gate(delta_2s: float) -> bool:
    """``delta_2s < sqrt(2) - 1``."""
    if delta_2s < 0:
        raise ValueError("delta must be non-negative")
    return bool(delta_2s < RECOVERY_THRESHOLD)


def make_basis(psi_mode, D: int, rng) -> OrthogonalBasis | None:
    """``"identity"`` -> ``None``, ``"haar"`` -> a Haar draw, or pass a basis through."""
    if isinstance(psi_mode, OrthogonalBasis):
        return psi_mode
    if psi_mode in (None, "identity"):
        return None
    if psi_mode == "haar":
        return haar_orthogonal(D, rng)
    raise ValueError(f"unknown psi_mode {psi_mode!r}")


@dataclass
class PhaseCell:
    s: int
    m: int
    prob: float
    mean_delta: float
    ci: float
    deltas: np.ndarray = field(repr=False)
    mode: str = "exact"
    note: str = ""


def phase_transition(spec: DistributionSpec, psi_mode, partition: GroupPartition, s_grid, m_grid,
                     d: int, L: int, delta_target: float, trials_per_cell: int, rng,
                     ric_mode: str = "exact", mc_trials: int = 10_000,
                     cap: int = MAX_SUPPORTS) -> list[PhaseCell]:
    """Empirical ``P{delta_s <= delta_target}`` on an ``(s, m)`` grid.

    ``ric_mode`` is ``"exact"`` (capacity errors are recorded per cell),
    ``"mc"`` (always Monte Carlo lower bounds) or ``"auto"`` (exact when the
    support count fits under ``cap``, Monte Carlo otherwise).  The basis is
    drawn once from stream child 0; matrix draw ``k`` of cell ``c`` uses
    ``rng.child(c + 1).child(k)``.
    """
    stream = as_stream(rng)
    if partition.D != d * L:
        raise ValueError("dims: D must equal d*L")
    psi = make_basis(psi_mode, partition.D, stream.child(0))
    cells = []
    grid = [(int(s), int(m)) for s in s_grid for m in m_grid]
    for c, (s, m) in enumerate(grid):
        cell_stream = stream.child(c + 1)
        mode = ric_mode
        if ric_mode == "auto":
            mode = "exact" if count_group_supports(partition.G, s) <= cap else "mc"
        if mode == "exact" and count_group_supports(partition.G, s) > cap:
            cells.append(PhaseCell(s, m, float("nan"), float("nan"), float("nan"), np.zeros(0), mode,
                                   f"capacity: {count_group_supports(partition.G, s)} supports exceed cap {cap}"))
            continue

        def one(k, s=s, m=m, mode=mode, cell_stream=cell_stream):
            ks = cell_stream.child(k)
            B = random_block_diagonal(spec, L, m, d, ks.child(0))
            if mode == "exact":
                return exact_group_ric(B, psi, partition, s, cap=cap).delta
            return mc_group_ric_lower(B, psi, partition, s, mc_trials, ks.child(1)).delta

        deltas = np.array(ordered_map(one, range(trials_per_cell)))
        hits = int(np.count_nonzero(deltas <= delta_target))
        low, high = wilson_interval(hits, trials_per_cell)
        cells.append(PhaseCell(s, m, hits / trials_per_cell, float(deltas.mean()),
                               float((high - low) / 2), deltas, mode))
    return cells
