"""Group partitions, mixed norms and group-sparse approximation.

Indices are 0-based throughout the Python API.  The text config format uses
1-based index lists (see :meth:`GroupPartition.from_config`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import CapacityError, ParameterDomainError, ValidationError

MAX_SUPPORTS = 10**6


@dataclass(frozen=True)
class GroupPartition:
    groups: tuple

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        if not groups or any(len(g) == 0 for g in groups):
            raise ValidationError("partition: groups must be non-empty")
        seen = {}
        for gi, g in enumerate(groups):
            for i in g:
                if i < 0:
                    raise ValidationError(f"partition: negative index {i}")
                if i in seen:
                    raise ValidationError(f"partition: overlap at index {i + 1}")
                seen[i] = gi
        D = len(seen)
        missing = sorted(set(range(D)) - seen.keys())
        if missing:
            raise ValidationError(f"partition: index {missing[0] + 1} not covered")
        labels = np.empty(D, dtype=np.intp)
        for i, gi in seen.items():
            labels[i] = gi
        labels.setflags(write=False)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "_labels", labels)

    @classmethod
    def contiguous(cls, D: int, size: int) -> "GroupPartition":
        if D % size:
            raise ValidationError("partition: D must be a multiple of the group size")
        return cls(tuple(tuple(range(k, k + size)) for k in range(0, D, size)))

    @classmethod
    def from_config(cls, groups, D: int | None = None) -> "GroupPartition":
        """Build from 1-based index lists and optionally check the cover size."""
        part = cls(tuple(tuple(int(i) - 1 for i in g) for g in groups))
        if D is not None and part.D != D:
            raise ValidationError(f"partition: covers {part.D} indices, expected D={D}")
        return part

    def to_config(self) -> list[list[int]]:
        return [[i + 1 for i in g] for g in self.groups]

    @property
    def labels(self) -> np.ndarray:
        """Group id of every coordinate."""
        return self._labels

    @property
    def D(self) -> int:
        return self._labels.size

    @property
    def G(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    @property
    def g(self) -> int:
        return max(self.sizes)

    def columns(self, support) -> np.ndarray:
        """Coordinate indices of a union of groups, sorted."""
        if len(support) == 0:
            return np.zeros(0, dtype=np.intp)
        return np.sort(np.concatenate([self.groups[i] for i in support]))

    def indicator(self) -> np.ndarray:
        """``(D, G)`` 0/1 membership matrix."""
        M = np.zeros((self.D, self.G))
        M[np.arange(self.D), self._labels] = 1.0
        return M


@dataclass(frozen=True)
class GroupSparseVector:
    data: np.ndarray
    partition: GroupPartition
    active_groups: tuple

    def __post_init__(self):
        mask = np.ones(self.partition.D, dtype=bool)
        mask[self.partition.columns(self.active_groups)] = False
        if np.any(self.data[mask] != 0):
            raise ValueError("data must vanish outside the active groups")


def group_norms(x, partition: GroupPartition) -> np.ndarray:
    """Euclidean norm of every group; ``x`` may be a stack ``(..., D)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != partition.D:
        raise ValueError(f"dimension mismatch: expected length {partition.D}, got {x.shape[-1]}")
    return np.sqrt((x**2) @ partition.indicator())


def mixed_norm(x, partition: GroupPartition, p: float) -> float:
    """``(sum_i ||x_{S_i}||_2**p)**(1/p)``; ``p = inf`` gives the largest group norm."""
    if not p >= 1:
        raise ParameterDomainError("mixed_norm: p must be >= 1")
    n = group_norms(x, partition)
    if math.isinf(p):
        return float(n.max(axis=-1)) if n.ndim == 1 else n.max(axis=-1)
    out = np.sum(n**p, axis=-1) ** (1 / p)
    return float(out) if np.ndim(out) == 0 else out


def group_l0(x, partition: GroupPartition, zero_tol: float = 1e-12) -> int:
    if zero_tol < 0:
        raise ParameterDomainError("group_l0: zero_tol must be >= 0")
    return int(np.count_nonzero(group_norms(x, partition) > zero_tol))


def top_groups(x, partition: GroupPartition, s: int) -> tuple[int, ...]:
    """Indices of the ``s`` largest groups, ties to the smaller index, sorted."""
    if not 0 <= s <= partition.G:
        raise ParameterDomainError(f"s must lie in [0, G={partition.G}]")
    order = np.argsort(-group_norms(x, partition), kind="stable")
    return tuple(sorted(int(i) for i in order[:s]))


def best_group_approx(x, partition: GroupPartition, s: int) -> tuple[GroupSparseVector, float]:
    """Best ``s``-group approximation and its ``l_{S,1}`` error."""
    x = np.asarray(x, dtype=float)
    keep = top_groups(x, partition, s)
    z = np.zeros_like(x)
    cols = partition.columns(keep)
    z[cols] = x[cols]
    norms = group_norms(x, partition)
    dropped = np.ones(partition.G, dtype=bool)
    dropped[list(keep)] = False
    return GroupSparseVector(z, partition, keep), float(norms[dropped].sum())


def coherence_mu(psi, partition: GroupPartition, d: int) -> float:
    """``min(sqrt(d) * max_i ||psi_i||_{S,inf}, 1)`` over the rows of ``psi``."""
    P = psi.matrix if hasattr(psi, "matrix") else np.asarray(psi, dtype=float)
    if P.shape != (partition.D, partition.D):
        raise ValueError("basis and partition dimensions disagree")
    row_max = group_norms(P, partition).max(axis=1)
    return float(min(math.sqrt(d) * row_max.max(), 1.0))


def count_group_supports(G: int, s: int) -> int:
    return sum(math.comb(G, k) for k in range(1, min(s, G) + 1))


def enumerate_group_supports(G: int, s: int, cap: int = MAX_SUPPORTS) -> Iterator[tuple[int, ...]]:
    """All non-empty supports of size at most ``s``, by size then lexicographically."""
    if s < 0 or G < 1:
        raise ParameterDomainError("supports: need G >= 1 and s >= 0")
    total = count_group_supports(G, s)
    if total > cap:
        raise CapacityError(f"capacity: {total} supports exceed the cap of {cap}; use Monte Carlo mode")
    return itertools.chain.from_iterable(
        itertools.combinations(range(G), k) for k in range(1, min(s, G) + 1))
