"""Covering numbers and chaining functionals on finite metric spaces.

Everything here works on a precomputed distance matrix, so the estimators are
agnostic to where the points came from.  Builders are provided for sets of
matrices under operator/Frobenius metrics and for the sets of operators
``V(x)`` that arise when the sensing matrix is written as a chaos in its
random entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import PhiFunction
from .errors import CapacityError, ParameterDomainError
from .group_model import GroupPartition
from .rip import _random_group_sparse
from .rng import as_stream

MAX_POINTS = 2048
GRID_STEPS = 10
BISECT_STEPS = 8


@dataclass
class MetricPointSet:
    """A finite metric space given by its symmetric distance matrix."""

    distances: np.ndarray
    metric: str = "custom"
    points: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        Dm = np.asarray(self.distances, dtype=float)
        if Dm.ndim != 2 or Dm.shape[0] != Dm.shape[1] or Dm.shape[0] == 0:
            raise ValueError("distance matrix must be square and non-empty")
        if Dm.shape[0] > MAX_POINTS:
            raise CapacityError(f"capacity: {Dm.shape[0]} points exceed {MAX_POINTS}")
        if np.any(Dm < 0) or np.max(np.abs(Dm - Dm.T)) > 1e-10 * max(1.0, Dm.max()):
            raise ValueError("distances must be non-negative and symmetric")
        Dm = (Dm + Dm.T) / 2
        np.fill_diagonal(Dm, 0.0)
        Dm.setflags(write=False)
        self.distances = Dm

    def __len__(self):
        return self.distances.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.distances.max())

    def scaled(self, c: float) -> "MetricPointSet":
        pts = None if self.points is None else self.points * c
        return MetricPointSet(self.distances * abs(c), self.metric, pts)

    def triangle_violation(self, triples: int = 1000, rng=0) -> float:
        """Largest ``d(a,c) - d(a,b) - d(b,c)`` over random triples (<= 0 for a metric)."""
        idx = as_stream(rng).generator().integers(0, len(self), size=(triples, 3))
        a, b, c = idx.T
        Dm = self.distances
        return float(np.max(Dm[a, c] - Dm[a, b] - Dm[b, c]))

    @classmethod
    def from_vectors(cls, X) -> "MetricPointSet":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return cls(_euclidean(X), "euclidean", X)

    @classmethod
    def from_matrices(cls, members, metric: str = "2->2") -> "MetricPointSet":
        """Pairwise ``||A_i - A_j||`` for ``metric`` in ``"fro"``, ``"2->2"``, ``"2->inf"``."""
        A = np.asarray(members, dtype=float)
        K = A.shape[0]
        if K > MAX_POINTS:
            raise CapacityError(f"capacity: {K} points exceed {MAX_POINTS}")
        Dm = np.zeros((K, K))
        for i in range(K - 1):
            diff = A[i + 1:] - A[i]
            if metric == "fro":
                row = np.sqrt(np.sum(diff**2, axis=(1, 2)))
            elif metric == "2->2":
                row = np.linalg.svd(diff, compute_uv=False)[:, 0]
            elif metric == "2->inf":
                row = np.sqrt(np.max(np.sum(diff**2, axis=2), axis=1))
            else:
                raise ValueError(f"unknown metric {metric!r}")
            Dm[i, i + 1:] = row
            Dm[i + 1:, i] = row
        return cls(Dm, metric, A)


def _basis_matrix(psi, D: int) -> np.ndarray:
    if psi is None:
        return np.eye(D)
    return np.asarray(psi.matrix if hasattr(psi, "matrix") else psi, dtype=float)


def _euclidean(X) -> np.ndarray:
    sq = np.sum(X**2, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2 * X @ X.T
    return np.sqrt(np.maximum(D2, 0.0))


def covering_number(points: MetricPointSet, radius: float) -> tuple[int, int]:
    """``(upper, lower)`` bounds on the covering number at ``radius``.

    The upper bound is a greedy cover by closed balls centred at points of
    the set.  The lower bound is a greedy set whose pairwise distances exceed
    ``2 * radius``: no ball of that radius can contain two of its points.
    """
    if radius < 0:
        raise ParameterDomainError("radius must be >= 0")
    Dm = points.distances
    n = len(points)
    covered = np.zeros(n, dtype=bool)
    upper = 0
    for i in range(n):
        if not covered[i]:
            upper += 1
            covered |= Dm[i] <= radius
    packed: list[int] = []
    for i in range(n):
        if not packed or np.all(Dm[i, packed] > 2 * radius):
            packed.append(i)
    return upper, len(packed)


def default_grid(points: MetricPointSet, steps: int = GRID_STEPS, ratio: float = 2.0) -> np.ndarray:
    """Geometric radii ``diam * ratio**-k``, decreasing from the diameter."""
    diam = points.diameter
    if diam == 0:
        return np.array([0.0])
    return diam * ratio ** -np.arange(int(round(steps * math.log(2) / math.log(ratio))) + 1)


def _entropy_profile(points: MetricPointSet, grid, power: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Interval endpoints and integrand values for the upper Riemann sum.

    On ``[u_{k+1}, u_k]`` the integrand is ``(log N(u_{k+1}))**power``; on
    ``[0, u_min]`` it is ``(log |T|)**power``, which dominates every covering
    number of a finite set.
    """
    u = np.sort(np.asarray(grid, dtype=float).ravel())[::-1]
    if u.size == 0:
        raise ParameterDomainError("radius grid must not be empty")
    if np.any(u < 0):
        raise ParameterDomainError("radius grid must be non-negative")
    edges = np.append(u, 0.0)
    vals = [math.log(covering_number(points, r)[0]) ** power for r in u[1:]]
    vals.append(math.log(len(points)) ** power)
    return edges, np.array(vals), float(u[-1])


def _integrate(edges, vals, lo=0.0, hi=math.inf) -> float:
    top, bottom = edges[:-1], edges[1:]
    lengths = np.clip(np.minimum(top, hi) - np.maximum(bottom, lo), 0.0, None)
    return float(np.sum(lengths * vals))


def dudley_gamma(points: MetricPointSet, alpha: float, radius_grid=None) -> float:
    """``alpha * int_0^diam (log N(T, d, u))**(1/alpha) du`` as an upper Riemann sum."""
    if not 0 < alpha <= 2:
        raise ParameterDomainError("alpha in (0,2]")
    if points.diameter == 0:
        return 0.0
    grid = default_grid(points) if radius_grid is None else radius_grid
    edges, vals, _ = _entropy_profile(points, grid, 1 / alpha)
    return alpha * _integrate(edges, vals)


@dataclass
class GammaSplit:
    low: float
    high: float
    lam: float

    @property
    def total(self) -> float:
        return self.low + self.high


def gamma_split_estimate(points: MetricPointSet, mu_S: float, s: int, lam: float | None = None,
                         radius_grid=None) -> GammaSplit:
    """Entropy integral (``alpha = 1``) split at ``lam`` into ``[0, lam]`` and ``[lam, top]``.

    ``top`` is ``max(sqrt(s) * mu_S, diameter)``; covering numbers equal one
    beyond the diameter, so the two pieces always add up to
    ``dudley_gamma(points, 1, radius_grid)``.  ``lam`` defaults to ``mu_S``.
    """
    top = math.sqrt(s) * mu_S
    if lam is None:
        lam = min(mu_S, top)
    if not 0 <= lam <= max(top, points.diameter):
        raise ParameterDomainError("need 0 <= lambda <= sqrt(s) * mu_S")
    if points.diameter == 0:
        return GammaSplit(0.0, 0.0, lam)
    grid = default_grid(points) if radius_grid is None else radius_grid
    edges, vals, _ = _entropy_profile(points, grid, 1.0)
    return GammaSplit(_integrate(edges, vals, 0.0, lam), _integrate(edges, vals, lam), lam)


def entropy_number(points: MetricPointSet, n: int, steps: int = BISECT_STEPS) -> float:
    """Smallest radius (up to bisection accuracy) whose greedy cover has at most ``N_n`` balls.

    ``N_0 = 1`` and ``N_n = 2**(2**n)``.  Returns 0 once ``N_n >= |T|``.
    """
    cap = 1 if n == 0 else (2 ** (2**n) if n < 6 else math.inf)
    if cap >= len(points):
        return 0.0
    lo, hi = 0.0, points.diameter
    for _ in range(steps):
        mid = (lo + hi) / 2
        if covering_number(points, mid)[0] <= cap:
            hi = mid
        else:
            lo = mid
    return hi


def gamma_phi_p_upper(points: MetricPointSet, phi: PhiFunction, p: float, delta_min: float | None = None) -> float:
    """``sum_{n >= k} (phi*)^{-1}(2**n) e_n`` with ``k = floor(log2 p)``.

    Terms stop once ``e_n`` drops below ``delta_min`` (default ``diam / 2**10``).
    """
    if p < 1:
        raise ParameterDomainError("p must be >= 1")
    if points.diameter == 0:
        return 0.0
    if delta_min is None:
        delta_min = points.diameter / 2**GRID_STEPS
    k = int(math.floor(math.log(p) / math.log(2) + 1e-12))
    total, n = 0.0, k
    while True:
        e = entropy_number(points, n)
        if e < delta_min:
            break
        total += phi.conjugate_inverse(2.0**n) * e
        n += 1
    return total


class VOperator:
    """The linear map ``xi -> (<Psi_l x, xi^l_i>)_{l, i}`` for fixed ``x``.

    ``xi`` is laid out as ``L`` blocks of ``m`` rows of length ``d``, so that
    ``B Psi x`` equals ``V(x) xi`` when ``xi`` collects the entries of the
    diagonal blocks of ``B`` row by row.
    """

    def __init__(self, x, psi, m: int, d: int, L: int):
        self.x = np.asarray(x, dtype=float)
        P = _basis_matrix(psi, d * L)
        if self.x.shape != (d * L,) or P.shape != (d * L, d * L):
            raise ValueError("dims: D must equal d*L")
        self.psi, self.m, self.d, self.L = P, m, d, L
        self.z = (P @ self.x).reshape(L, d)

    def apply(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float).reshape(self.L, self.m, self.d)
        return np.einsum("ld,lmd->lm", self.z, xi).reshape(-1)

    def dense(self) -> np.ndarray:
        """``(m L, m d L)`` matrix."""
        m, d, L = self.m, self.d, self.L
        V = np.zeros((m * L, m * d * L))
        for l in range(L):
            for i in range(m):
                start = (l * m + i) * d
                V[l * m + i, start:start + d] = self.z[l]
        return V

    @property
    def frobenius(self) -> float:
        return v_frobenius(self.x, self.m)

    @property
    def op_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.z, axis=1)))


def v_frobenius(x, m: int) -> float:
    """``||V(x)||_F = sqrt(m) ||x||``."""
    return math.sqrt(m) * float(np.linalg.norm(x))


def v_distance(x, y, psi, d: int, L: int, metric: str = "2->2", m: int = 1) -> float:
    """Distance between ``V(x)`` and ``V(y)``.

    The operator and ``2 -> inf`` distances both equal ``max_l ||Psi_l (x - y)||``;
    the Frobenius distance is ``sqrt(m) ||x - y||``.
    """
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if metric == "fro":
        return v_frobenius(diff, m)
    P = _basis_matrix(psi, d * L)
    return float(np.max(np.linalg.norm((P @ diff).reshape(L, d), axis=1)))


@dataclass
class RipMetricSet:
    points: MetricPointSet
    vectors: np.ndarray
    M_F: float
    M_22: float


def build_rip_metric_set(psi, partition: GroupPartition, s: int, m: int, d: int, L: int,
                         sample_count: int, rng, metric: str = "2->2") -> RipMetricSet:
    """Random unit ``s``-group-sparse vectors ``x`` and pairwise distances of ``V(x)``.

    ``M_22`` is the largest sampled ``||V(x)||_{2->2}``, a lower proxy for
    the radius of the full set.
    """
    if partition.D != d * L:
        raise ValueError("dims: D must equal d*L")
    if sample_count > MAX_POINTS:
        raise CapacityError(f"capacity: {sample_count} points exceed {MAX_POINTS}")
    X = _random_group_sparse(as_stream(rng).generator(), partition, s, sample_count)
    P = _basis_matrix(psi, d * L)
    Z = (X @ P.T).reshape(sample_count, L, d)
    if metric == "fro":
        Dm = math.sqrt(m) * _euclidean(X)
    elif metric in ("2->2", "2->inf"):
        Dm = np.zeros((sample_count, sample_count))
        for l in range(L):
            Dm = np.maximum(Dm, _euclidean(Z[:, l]))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    M_22 = float(np.max(np.linalg.norm(Z, axis=2)))
    return RipMetricSet(MetricPointSet(Dm, metric, X), X, math.sqrt(m), M_22)


@dataclass
class GammaQuantities:
    gamma_2: float
    gamma_alpha: float
    M_F: float
    M_22: float
    sup_gram_F: float

    @property
    def Gamma(self) -> float:
        return self.gamma_2 + self.gamma_alpha

    @property
    def U1(self) -> float:
        return self.Gamma * (self.Gamma + self.M_F)


def gamma_u_quantities(members, alpha: float, radius_grid=None) -> GammaQuantities:
    """Dudley-type estimates of ``gamma_2`` (operator metric) and ``gamma_alpha``.

    ``gamma_alpha`` uses the ``2 -> alpha*`` metric: operator norm for
    ``alpha = 2`` and ``2 -> inf`` for ``alpha <= 1``.
    """
    A = np.asarray(getattr(members, "members", members), dtype=float)
    if not 0 < alpha <= 2:
        raise ParameterDomainError("alpha in (0,2]")
    if 1 < alpha < 2:
        raise ParameterDomainError("only alpha = 2 or alpha <= 1 are supported (l2 -> l_beta metric)")
    op = MetricPointSet.from_matrices(A, "2->2")
    g2 = dudley_gamma(op, 2.0, radius_grid)
    other = op if alpha == 2 else MetricPointSet.from_matrices(A, "2->inf")
    ga = dudley_gamma(other, alpha, radius_grid)
    sv = np.linalg.svd(A, compute_uv=False)
    M_F = float(np.max(np.sqrt(np.sum(sv**2, axis=1))))
    return GammaQuantities(g2, ga, M_F, float(sv[:, 0].max()), float(np.max(np.sqrt(np.sum(sv**4, axis=1)))))


def chaining_report(points: MetricPointSet, radius_grid=None) -> list[tuple[float, int, int]]:
    """``(radius, cover_upper, cover_lower)`` rows over the grid."""
    grid = default_grid(points) if radius_grid is None else radius_grid
    return [(float(r), *covering_number(points, float(r))) for r in grid]
