"""Order-2 chaos statistics and Hanson-Wright type bounds.

The empirical side (suprema of centred quadratic forms, decoupled bilinear
forms, moment curves, tail curves) is Monte Carlo on top of
:mod:`blockrip.distributions`.  The theoretical side evaluates bound shapes
whose absolute constants are left as parameters; see :func:`calibrate_constant`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DistributionSpec, sample_array
from .errors import FitDomainError, ParameterDomainError
from .rng import as_stream, chunk_sizes, ordered_map
from .stats import wilson_halfwidth

CHUNK = 100_000


@dataclass
class MatrixFamily:
    """A finite set of equally shaped matrices with cached norms and radii."""

    members: np.ndarray
    fro: np.ndarray = field(init=False, repr=False)
    op22: np.ndarray = field(init=False, repr=False)
    op2inf: np.ndarray = field(init=False, repr=False)
    gram_fro: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.asarray(self.members, dtype=float)
        if A.ndim == 2:
            A = A[None]
        if A.ndim != 3 or A.shape[0] == 0:
            raise ValueError("family must be a non-empty stack of equally shaped matrices")
        if not np.all(np.isfinite(A)):
            raise ValueError("matrix entries must be finite")
        A.setflags(write=False)
        self.members = A
        sv = np.linalg.svd(A, compute_uv=False)
        self.fro = np.sqrt(np.sum(A**2, axis=(1, 2)))
        self.op22 = sv[:, 0] if sv.shape[1] else np.zeros(len(A))
        self.op2inf = np.sqrt(np.max(np.sum(A**2, axis=2), axis=1))
        self.gram_fro = np.sqrt(np.sum(sv**4, axis=1))

    @classmethod
    def of(cls, *matrices) -> "MatrixFamily":
        return cls(np.stack([np.asarray(m, dtype=float) for m in matrices]))

    def __len__(self):
        return self.members.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.members.shape[1:]

    @property
    def M_F(self) -> float:
        return float(self.fro.max())

    @property
    def M_22(self) -> float:
        return float(self.op22.max())

    @property
    def M_2inf(self) -> float:
        return float(self.op2inf.max())

    @property
    def sup_gram_F(self) -> float:
        """``sup ||A^T A||_F``."""
        return float(self.gram_fro.max())

    def scaled(self, c: float) -> "MatrixFamily":
        return MatrixFamily(self.members * c)


def alpha_star(alpha: float) -> float:
    """Conjugate index: ``alpha / (alpha - 1)`` on (1, 2], ``inf`` on (0, 1]."""
    if not 0 < alpha <= 2:
        raise ParameterDomainError("alpha in (0,2]")
    return math.inf if alpha <= 1 else alpha / (alpha - 1)


def chaos_sup_statistic(family: MatrixFamily, xi) -> np.ndarray | float:
    """``max_A | ||A xi||^2 - ||A||_F^2 |`` for unit-variance ``xi``.

    ``xi`` may be a single vector or a stack ``(T, n)``.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != family.shape[1]:
        raise ValueError(f"shape mismatch: family acts on length {family.shape[1]}, got {xi.shape[-1]}")
    single = xi.ndim == 1
    X = np.atleast_2d(xi)
    A = family.members
    out = np.empty(X.shape[0])
    step = max(1, 2_000_000 // (len(family) * family.shape[0]))
    for s in range(0, X.shape[0], step):
        Y = np.einsum("kmn,tn->tkm", A, X[s:s + step])
        out[s:s + step] = np.max(np.abs(np.sum(Y**2, axis=2) - family.fro**2), axis=1)
    return float(out[0]) if single else out


def decoupled_chaos(A, eta, eta_tilde):
    """``eta^T A^T A eta_tilde``; stacks of vectors are paired row by row."""
    A = np.asarray(A, dtype=float)
    eta = np.asarray(eta, dtype=float)
    eta_tilde = np.asarray(eta_tilde, dtype=float)
    if eta.shape != eta_tilde.shape or eta.shape[-1] != A.shape[1]:
        raise ValueError("shape mismatch between A, eta and eta_tilde")
    out = np.sum((eta @ A.T) * (eta_tilde @ A.T), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def decoupled_sup(family: MatrixFamily, eta, eta_tilde) -> np.ndarray:
    """``max_A |eta^T A^T A eta_tilde|`` for stacks ``(T, n)``."""
    Y = np.einsum("kmn,tn->tkm", family.members, np.atleast_2d(eta))
    Z = np.einsum("kmn,tn->tkm", family.members, np.atleast_2d(eta_tilde))
    return np.max(np.abs(np.sum(Y * Z, axis=2)), axis=1)


def model_alpha(spec: DistributionSpec) -> float:
    """Tail index used for bound shapes: Weibull alpha, 2 for sub-Gaussian models."""
    return spec.params["alpha"] if spec.kind == "weibull" else 2.0


@dataclass
class MomentCurve:
    p: np.ndarray
    lp: np.ndarray
    bound: np.ndarray
    constant: float
    rel_ci: np.ndarray
    flagged: np.ndarray
    trials: int
    pairing: str

    def slope(self, p_min: float = -np.inf, p_max: float = np.inf) -> float:
        """Least-squares slope of ``log L_p`` against ``log p`` on ``[p_min, p_max]``."""
        sel = (self.p >= p_min) & (self.p <= p_max) & (self.lp > 0)
        if np.count_nonzero(sel) < 2:
            raise FitDomainError("slope needs at least two positive moments in range")
        return float(np.polyfit(np.log(self.p[sel]), np.log(self.lp[sel]), 1)[0])


def _power_means(values, p_grid):
    """Means of ``|v|**p`` and their relative 95% CI half-widths, overflow safe."""
    v = np.abs(values)
    scale = v.max() if v.size and v.max() > 0 else 1.0
    w = v / scale
    means, rel = [], []
    for p in p_grid:
        wp = w**p
        m = wp.mean()
        means.append(m * scale**p)
        rel.append(1.96 * wp.std() / math.sqrt(v.size) / m if m > 0 else 0.0)
    return np.array(means), np.array(rel)


def empirical_moment_curve(A, spec: DistributionSpec, p_grid, trials: int, rng,
                           pairing: str = "paired", tile: int = 4096) -> MomentCurve:
    """Empirical ``L_p`` norms of ``eta^T A^T A eta_tilde`` with independent copies.

    ``pairing="paired"`` averages ``|X|^p`` over ``trials`` independent pairs.
    ``pairing="cross"`` draws ``trials`` vectors on each side and averages over
    all ``trials**2`` cross pairs (a U-statistic for the same expectation); it
    reaches far further into the tail at equal sampling cost.  Rank-one
    ``A^T A`` is evaluated through the exact factorisation of that average.

    The bound curve is ``C (p^{1/2} ||A^T A||_F + p^{2/alpha} ||A^T A||)``
    with ``C`` fixed so that it matches the empirical value at the grid
    point closest to ``p = 2``.  Points whose moment has a relative 95%
    CI above 50% are flagged.
    """
    A = np.asarray(A, dtype=float)
    p_grid = np.asarray(p_grid, dtype=float)
    if p_grid.size == 0 or np.any(p_grid < 2) or np.any(p_grid > 20):
        raise ParameterDomainError("moment orders must lie in [2, 20]")
    alpha = model_alpha(spec)
    n = A.shape[1]
    stream = as_stream(rng)
    M = A.T @ A
    if pairing == "paired":
        def run(k, size):
            gen = stream.child(k).generator()
            eta = sample_array(spec, (size, n), gen)
            return np.sum((eta @ M) * sample_array(spec, (size, n), gen), axis=1)

        means, rel = _power_means(np.concatenate(_chunked(run, trials)), p_grid)
    elif pairing == "cross":
        means, rel = _cross_power_means(M, spec, n, trials, stream, p_grid, tile)
    else:
        raise ValueError(f"unknown pairing {pairing!r}")
    lp = means ** (1 / p_grid)
    sv = np.linalg.svd(M, compute_uv=False)
    gram_F, gram_op = float(np.sqrt(np.sum(sv**2))), float(sv[0]) if sv.size else 0.0
    shape = np.sqrt(p_grid) * gram_F + p_grid ** (2 / alpha) * gram_op
    k = int(np.argmin(np.abs(p_grid - 2)))
    C = float(lp[k] / shape[k]) if shape[k] > 0 else 0.0
    return MomentCurve(p_grid, lp, C * shape, C, rel, rel > 0.5, int(trials), pairing)


def _chunked(fn, total, chunk=CHUNK):
    sizes = chunk_sizes(int(total), chunk)
    return ordered_map(lambda k: fn(k, sizes[k]), range(len(sizes)))


def _rank_one_factor(M):
    """``(lambda, v)`` with ``M = lambda v v^T`` when ``M`` has rank one, else ``None``."""
    w, V = np.linalg.eigh(M)
    order = np.argsort(-np.abs(w))
    w, V = w[order], V[:, order]
    if w.size and abs(w[0]) > 0 and (w.size == 1 or abs(w[1]) <= 1e-12 * abs(w[0])):
        return float(w[0]), V[:, 0]
    return None


def _cross_power_means(M, spec, n, trials, stream, p_grid, tile):
    """All-pairs means of ``|eta_i^T M eta~_j|^p`` with Hoeffding-type CIs."""
    T = int(trials)
    factor = _rank_one_factor(M)
    if factor is not None:
        lam, v = factor

        def proj(side):
            return lambda k, size: np.abs(sample_array(spec, (size, n), stream.child(side).child(k).generator()) @ v)

        a = np.concatenate(_chunked(proj(0), T))
        b = np.concatenate(_chunked(proj(1), T))
        sa, sb = max(a.max(), 1e-300), max(b.max(), 1e-300)
        means, rels = [], []
        for p in p_grid:
            ap, bp = (a / sa) ** p, (b / sb) ** p
            ma, mb = ap.mean(), bp.mean()
            means.append(ma * mb * (abs(lam) * sa * sb) ** p)
            # variance of the U-statistic: var(row means) + var(column means)
            var = (ap.var() * mb**2 + bp.var() * ma**2) / T
            rels.append(1.96 * math.sqrt(var) / (ma * mb) if ma * mb > 0 else 0.0)
        return np.array(means), np.array(rels)
    if T > 50_000:
        raise ParameterDomainError("cross pairing of a general matrix is limited to 50000 draws per side")
    eta = sample_array(spec, (T, n), stream.child(0).generator())
    eta_t = sample_array(spec, (T, n), stream.child(1).generator())
    Y = eta @ M
    scale = max(np.abs(Y).max() * np.abs(eta_t).max() * n, 1e-300)
    P = len(p_grid)
    row = np.zeros((P, T))
    col = np.zeros((P, T))
    for i in range(0, T, tile):
        for j in range(0, T, tile):
            W = np.abs(Y[i:i + tile] @ eta_t[j:j + tile].T) / scale
            for k, p in enumerate(p_grid):
                Wp = W**p
                row[k, i:i + tile] += Wp.sum(axis=1)
                col[k, j:j + tile] += Wp.sum(axis=0)
    row /= T
    col /= T
    mean = row.mean(axis=1)
    var = (row.var(axis=1) + col.var(axis=1)) / T
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(mean > 0, 1.96 * np.sqrt(var) / mean, 0.0)
    return mean * scale**p_grid, rel


def tails_from_moments_bound(constants, C_last: float, p0: float, t: float) -> float:
    """``e^{p0} exp(-min_k (t / C_k)^{1 / beta_k})`` clipped to [0, 1].

    This bounds ``P{|xi| > e (m t + C_last)}`` (see
    :func:`tails_from_moments_threshold`) for a variable whose ``L_p`` norms
    are at most ``sum_k C_k p^{beta_k} + C_last`` for ``p >= p0``.
    """
    cs = [(float(c), float(b)) for c, b in constants]
    if not cs or any(c <= 0 or b <= 0 for c, b in cs):
        raise ParameterDomainError("constants need C_k > 0 and beta_k > 0")
    if t < 0:
        raise ParameterDomainError("t must be >= 0")
    expo = min((t / c) ** (1 / b) for c, b in cs)
    return float(min(1.0, max(0.0, math.exp(p0 - expo))))


def tails_from_moments_threshold(constants, C_last: float, t: float) -> float:
    """Deviation level ``e (m t + C_last)`` paired with :func:`tails_from_moments_bound`."""
    return math.e * (len(constants) * t + C_last)


def tails_from_moments_companion(constants, C_last: float, p0: float, t: float) -> tuple[float, float]:
    """``(threshold, bound)`` with ``P{|xi| > e(sum_k C_k t^beta_k + C_last)} <= e^{p0 - t}``."""
    level = math.e * (sum(c * t**b for c, b in constants) + C_last)
    return level, float(min(1.0, math.exp(p0 - t)))


def hw_exponents(A, L: float, alpha: float, t: float) -> tuple[float, float]:
    """The two branches ``t^2 / (L^4 ||A||_F^2)`` and ``(t / (L^2 ||A||))^{alpha/2}``."""
    A = np.asarray(A, dtype=float)
    fro = float(np.linalg.norm(A))
    op = float(np.linalg.norm(A, 2)) if A.size else 0.0

    def ratio(num, den):
        if num == 0:
            return 0.0
        return math.inf if den == 0 else num / den

    return ratio(t * t, L**4 * fro**2), ratio(t, L**2 * op) ** (alpha / 2)


def hw_bound_alpha(A, L: float, alpha: float, t: float, c: float = 1.0) -> float:
    """Hanson-Wright tail bound for alpha-subexponential entries, clipped to 1."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or np.max(np.abs(A - A.T), initial=0) > 1e-10:
        raise ValueError("A must be square and symmetric")
    if L < 0 or t < 0:
        raise ParameterDomainError("L and t must be >= 0")
    if not 0 < alpha <= 2:
        raise ParameterDomainError("alpha in (0,2]")
    g, h = hw_exponents(A, L, alpha, t)
    return float(min(1.0, 2 * math.exp(-c * min(g, h))))


@dataclass
class UniformHWBound:
    threshold: float
    prob: float
    gaussian_denominator: float
    exponent: float
    Gamma: float
    U1: float
    variant: str


def uniform_hw_bound(family: MatrixFamily, alpha: float, L: float, t: float, gamma_estimates,
                     C: float = 1.0, C1: float = 1.0, variant: str = "improved") -> UniformHWBound:
    """Uniform Hanson-Wright deviation bound for ``sup_A | ||A xi||^2 - E ||A xi||^2 |``.

    ``gamma_estimates = (gamma_2, gamma_alpha)``.  The deviation level is
    ``C L^2 (U1 + t)`` with ``U1 = Gamma (Gamma + M_F)``.  With
    ``variant="improved"`` the probability is
    ``C1 exp(-min{(t / sup||A^T A||_F)^2, (t / M_22^2)^{alpha/2}})``;
    ``variant="u2"`` evaluates the earlier form with ``U2 = M_22 Gamma +
    sup||A^T A||_F`` and the extra ``(t / U3)^alpha`` branch.
    """
    if t < 0:
        raise ParameterDomainError("t must be >= 0")
    a_star = alpha_star(alpha)
    g2, ga = (float(v) for v in gamma_estimates)
    Gamma = g2 + ga
    U1 = Gamma * (Gamma + family.M_F)

    def branch(den, power):
        if t == 0:
            return 0.0
        return math.inf if den == 0 else (t / den) ** power

    heavy = branch(family.M_22**2, alpha / 2)
    if variant == "improved":
        den = family.sup_gram_F
        expo = min(branch(den, 2), heavy)
    elif variant == "u2":
        if math.isinf(a_star):
            m_beta = family.M_2inf
        elif a_star == 2:
            m_beta = family.M_22
        else:
            raise ParameterDomainError("only alpha = 2 or alpha <= 1 are supported (l2 -> l_beta radius)")
        den = family.M_22 * Gamma + family.sup_gram_F
        expo = min(branch(den, 2), branch(m_beta * Gamma, alpha), heavy)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    prob = min(1.0, C1 * math.exp(-expo))
    return UniformHWBound(C * L * L * (U1 + t), prob, den, expo, Gamma, U1, variant)


def calibrate_constant(prefactor: float, exponent: float, target_prob: float) -> float:
    """Largest ``c`` with ``prefactor * exp(-c * exponent) >= target_prob``.

    Used to pin the unspecified absolute constant of a bound shape on a
    calibration instance; the value is then frozen for other instances.
    """
    if not 0 < target_prob <= 1:
        raise ValueError("target probability must lie in (0, 1]")
    if exponent <= 0:
        return math.inf
    return max(0.0, math.log(prefactor / target_prob) / exponent)


@dataclass
class TailCurve:
    thresholds: np.ndarray
    empirical_probs: np.ndarray
    trials: int
    ci_halfwidths: np.ndarray

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        self.empirical_probs = np.asarray(self.empirical_probs, dtype=float)
        if np.any(np.diff(self.thresholds) <= 0):
            raise ValueError("thresholds must be strictly increasing")


def _tail_chunk(family, spec, thresholds, size, stream):
    xi = sample_array(spec, (size, family.shape[1]), stream.generator(), unit_variance=True)
    stat = np.sort(chaos_sup_statistic(family, xi))
    # count of stat > t
    return size - np.searchsorted(stat, thresholds, side="right")


def empirical_tail(family: MatrixFamily, spec: DistributionSpec, thresholds, trials: int, rng,
                   chunk: int = CHUNK) -> TailCurve:
    """Empirical ``P{sup statistic > t}`` with Wilson half-widths.

    Entries are drawn with unit variance.  Trials are split into fixed chunks,
    chunk ``k`` drawing from ``rng.child(k)``, so results do not depend on
    the worker count.
    """
    if trials < 1000:
        raise ParameterDomainError("empirical_tail needs at least 1000 trials")
    thr = np.asarray(thresholds, dtype=float)
    stream = as_stream(rng)
    sizes = chunk_sizes(int(trials), chunk)
    counts = ordered_map(lambda k: _tail_chunk(family, spec, thr, sizes[k], stream.child(k)), range(len(sizes)))
    hits = np.sum(counts, axis=0)
    return TailCurve(thr, hits / trials, int(trials), wilson_halfwidth(hits, trials))


def tail_regime_fit(curve: TailCurve, split: float, p_lo: float = 1e-4, p_hi: float = 0.5,
                    min_points: int = 5) -> tuple[float, float]:
    """Slopes of ``log(-log P)`` against ``log t`` below and above ``split``.

    Only points with ``p_lo < P < p_hi`` enter the fits; each side needs
    ``min_points`` of them.
    """
    t, P = curve.thresholds, curve.empirical_probs
    ok = (P > p_lo) & (P < p_hi) & (t > 0)
    slopes = []
    for side in (ok & (t < split), ok & (t >= split)):
        if np.count_nonzero(side) < min_points:
            raise FitDomainError(f"tail fit: {np.count_nonzero(side)} usable points on one side of "
                                 f"split={split}, need {min_points}")
        slopes.append(float(np.polyfit(np.log(t[side]), np.log(-np.log(P[side])), 1)[0]))
    return slopes[0], slopes[1]


def comparison_model(spec: DistributionSpec) -> DistributionSpec:
    """Symmetric Weibull model used for decoupling: ``W_s(alpha)`` of the entry model.

    phi-sub-Gaussian entries compare against ``W_s(1)``.
    """
    if spec.kind == "weibull":
        return spec
    if spec.kind == "power_phi":
        return DistributionSpec.weibull(1.0)
    return DistributionSpec.weibull(2.0)


@dataclass
class DecouplingResult:
    coupled_Lp: float
    decoupled_Lp: float

    @property
    def ratio(self) -> float:
        return self.coupled_Lp / self.decoupled_Lp if self.decoupled_Lp > 0 else math.nan


def decoupling_comparison(family: MatrixFamily, spec: DistributionSpec, p: int, trials: int, rng,
                          chunk: int = CHUNK) -> DecouplingResult:
    """Empirical ``L_p`` of the coupled supremum and of its decoupled counterpart."""
    if not 1 <= p <= 8:
        raise ParameterDomainError("p must lie in [1, 8]")
    if spec.kind not in ("gaussian", "rademacher", "weibull", "power_phi"):
        raise ParameterDomainError("spec must be symmetric")
    comp = comparison_model(spec)
    stream = as_stream(rng)
    sizes = chunk_sizes(int(trials), chunk)
    n = family.shape[1]

    def run(k):
        gen = stream.child(k).generator()
        xi = sample_array(spec, (sizes[k], n), gen, unit_variance=True)
        eta = sample_array(comp, (sizes[k], n), gen)
        eta_t = sample_array(comp, (sizes[k], n), gen)
        return (np.sum(chaos_sup_statistic(family, xi) ** p),
                np.sum(decoupled_sup(family, eta, eta_t) ** p))

    parts = np.array(ordered_map(run, range(len(sizes))))
    tot = parts.sum(axis=0) / trials
    return DecouplingResult(float(tot[0] ** (1 / p)), float(tot[1] ** (1 / p)))
