"""Scalar random models and norm / tail estimators.

Four entry models are supported:

``gaussian``      centred normal with a given variance
``rademacher``    uniform on {-1, +1}
``weibull``       symmetric Weibull, ``-log P{|xi| > x} = x**alpha``
``power_phi``     ``a * Z`` with ``Z`` having density proportional to
                  ``exp(-|z|**r / r)``, ``r = q / (q - 1)``.  Its log-MGF grows
                  like ``|lambda|**q / q``, i.e. it is phi-sub-Gaussian for the
                  power function ``phi(x) = |x|**q / q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from .errors import ParameterDomainError
from .rng import as_stream
from .stats import binomial_se

KINDS = ("gaussian", "rademacher", "weibull", "power_phi")

# empirical MGF values above this are treated as overflow
MGF_CLIP = 1e30


@dataclass(frozen=True)
class DistributionSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterDomainError(f"dist: unknown kind {self.kind!r}")
        p = dict(self.params)
        if self.kind == "gaussian":
            v = float(p.setdefault("variance", 1.0))
            if not v > 0:
                raise ParameterDomainError("dist: variance must be positive")
        elif self.kind == "weibull":
            a = float(p.get("alpha", float("nan")))
            if not 0 < a <= 2:
                raise ParameterDomainError("dist: alpha in (0,2]")
        elif self.kind == "power_phi":
            q = float(p.get("q", float("nan")))
            if not 1 < q <= 2:
                raise ParameterDomainError("dist: q in (1,2]")
            if not float(p.setdefault("a", 1.0)) > 0:
                raise ParameterDomainError("dist: scale a must be positive")
        object.__setattr__(self, "params", {k: float(v) for k, v in p.items()})

    @classmethod
    def gaussian(cls, variance: float = 1.0) -> "DistributionSpec":
        return cls("gaussian", {"variance": variance})

    @classmethod
    def rademacher(cls) -> "DistributionSpec":
        return cls("rademacher")

    @classmethod
    def weibull(cls, alpha: float) -> "DistributionSpec":
        return cls("weibull", {"alpha": alpha})

    @classmethod
    def power_phi(cls, q: float, a: float = 1.0) -> "DistributionSpec":
        return cls("power_phi", {"q": q, "a": a})

    @property
    def variance(self) -> float:
        p = self.params
        if self.kind == "gaussian":
            return p["variance"]
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "weibull":
            return math.gamma(1 + 2 / p["alpha"])
        r = _power_shape(p["q"])
        return p["a"] ** 2 * r ** (2 / r) * math.gamma(3 / r) / math.gamma(1 / r)

    def to_config(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_config(cls, cfg: dict) -> "DistributionSpec":
        cfg = dict(cfg)
        kind = cfg.pop("kind", None)
        if kind is None:
            raise ParameterDomainError("dist: missing kind")
        return cls(str(kind), cfg)


def _power_shape(q: float) -> float:
    return q / (q - 1)


@dataclass(frozen=True)
class PhiFunction:
    """The power N-function ``phi(x) = |x|**q / q`` with ``q`` in (1, 2]."""

    q: float = 2.0

    def __post_init__(self):
        if not 1 < self.q <= 2:
            raise ParameterDomainError("phi: q in (1,2]")

    @property
    def q_star(self) -> float:
        return self.q / (self.q - 1)

    def __call__(self, x):
        return np.abs(x) ** self.q / self.q

    def inverse(self, y):
        """Inverse on ``[0, inf)``; negative input is clipped to zero."""
        return (self.q * np.maximum(y, 0.0)) ** (1 / self.q)

    def conjugate(self, y):
        return np.abs(y) ** self.q_star / self.q_star

    def conjugate_inverse(self, y):
        return (self.q_star * np.maximum(y, 0.0)) ** (1 / self.q_star)


def phi_conjugate(phi: PhiFunction, y):
    """Young-Fenchel transform ``sup_x (x*y - phi(x))`` in closed form."""
    return phi.conjugate(y)


def phi_conjugate_grid(phi: PhiFunction, y: float, points: int = 200_001) -> float:
    """Legendre transform by brute-force search, used as a cross-check.

    The search runs over a uniform grid of ``points`` nodes on
    ``[0, 2 * max(1, |y|) ** (1 / (q - 1))]`` (the maximiser lies inside), then
    polishes the best node with a bounded scalar search over its two
    neighbouring cells.
    """
    from scipy.optimize import minimize_scalar

    y = abs(float(y))
    if y == 0:
        return 0.0
    hi = 2 * max(1.0, y) ** (1 / (phi.q - 1))
    xs = np.linspace(0.0, hi, points)
    vals = xs * y - phi(xs)
    k = int(np.argmax(vals))
    h = xs[1] - xs[0]
    res = minimize_scalar(lambda x: -(x * y - phi(x)), bounds=(max(0.0, xs[k] - h), xs[k] + h),
                          method="bounded", options={"xatol": 1e-12 * max(1.0, hi)})
    return float(max(vals[k], -res.fun))


def weibull_tail(alpha: float, x):
    """``P{|xi| > x}`` for the symmetric Weibull model: ``exp(-x**alpha)``."""
    if not 0 < alpha <= 2:
        raise ParameterDomainError("dist: alpha in (0,2]")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ParameterDomainError("weibull_tail: x must be >= 0")
    out = np.exp(-(x**alpha))
    return float(out) if out.ndim == 0 else out


def _draw(spec: DistributionSpec, size, gen: np.random.Generator) -> np.ndarray:
    p = spec.params
    if spec.kind == "gaussian":
        return gen.standard_normal(size) * math.sqrt(p["variance"])
    if spec.kind == "rademacher":
        return gen.integers(0, 2, size=size).astype(float) * 2 - 1
    if spec.kind == "weibull":
        u = 1.0 - gen.random(size)
        sign = gen.integers(0, 2, size=size) * 2 - 1
        return sign * (-np.log(u)) ** (1 / p["alpha"])
    r = _power_shape(p["q"])
    g = gen.standard_gamma(1 / r, size)
    sign = gen.integers(0, 2, size=size) * 2 - 1
    return p["a"] * sign * (r * g) ** (1 / r)


def sample(spec: DistributionSpec, n: int, rng) -> np.ndarray:
    """``n`` i.i.d. draws from ``spec``; ``rng`` is an RngStream or int seed."""
    if int(n) < 1:
        raise ParameterDomainError("sample: n must be >= 1")
    return _draw(spec, int(n), as_stream(rng).generator())


def sample_array(spec: DistributionSpec, shape, gen: np.random.Generator, unit_variance: bool = False):
    """Draw an array of any shape from an existing generator."""
    x = _draw(spec, shape, gen)
    if unit_variance:
        x /= math.sqrt(spec.variance)
    return x


def estimate_psi_alpha_norm(samples, alpha: float, rtol: float = 1e-4) -> float:
    """Empirical psi_alpha Orlicz norm.

    Smallest ``t`` with ``mean(exp(|x|**alpha / t**alpha)) <= 2``, found by
    geometric bisection to relative tolerance ``rtol``.  The bracket is built
    from ``max|x|``, which makes the estimate exactly scale-equivariant.
    Returns ``inf`` when the samples are not all finite.
    """
    x = np.abs(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("estimate_psi_alpha_norm: empty sample")
    if not 0 < alpha <= 2:
        raise ParameterDomainError("dist: alpha in (0,2]")
    if not np.all(np.isfinite(x)):
        return float("inf")
    top = x.max()
    if top == 0:
        return 0.0
    n = x.size
    xs = x / top
    target = math.log(2.0) + math.log(n)

    def excess(t):
        return special.logsumexp((xs / t) ** alpha) - target

    # in units of max|x|: every term is <= 2 at hi, the largest term alone
    # pushes the mean above 2 at lo
    hi = math.log(2.0) ** (-1 / alpha)
    lo = (math.log(2.0 * n) + 1.0) ** (-1 / alpha)
    while hi / lo - 1 > rtol:
        mid = math.sqrt(lo * hi)
        if excess(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return float(hi * top)


class TauPhiEstimate(NamedTuple):
    value: float
    skipped: tuple
    argmax_lambda: float


def estimate_tau_phi(samples, phi: PhiFunction, lambda_grid) -> TauPhiEstimate:
    """Plug-in estimate of ``sup_lambda phi^{-1}(log E exp(lambda X)) / |lambda|``.

    The sample is centred first.  Grid points where the empirical MGF exceeds
    ``MGF_CLIP`` are skipped and reported in ``skipped``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("estimate_tau_phi: empty sample")
    lam = np.asarray(lambda_grid, dtype=float).ravel()
    if np.any(lam == 0):
        raise ParameterDomainError("estimate_tau_phi: lambda grid must exclude 0")
    x = x - x.mean()
    log_n = math.log(x.size)
    best, best_lam, skipped = 0.0, float("nan"), []
    for l in lam:
        lm = special.logsumexp(l * x) - log_n
        if not np.isfinite(lm) or lm > math.log(MGF_CLIP):
            skipped.append(float(l))
            continue
        val = float(phi.inverse(lm)) / abs(l)
        if val > best:
            best, best_lam = val, float(l)
    return TauPhiEstimate(best, tuple(skipped), best_lam)


def log_mgf(spec: DistributionSpec, lam: float) -> float:
    """Exact ``log E exp(lam * xi)``; ``inf`` where the MGF diverges.

    Closed forms for the Gaussian and Rademacher models, adaptive quadrature
    for the others.
    """
    lam = float(lam)
    p = spec.params
    if spec.kind == "gaussian":
        return lam * lam * p["variance"] / 2
    if spec.kind == "rademacher":
        return float(np.logaddexp(lam, -lam) - math.log(2.0))
    if lam == 0:
        return 0.0
    lam = abs(lam)
    if spec.kind == "weibull":
        a = p["alpha"]
        if a < 1 or (a == 1 and lam >= 1):
            return float("inf")
        # density of |xi|: a x^(a-1) exp(-x^a); E exp(lam xi) = E cosh(lam |xi|)
        zs = (lam / a) ** (1 / (a - 1)) if a > 1 else 0.0
        peak = max(0.0, lam * zs - zs**a)

        def f(z, s):
            return a * z ** (a - 1) * math.exp(s * lam * z - z**a - peak)
    else:
        r = _power_shape(p["q"])
        lam = lam * p["a"]
        norm = r ** (1 / r - 1) * math.gamma(1 / r)
        zs = lam ** (1 / (r - 1))
        peak = lam * zs - zs**r / r

        def f(z, s):
            return math.exp(s * lam * z - z**r / r - peak) / norm

    plus = integrate.quad(f, 0, np.inf, args=(1,), limit=200)[0]
    minus = integrate.quad(f, 0, np.inf, args=(-1,), limit=200)[0]
    return float(peak + math.log((plus + minus) / 2))


DEFAULT_TAU_GRID = np.logspace(-2, 1.5, 120)


def tau_phi(spec: DistributionSpec, phi: PhiFunction, lambda_grid=None) -> float:
    """Model value of ``tau_phi`` from the exact log-MGF.

    Gaussian with ``q = 2`` uses the closed form (the standard deviation);
    otherwise the supremum is taken over ``lambda_grid`` (default: 120
    log-spaced points on [1e-2, 10**1.5]).  Returns ``inf`` if the MGF diverges
    on the grid.
    """
    if spec.kind == "gaussian" and phi.q == 2:
        return math.sqrt(spec.params["variance"])
    grid = DEFAULT_TAU_GRID if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    best = 0.0
    for l in grid:
        lm = log_mgf(spec, l)
        if not np.isfinite(lm):
            return float("inf")
        best = max(best, float(phi.inverse(lm)) / abs(l))
    return best


@dataclass
class IncrementReport:
    tau: float
    u: np.ndarray
    empirical: np.ndarray
    bound: np.ndarray
    se: np.ndarray
    trials: int
    ok: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.ok))

    def rows(self):
        return [(float(u), float(e), float(b), float(s), bool(o))
                for u, e, b, s, o in zip(self.u, self.empirical, self.bound, self.se, self.ok)]


def increment_tail_check(spec: DistributionSpec, phi: PhiFunction, u_grid, trials: int, rng,
                         tau: float | None = None) -> IncrementReport:
    """Compare ``P{|X| >= u tau_phi(X)}`` against ``2 exp(-phi*(u))``.

    A grid point passes when the empirical frequency is at most the bound plus
    three binomial standard errors.  ``tau`` defaults to :func:`tau_phi`.
    """
    u = np.asarray(u_grid, dtype=float).ravel()
    tau = tau_phi(spec, phi) if tau is None else float(tau)
    x = np.abs(sample(spec, trials, rng))
    emp = np.array([np.count_nonzero(x >= ui * tau) / trials for ui in u])
    bound = 2 * np.exp(-phi.conjugate(u))
    se = binomial_se(emp, trials)
    # a zero count still carries the resolution of one event
    se = np.maximum(se, 1.0 / trials)
    ok = emp <= bound + 3 * se
    return IncrementReport(tau, u, emp, bound, se, int(trials), ok)
