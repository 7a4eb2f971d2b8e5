"""Group-sparse recovery from block-diagonal measurements.

Both solvers act on the scaled matrix ``A = B Psi / sqrt(m)`` so that they see
the same object whose restricted isometry constants :mod:`blockrip.rip`
computes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DistributionSpec
from .errors import BlockRipError, ConvergenceError, DivergenceError, ParameterDomainError
from .group_model import GroupPartition, GroupSparseVector, group_norms, top_groups
from .matrices import BlockDiagonalMatrix, OrthogonalBasis, opnorm_2_2, random_block_diagonal
from .rip import _random_group_sparse, exact_group_ric, make_basis, recovery_gate, sensing_matrix
from .rng import as_stream, ordered_map
from .stats import wilson_interval

SUCCESS_TOL = 1e-4
DIVERGENCE_RUN = 10
STEP_FRACTION = 0.9


@dataclass
class RecoveryProblem:
    y: np.ndarray
    B: BlockDiagonalMatrix
    psi: OrthogonalBasis | None
    partition: GroupPartition
    s: int | None = None
    _A: np.ndarray | None = field(default=None, init=False, repr=False)
    _norm: float | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.shape != (self.B.m * self.B.L,):
            raise ValueError(f"y must have length m*L = {self.B.m * self.B.L}")
        D = self.B.d * self.B.L
        if self.partition.D != D or (self.psi is not None and self.psi.D != D):
            raise ValueError("dims: D must equal d*L")

    @property
    def A(self) -> np.ndarray:
        if self._A is None:
            self._A = sensing_matrix(self.B, self.psi)
        return self._A

    @property
    def opnorm(self) -> float:
        """``||A||_{2->2}`` by power iteration.

        Only the step size depends on it, so when two top singular values are
        too close for the residual test the last Rayleigh quotient is used:
        it already lies inside the unresolved cluster.
        """
        if self._norm is None:
            try:
                self._norm = opnorm_2_2(self.A)
            except ConvergenceError as exc:
                self._norm = math.sqrt(max(exc.best[0], 0.0))
        return self._norm

    def default_step(self) -> float:
        n = self.opnorm
        return STEP_FRACTION / (n * n) if n > 0 else 1.0

    def _check_step(self, step):
        step = self.default_step() if step is None else float(step)
        n = self.opnorm
        if step <= 0 or (n > 0 and step >= 2 / (n * n)):
            raise ParameterDomainError("step must lie in (0, 2/||A||^2)")
        return step


def group_hard_threshold(x, partition: GroupPartition, s: int) -> GroupSparseVector:
    """Euclidean projection onto vectors supported on at most ``s`` groups."""
    x = np.asarray(x, dtype=float)
    keep = top_groups(x, partition, s)
    z = np.zeros_like(x)
    cols = partition.columns(keep)
    z[cols] = x[cols]
    return GroupSparseVector(z, partition, keep)


def group_soft_threshold(x, partition: GroupPartition, level: float) -> np.ndarray:
    """Shrink every group towards zero by ``level`` in Euclidean norm."""
    norms = group_norms(x, partition)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norms > level, 1 - level / norms, 0.0)
    return np.asarray(x, dtype=float) * factor[partition.labels]


class _Watch:
    """Tracks the residual history and raises after a run of increases."""

    def __init__(self, y_norm: float):
        self.history: list[float] = []
        self.run = 0
        self.floor = 1e-15 * max(y_norm, 1e-300)

    def push(self, r: float):
        if self.history and r > self.history[-1] + self.floor:
            self.run += 1
        else:
            self.run = 0
        self.history.append(r)
        if not math.isfinite(r) or self.run >= DIVERGENCE_RUN:
            raise DivergenceError(f"divergence: residual increased for {self.run} consecutive iterations",
                                  np.array(self.history))


def group_iht(problem: RecoveryProblem, iters: int = 500, step: float | None = None,
              tol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Iterative group hard thresholding.

    Stops early once the residual falls below ``tol * ||y||``.  Returns the
    final iterate and the residual norm after every iteration.
    """
    s = problem.s
    if s is None or not 0 <= s <= problem.partition.G:
        raise ParameterDomainError("s must lie in [0, G]")
    step = problem._check_step(step)
    A, y, part = problem.A, problem.y, problem.partition
    y_norm = float(np.linalg.norm(y))
    x = np.zeros(A.shape[1])
    watch = _Watch(y_norm)
    for _ in range(iters):
        x = group_hard_threshold(x + step * (A.T @ (y - A @ x)), part, s).data
        r = float(np.linalg.norm(y - A @ x))
        watch.push(r)
        if r <= tol * y_norm:
            break
    return x, np.array(watch.history)


def group_ista(problem: RecoveryProblem, lam: float, iters: int = 500, step: float | None = None,
               return_history: bool = False):
    """Proximal gradient for ``0.5 ||y - A x||^2 + lam ||x||_{S,1}``."""
    if lam < 0:
        raise ParameterDomainError("lambda must be >= 0")
    step = problem._check_step(step)
    A, y, part = problem.A, problem.y, problem.partition
    x = np.zeros(A.shape[1])
    watch = _Watch(float(np.linalg.norm(y)))
    objective = []
    for _ in range(iters):
        x = group_soft_threshold(x + step * (A.T @ (y - A @ x)), part, lam * step)
        res = y - A @ x
        r = float(np.linalg.norm(res))
        watch.push(r)
        objective.append(0.5 * r * r + lam * float(group_norms(x, part).sum()))
    if return_history:
        return x, np.array(watch.history), np.array(objective)
    return x


def relative_error(x_hat, x0) -> float:
    """``||x_hat - x0|| / ||x0||``; the absolute error when ``x0 = 0``."""
    e = float(np.linalg.norm(np.asarray(x_hat) - np.asarray(x0)))
    n = float(np.linalg.norm(x0))
    return e / n if n > 0 else e


@dataclass
class InstanceRecord:
    m: int
    trial: int
    successes: int
    signals: int
    errors: np.ndarray
    delta_2s: float = math.nan
    gate: bool | None = None
    failures: tuple = ()


@dataclass
class RecoveryRow:
    m: int
    s: int
    success_rate: float
    ci: float
    mean_err: float
    solver: str
    seed: int
    instances: list = field(default_factory=list, repr=False)

    def csv_row(self) -> list:
        return [self.m, self.s, self.success_rate, self.ci, self.mean_err, self.solver, self.seed]


CSV_HEADER = ["m", "s", "success_rate", "ci", "mean_err", "solver", "seed"]


def recovery_experiment(spec: DistributionSpec, psi_mode, partition: GroupPartition, s: int, m_grid,
                        trials: int, solver: str, rng, d: int, L: int, signals_per_matrix: int = 1,
                        iters: int = 500, lam: float = 1e-6, check_gate: bool = False) -> list[RecoveryRow]:
    """Success rates of planted-signal recovery over a grid of block heights ``m``.

    For each ``m`` and each of ``trials`` matrix draws, ``signals_per_matrix``
    unit ``s``-group-sparse signals are planted and recovered.  A signal counts
    as recovered when its relative error is at most ``1e-4``; solver errors
    count as failures and are kept with their reason.  With ``check_gate`` the
    exact ``delta_{2s}`` of every matrix is recorded too.

    Streams: basis from child 0; matrix ``k`` at grid position ``j`` uses
    ``rng.child(j + 1).child(k)`` (its child 0 for ``B``, child 1 for signals).
    """
    if partition.D != d * L:
        raise ValueError("dims: D must equal d*L")
    if d * L > 256:
        raise ParameterDomainError("recovery experiments are limited to d*L <= 256")
    if solver not in ("iht", "ista"):
        raise ValueError(f"unknown solver {solver!r}")
    stream = as_stream(rng)
    psi = make_basis(psi_mode, partition.D, stream.child(0))
    rows = []
    for j, m in enumerate(int(v) for v in m_grid):
        def one(k, m=m, j=j):
            ks = stream.child(j + 1).child(k)
            B = random_block_diagonal(spec, L, m, d, ks.child(0))
            X0 = _random_group_sparse(ks.child(1).generator(), partition, s, signals_per_matrix)
            errs, fails = [], []
            for x0 in X0:
                prob = RecoveryProblem(B.apply(psi.matrix @ x0 if psi is not None else x0) / math.sqrt(m),
                                       B, psi, partition, s)
                try:
                    if solver == "iht":
                        x_hat, _ = group_iht(prob, iters)
                    else:
                        x_hat = group_ista(prob, lam, iters)
                    errs.append(relative_error(x_hat, x0))
                except BlockRipError as exc:
                    errs.append(math.inf)
                    fails.append(str(exc))
            errs = np.array(errs)
            rec = InstanceRecord(m, k, int(np.count_nonzero(errs <= SUCCESS_TOL)), len(errs), errs,
                                 failures=tuple(fails))
            if check_gate:
                rec.delta_2s = exact_group_ric(B, psi, partition, min(2 * s, partition.G)).delta if s else 0.0
                rec.gate = recovery_gate(rec.delta_2s)
            return rec

        recs = ordered_map(one, range(trials))
        hits = sum(r.successes for r in recs)
        total = sum(r.signals for r in recs)
        low, high = wilson_interval(hits, total)
        finite = np.concatenate([r.errors for r in recs])
        finite = finite[np.isfinite(finite)]
        rows.append(RecoveryRow(m, s, hits / total, float((high - low) / 2),
                                float(finite.mean()) if finite.size else math.nan, solver,
                                stream.master_seed, recs))
    return rows
