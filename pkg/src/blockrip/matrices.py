"""Dense and block-diagonal matrices, operator norms and random ensembles.

Dense matrices are plain 2-D ``numpy`` arrays.  ``BlockDiagonalMatrix`` keeps
its ``L`` blocks as an ``(L, m, d)`` array and never forms the full
``mL x dL`` matrix unless asked to.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import DistributionSpec, sample_array
from .errors import ConvergenceError, ParameterDomainError
from .rng import as_stream

MAX_ITER = 10_000
DEFAULT_TOL = 1e-8
# fixed seed for start-vector perturbation and restarts
_START_SEED = 0x5EED


def as_dense(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


@dataclass(frozen=True)
class BlockDiagonalMatrix:
    """``diag(Phi_1, ..., Phi_L)`` with equally shaped ``m x d`` blocks."""

    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=float)
        if b.ndim != 3 or 0 in b.shape:
            raise ValueError("blocks must have shape (L, m, d) with L, m, d >= 1")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)

    @classmethod
    def from_blocks(cls, blocks) -> "BlockDiagonalMatrix":
        blocks = [as_dense(b) for b in blocks]
        if len({b.shape for b in blocks}) != 1:
            raise ValueError("all blocks must share the same shape")
        return cls(np.stack(blocks))

    @property
    def L(self) -> int:
        return self.blocks.shape[0]

    @property
    def m(self) -> int:
        return self.blocks.shape[1]

    @property
    def d(self) -> int:
        return self.blocks.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.m * self.L, self.d * self.L

    def dense(self) -> np.ndarray:
        M, D = self.shape
        out = np.zeros((M, D))
        for l in range(self.L):
            out[l * self.m:(l + 1) * self.m, l * self.d:(l + 1) * self.d] = self.blocks[l]
        return out

    def apply(self, x):
        return block_apply(self, x)

    def rapply(self, y):
        """``B.T @ y`` blockwise."""
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.shape[0]:
            raise ValueError(f"dimension mismatch: expected length {self.shape[0]}, got {y.shape[-1]}")
        yb = y.reshape(y.shape[:-1] + (self.L, self.m))
        return np.einsum("lmd,...lm->...ld", self.blocks, yb).reshape(y.shape[:-1] + (self.shape[1],))

    def times_basis(self, psi) -> np.ndarray:
        """Dense ``B @ Psi`` computed block-row by block-row."""
        P = psi.matrix if isinstance(psi, OrthogonalBasis) else as_dense(psi)
        d = self.d
        return np.concatenate([self.blocks[l] @ P[l * d:(l + 1) * d] for l in range(self.L)])

    def scaled(self, c: float) -> "BlockDiagonalMatrix":
        return BlockDiagonalMatrix(self.blocks * c)


@dataclass(frozen=True)
class OrthogonalBasis:
    matrix: np.ndarray

    def __post_init__(self):
        P = as_dense(self.matrix).copy()
        if P.shape[0] != P.shape[1]:
            raise ValueError("basis must be square")
        err = np.max(np.abs(P.T @ P - np.eye(P.shape[0])))
        if err > 1e-10:
            raise ValueError(f"basis is not orthogonal (max |P^T P - I| = {err:.3g})")
        P.setflags(write=False)
        object.__setattr__(self, "matrix", P)

    @property
    def D(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, D: int) -> "OrthogonalBasis":
        return cls(np.eye(D))


def frobenius_norm(A) -> float:
    return float(np.sqrt(np.sum(as_dense(A) ** 2)))


def opnorm_2_inf(A) -> float:
    """``||A||_{2->inf}``: the largest Euclidean row norm."""
    A = as_dense(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.sqrt(np.sum(A**2, axis=1))))


def _start_vector(n: int) -> np.ndarray:
    # all-ones plus a small fixed perturbation; plain all-ones is an exact
    # eigenvector of every matrix with constant row sums
    r = np.random.default_rng(_START_SEED).standard_normal(n)
    x = np.ones(n) + 0.1 * r
    return x / np.linalg.norm(x)


def power_iteration(matvec, n: int, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER, atol: float = 0.0):
    """Dominant eigenpair of a symmetric positive semidefinite operator.

    Stops when ``||M x - rho x|| <= tol * rho + atol``.  Returns ``(rho, x)``.
    """
    x = _start_vector(n)
    restart = np.random.default_rng(_START_SEED + 1)
    rho = 0.0
    for _ in range(max_iter):
        y = matvec(x)
        ny = np.linalg.norm(y)
        if ny == 0:
            # start vector in the null space: zero operator or bad luck
            x = restart.standard_normal(n)
            x /= np.linalg.norm(x)
            if np.linalg.norm(matvec(x)) == 0:
                return 0.0, x
            continue
        rho = float(x @ y)
        if np.linalg.norm(y - rho * x) <= tol * abs(rho) + atol:
            return rho, x
        x = y / ny
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations", best=(rho, x))


def opnorm_2_2(A, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> float:
    """Largest singular value by power iteration on the smaller Gram matrix."""
    A = as_dense(A)
    if A.size == 0:
        return 0.0
    if A.shape[1] <= A.shape[0]:
        rho, _ = power_iteration(lambda v: A.T @ (A @ v), A.shape[1], tol, max_iter)
    else:
        rho, _ = power_iteration(lambda v: A @ (A.T @ v), A.shape[0], tol, max_iter)
    return math.sqrt(max(rho, 0.0))


def _check_symmetric(S) -> np.ndarray:
    S = as_dense(S)
    if S.shape[0] != S.shape[1]:
        raise ValueError("matrix must be square")
    if S.size and np.max(np.abs(S - S.T)) > 1e-10:
        raise ValueError("matrix must be symmetric to 1e-10")
    return S


def extreme_eigen_sym(S, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> tuple[float, float]:
    """``(lambda_min, lambda_max)`` of a symmetric matrix by power iteration.

    ``lambda_max`` comes from ``S + c I`` with ``c`` a Gershgorin shift making
    the operator positive semidefinite; ``lambda_min`` from
    ``lambda_max I - S``.
    """
    S = _check_symmetric(S)
    n = S.shape[0]
    if n > 512:
        raise ValueError("extreme_eigen_sym supports sizes up to 512")
    if n == 1:
        return float(S[0, 0]), float(S[0, 0])
    off = np.sum(np.abs(S), axis=1) - np.abs(np.diag(S))
    c = max(0.0, float(np.max(off - np.diag(S))))
    top, _ = power_iteration(lambda v: S @ v + c * v, n, tol, max_iter)
    lam_max = top - c
    # rounding floor: lam_max I - S can be numerically zero (S = c I)
    atol = 8 * n * np.finfo(float).eps * max(abs(lam_max), float(np.max(np.abs(S))))
    spread, _ = power_iteration(lambda v: lam_max * v - S @ v, n, tol, max_iter, atol)
    return lam_max - max(spread, 0.0), lam_max


def extreme_eigen_batch(grams, method: str = "eigh", tol: float = 1e-12, max_iter: int = MAX_ITER):
    """Extreme eigenvalues of a stack of symmetric PSD matrices ``(K, n, n)``.

    ``method="eigh"`` uses LAPACK on the whole stack; ``method="power"`` runs
    vectorised power iteration (same stopping rule as :func:`power_iteration`).
    Returns ``(lam_min, lam_max)`` arrays of length ``K``.
    """
    G = np.asarray(grams, dtype=float)
    if G.ndim != 3 or G.shape[1] != G.shape[2]:
        raise ValueError("expected a (K, n, n) stack")
    if G.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    if method == "eigh":
        w = np.linalg.eigvalsh(G)
        return w[:, 0], w[:, -1]
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    lam_max = _batch_power(G, tol, max_iter)
    shifted = lam_max[:, None, None] * np.eye(G.shape[1]) - G
    atol = 8 * G.shape[1] * np.finfo(float).eps * np.maximum(np.abs(lam_max), np.abs(G).max(axis=(1, 2)))
    spread = _batch_power(shifted, tol, max_iter, atol)
    return lam_max - np.maximum(spread, 0.0), lam_max


def _batch_power(G, tol, max_iter, atol=None):
    K, n, _ = G.shape
    atol = np.zeros(K) if atol is None else np.broadcast_to(atol, (K,))
    x = np.tile(_start_vector(n), (K, 1))
    rho = np.zeros(K)
    active = np.arange(K)
    restart = np.random.default_rng(_START_SEED + 1)
    for _ in range(max_iter):
        if active.size == 0:
            return rho
        Ga, xa = G[active], x[active]
        y = np.einsum("kij,kj->ki", Ga, xa)
        ny = np.linalg.norm(y, axis=1)
        r = np.einsum("ki,ki->k", xa, y)
        res = np.linalg.norm(y - r[:, None] * xa, axis=1)
        rho[active] = r
        done = (res <= tol * np.abs(r) + atol[active]) | (ny == 0)
        zero = ny == 0
        if np.any(zero):
            # retry null-space starts once from a random vector
            z = restart.standard_normal((int(zero.sum()), n))
            z /= np.linalg.norm(z, axis=1, keepdims=True)
            Gz = np.einsum("kij,kj->ki", Ga[zero], z)
            retry = np.linalg.norm(Gz, axis=1) > 0
            idx = np.flatnonzero(zero)[retry]
            done[idx] = False
            ny[idx] = 1.0
            y[idx] = z[retry]
        keep = ~done
        x[active[keep]] = y[keep] / ny[keep, None]
        active = active[keep]
    if active.size:
        raise ConvergenceError(f"batched power iteration: {active.size} matrices did not converge",
                               best=(rho, x))
    return rho


def random_block_diagonal(spec: DistributionSpec, L: int, m: int, d: int, rng) -> BlockDiagonalMatrix:
    """``L`` independent ``m x d`` blocks with i.i.d. unit-variance entries."""
    if min(L, m, d) < 1:
        raise ParameterDomainError("dims: L, m, d must be >= 1")
    gen = as_stream(rng).generator()
    return BlockDiagonalMatrix(sample_array(spec, (L, m, d), gen, unit_variance=True))


def haar_orthogonal(D: int, rng) -> OrthogonalBasis:
    """Haar-distributed orthogonal matrix via sign-corrected QR."""
    if D < 1:
        raise ParameterDomainError("dims: D must be >= 1")
    gen = as_stream(rng).generator()
    Q, R = np.linalg.qr(gen.standard_normal((D, D)))
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    return OrthogonalBasis(Q)


def block_apply(B: BlockDiagonalMatrix, x) -> np.ndarray:
    """``B @ x`` as concatenated per-block products; works on stacks of vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: expected length {B.shape[1]}, got {x.shape[-1]}")
    xb = x.reshape(x.shape[:-1] + (B.L, B.d))
    return np.einsum("lmd,...ld->...lm", B.blocks, xb).reshape(x.shape[:-1] + (B.shape[0],))


def write_matrix(A, dest) -> None:
    """Text format: ``rows cols`` header, then row-major entries."""
    A = as_dense(A)
    buf = io.StringIO()
    buf.write(f"{A.shape[0]} {A.shape[1]}\n")
    for row in A:
        buf.write(" ".join(repr(float(v)) for v in row) + "\n")
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(buf.getvalue())
    else:
        dest.write(buf.getvalue())


def read_matrix(src) -> np.ndarray:
    text = Path(src).read_text() if isinstance(src, (str, Path)) else src.read()
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("matrix file: missing 'rows cols' header")
    rows, cols = int(tokens[0]), int(tokens[1])
    vals = np.array([float(t) for t in tokens[2:]])
    if vals.size != rows * cols:
        raise ValueError(f"matrix file: expected {rows * cols} entries, found {vals.size}")
    return as_dense(vals.reshape(rows, cols))
