"""CSR storage, matvec kernels and the stacked operator C = [A; L]."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInput
from .small import UpperBidiagonal, svd_upper_bidiagonal

EPS = float(np.finfo(float).eps)


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Immutable compressed-sparse-row matrix.

    Validated on construction; matvecs go through a cached
    ``scipy.sparse.csr_array`` whose kernels accumulate each row sequentially.
    """

    nrows: int
    ncols: int
    row_starts: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _sp: sp.csr_array = field(init=False, repr=False)

    def __post_init__(self):
        if self.nrows < 1 or self.ncols < 1:
            raise InvalidInput(f"matrix dimensions must be positive, got {self.nrows}x{self.ncols}")
        rs = np.asarray(self.row_starts, dtype=np.int64).reshape(-1)
        ci = np.asarray(self.col_indices, dtype=np.int64).reshape(-1)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if rs.size != self.nrows + 1 or rs[0] != 0:
            raise InvalidInput("row_starts must have nrows + 1 entries starting at 0")
        if np.any(np.diff(rs) < 0) or rs[-1] != ci.size or ci.size != vals.size:
            raise InvalidInput("row_starts must be nondecreasing and end at nnz")
        if ci.size and (ci.min() < 0 or ci.max() >= self.ncols):
            raise InvalidInput("column index out of range")
        if not np.all(np.isfinite(vals)):
            raise InvalidInput("matrix values must be finite")
        for i in range(self.nrows):
            row = ci[rs[i] : rs[i + 1]]
            if row.size > 1 and np.any(np.diff(row) <= 0):
                raise InvalidInput(f"column indices of row {i} are not strictly increasing")
        for name, arr in (("row_starts", rs), ("col_indices", ci), ("values", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(
            self, "_sp", sp.csr_array((vals, ci, rs), shape=(self.nrows, self.ncols))
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @classmethod
    def from_dense(cls, M) -> "CsrMatrix":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls.from_scipy(sp.csr_array(M))

    @classmethod
    def from_scipy(cls, M) -> "CsrMatrix":
        M = sp.csr_array(M)
        M.sum_duplicates()
        M.sort_indices()
        M.eliminate_zeros()
        return cls(M.shape[0], M.shape[1], M.indptr, M.indices, M.data)

    @classmethod
    def from_coo(cls, nrows, ncols, rows, cols, vals) -> "CsrMatrix":
        """Build from triplets; duplicates are summed."""
        M = sp.coo_array((np.asarray(vals, float), (np.asarray(rows), np.asarray(cols))),
                         shape=(nrows, ncols))
        return cls.from_scipy(M.tocsr())

    def to_dense(self) -> np.ndarray:
        return self._sp.toarray()

    def to_scipy(self) -> sp.csr_array:
        return self._sp.copy()

    def scaled(self, factor: float) -> "CsrMatrix":
        return CsrMatrix(self.nrows, self.ncols, self.row_starts, self.col_indices,
                         factor * self.values)


def spmv(M: CsrMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != M.ncols:
        raise InvalidInput(f"vector of length {x.size} for a {M.nrows}x{M.ncols} matrix")
    return M._sp @ x


def spmv_t(M: CsrMatrix, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size != M.nrows:
        raise InvalidInput(f"vector of length {y.size} for the transpose of a {M.nrows}x{M.ncols} matrix")
    return M._sp.T @ y


@dataclass(eq=False)
class StackedPair:
    """The pair {A, L} seen as the single operator C = [A; L].

    ``norm_estimate`` caches the estimate of ||C||_2 once computed.
    """

    A: CsrMatrix
    L: CsrMatrix
    norm_estimate: float | None = None

    def __post_init__(self):
        if self.A.ncols != self.L.ncols:
            raise InvalidInput(f"A has {self.A.ncols} columns but L has {self.L.ncols}")
        if self.m + self.p < self.n:
            raise InvalidInput("m + p < n: the pair cannot be regular")

    @property
    def m(self) -> int:
        return self.A.nrows

    @property
    def p(self) -> int:
        return self.L.nrows

    @property
    def n(self) -> int:
        return self.A.ncols

    def to_dense(self) -> np.ndarray:
        return np.vstack([self.A.to_dense(), self.L.to_dense()])

    @property
    def norm(self) -> float:
        """||C|| estimate, computed on first use."""
        if self.norm_estimate is None:
            estimate_two_norm(self)
        return self.norm_estimate


def pair_apply(P: StackedPair, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != P.n:
        raise InvalidInput(f"vector of length {x.size}, expected {P.n}")
    return np.concatenate([spmv(P.A, x), spmv(P.L, x)])


def pair_apply_t(P: StackedPair, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size != P.m + P.p:
        raise InvalidInput(f"vector of length {y.size}, expected {P.m + P.p}")
    return spmv_t(P.A, y[: P.m]) + spmv_t(P.L, y[P.m :])


def estimate_two_norm(P: StackedPair, rtol: float = 1e-10, max_steps: int = 100) -> float:
    """Lower-bound estimate of ||C||_2, cached on ``P.norm_estimate``.

    Golub-Kahan bidiagonalization of C with full reorthogonalization, started
    from the normalized all-ones vector; the largest singular value of the
    growing bidiagonal is monitored until its relative change drops below
    ``rtol``. A Krylov estimate is used instead of plain power iteration
    because clustered top singular values (e.g. equispaced spectra) stall the
    power method far from the true norm.
    """
    n = P.n
    v = np.ones(n) / np.sqrt(n)
    u = pair_apply(P, v)
    if not np.any(u):
        # all-ones start in the null space: retry with a deterministic perturbed start
        v = np.ones(n) + np.linspace(0.0, 1.0, n) ** 2
        v /= np.linalg.norm(v)
        u = pair_apply(P, v)
        if np.linalg.norm(u) == 0.0:
            raise InvalidInput("cannot estimate the norm of a zero operator")
    Vs, Us = [v], []
    alphas, betas = [], []
    est = 0.0
    steps = min(n, max_steps)
    for j in range(steps):
        if Us:
            u = u - betas[-1] * Us[-1]
            Um = np.array(Us).T
            u -= Um @ (Um.T @ u)
        alpha = float(np.linalg.norm(u))
        if alpha <= EPS * max(est, 1e-300) or alpha == 0.0:
            if betas:
                # invariant subspace reached: the last beta still belongs to the estimate
                est = float(
                    svd_upper_bidiagonal(UpperBidiagonal(alphas + [0.0], betas),
                                         compute_vectors=False).values[0]
                )
            break
        u = u / alpha
        Us.append(u)
        alphas.append(alpha)
        # lower-bidiagonal Ritz value via B^T of the upper form
        new = float(
            svd_upper_bidiagonal(UpperBidiagonal(alphas, betas[: len(alphas) - 1]),
                                 compute_vectors=False).values[0]
        )
        if est > 0.0 and abs(new - est) <= rtol * new:
            est = new
            break
        est = new
        w = pair_apply_t(P, u) - alpha * Vs[-1]
        Vm = np.array(Vs).T
        w -= Vm @ (Vm.T @ w)
        beta = float(np.linalg.norm(w))
        if beta <= EPS * est:
            break
        Vs.append(w / beta)
        betas.append(beta)
        u = pair_apply(P, Vs[-1])
    if est == 0.0:
        raise InvalidInput("cannot estimate the norm of a zero operator")
    P.norm_estimate = est
    return est
