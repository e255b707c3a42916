"""Synthetic matrix pairs with known GSVD.

Every generator returns its ground truth alongside the matrices so tests
never have to re-derive it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput
from ..sparse import CsrMatrix, StackedPair


@dataclass
class GeneratedPair:
    pair: StackedPair
    c: np.ndarray  # true cosines, descending
    s: np.ndarray
    X: np.ndarray  # true right generalized singular vectors, columns match c
    kappa: float


def gen_A1L1(n: int, kappa: float) -> GeneratedPair:
    """Diagonal pair A = diag(c) D, L = diag(s) D with c_i = (n - i + 1) / (2n).

    D = diag(linspace(1, kappa, n)), so kappa([A; L]) = kappa exactly.
    """
    if n < 2 or kappa < 1:
        raise InvalidInput("gen_A1L1 needs n >= 2 and kappa >= 1")
    i = np.arange(1, n + 1)
    c = (n - i + 1) / (2.0 * n)
    s = np.sqrt(1.0 - c**2)
    dvals = np.linspace(1.0, kappa, n)
    A = CsrMatrix.from_coo(n, n, i - 1, i - 1, c * dvals)
    L = CsrMatrix.from_coo(n, n, i - 1, i - 1, s * dvals)
    return GeneratedPair(StackedPair(A, L), c, s, np.diag(1.0 / dvals), float(kappa))


def orthog_sine(n: int) -> np.ndarray:
    """Symmetric orthogonal matrix W[i, j] = 2/sqrt(2n+1) sin(2 i j pi / (2n+1)), 1-based."""
    idx = np.arange(1, n + 1)
    return 2.0 / np.sqrt(2 * n + 1) * np.sin(2.0 * np.outer(idx, idx) * np.pi / (2 * n + 1))


def a2l2_cosines(n: int) -> np.ndarray:
    return np.concatenate(
        [[0.99, 0.98, 0.97], np.linspace(0.96, 0.04, n - 6), [0.03, 0.02, 0.01]]
    )


def gen_A2L2(n: int) -> GeneratedPair:
    """Dense pair A = C_A W^T D, L = S_L W^T D with D = diag(linspace(1, 10, n))."""
    if n < 8:
        raise InvalidInput("gen_A2L2 needs n >= 8")
    c = a2l2_cosines(n)
    s = np.sqrt(1.0 - c**2)
    W = orthog_sine(n)
    dvals = np.linspace(1.0, 10.0, n)
    WtD = W.T * dvals[None, :]
    A = CsrMatrix.from_dense(c[:, None] * WtD)
    L = CsrMatrix.from_dense(s[:, None] * WtD)
    X = W / dvals[:, None]
    return GeneratedPair(StackedPair(A, L), c, s, X, 10.0)


def gen_L1d(n: int) -> CsrMatrix:
    """(n-1) x n first-difference operator: row i is e_i - e_{i+1}."""
    if n < 2:
        raise InvalidInput("gen_L1d needs n >= 2")
    i = np.arange(n - 1)
    rows = np.concatenate([i, i])
    cols = np.concatenate([i, i + 1])
    vals = np.concatenate([np.ones(n - 1), -np.ones(n - 1)])
    return CsrMatrix.from_coo(n - 1, n, rows, cols, vals)


def gen_random(m: int, p: int, n: int, seed: int = 0, density: float = 1.0) -> StackedPair:
    """Random Gaussian pair; regular with probability one when m + p >= n."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    L = rng.standard_normal((p, n))
    if density < 1.0:
        A *= rng.random((m, n)) < density
        L *= rng.random((p, n)) < density
    return StackedPair(CsrMatrix.from_dense(A), CsrMatrix.from_dense(L))
