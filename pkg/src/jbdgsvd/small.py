"""Small dense kernels: upper bidiagonal matrices, their SVD, Gram-Schmidt.

The bidiagonal SVD is the Golub-Kahan-Reinsch implicit-shift QR iteration,
written out explicitly so the Ritz values of the JBD process never depend on
which LAPACK driver happens to be installed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConvergenceFailure, InvalidInput

EPS = float(np.finfo(float).eps)

GramSchmidt = Literal["cgs", "mgs"]


@dataclass(frozen=True)
class UpperBidiagonal:
    """k-by-k upper bidiagonal matrix stored by its two nonzero diagonals."""

    diag: np.ndarray
    superdiag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float).reshape(-1)
        e = np.asarray(self.superdiag, dtype=float).reshape(-1)
        if d.size < 1:
            raise InvalidInput("bidiagonal matrix needs at least one diagonal entry")
        if e.size != d.size - 1:
            raise InvalidInput(
                f"superdiagonal length {e.size} does not match diagonal length {d.size}"
            )
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise InvalidInput("bidiagonal entries must be finite")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "superdiag", e)

    @property
    def k(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.superdiag, 1)

    def leading(self, j: int) -> "UpperBidiagonal":
        """Leading j-by-j principal submatrix."""
        if not 1 <= j <= self.k:
            raise InvalidInput(f"leading size {j} outside 1..{self.k}")
        return UpperBidiagonal(self.diag[:j], self.superdiag[: j - 1])


@dataclass(frozen=True)
class SmallSvd:
    """Full SVD ``B = left @ diag(values) @ right.T`` with values descending."""

    left: np.ndarray
    values: np.ndarray
    right: np.ndarray


def _rot(f: float, g: float) -> tuple[float, float, float]:
    if g == 0.0:
        return 1.0, 0.0, f
    r = math.hypot(f, g)
    return f / r, g / r, r


def _bidiagonal_qr(d: np.ndarray, e: np.ndarray, U, V, max_sweeps: int) -> None:
    """In-place implicit-shift QR on (d, e); U, V accumulate rotations (or None)."""
    n = d.size
    bnorm = max(np.max(np.abs(d)), np.max(np.abs(e)) if e.size else 0.0)
    if bnorm == 0.0:
        return
    tiny = EPS * bnorm
    sweeps = 0
    while True:
        for i in range(n - 1):
            if abs(e[i]) <= 8.0 * EPS * (abs(d[i]) + abs(d[i + 1])) or abs(e[i]) <= tiny * EPS:
                e[i] = 0.0
        hi = n - 1
        while hi > 0 and e[hi - 1] == 0.0:
            hi -= 1
        if hi == 0:
            return
        lo = hi - 1
        while lo > 0 and e[lo - 1] != 0.0:
            lo -= 1

        sweeps += 1
        if sweeps > max_sweeps:
            raise ConvergenceFailure("bidiagonal QR iteration did not converge")

        zero_at = None
        for i in range(lo, hi + 1):
            if abs(d[i]) <= tiny:
                d[i] = 0.0
                zero_at = i
                break
        if zero_at is not None:
            if zero_at < hi:
                _chase_row(d, e, zero_at, hi, U)
            else:
                _chase_column(d, e, lo, hi, V)
            continue

        # Wilkinson shift from the trailing 2x2 of B^T B on the active block.
        a = d[hi - 1] ** 2 + (e[hi - 2] ** 2 if hi - 1 > lo else 0.0)
        b = d[hi - 1] * e[hi - 1]
        c = d[hi] ** 2 + e[hi - 1] ** 2
        delta = 0.5 * (a - c)
        denom = abs(delta) + math.hypot(delta, b)
        if denom == 0.0:
            mu = c
        else:
            mu = c - math.copysign(1.0, delta if delta != 0.0 else 1.0) * b * b / denom

        y = d[lo] ** 2 - mu
        z = d[lo] * e[lo]
        for kk in range(lo, hi):
            cs, sn, r = _rot(y, z)
            if kk > lo:
                e[kk - 1] = r
            dk, ek = d[kk], e[kk]
            d[kk] = cs * dk + sn * ek
            e[kk] = -sn * dk + cs * ek
            bulge = sn * d[kk + 1]
            d[kk + 1] = cs * d[kk + 1]
            if V is not None:
                vk = V[:, kk].copy()
                V[:, kk] = cs * vk + sn * V[:, kk + 1]
                V[:, kk + 1] = -sn * vk + cs * V[:, kk + 1]

            cs, sn, r = _rot(d[kk], bulge)
            d[kk] = r
            ek, dk1 = e[kk], d[kk + 1]
            e[kk] = cs * ek + sn * dk1
            d[kk + 1] = -sn * ek + cs * dk1
            if kk + 1 < hi:
                y = e[kk]
                z = sn * e[kk + 1]
                e[kk + 1] = cs * e[kk + 1]
            if U is not None:
                uk = U[:, kk].copy()
                U[:, kk] = cs * uk + sn * U[:, kk + 1]
                U[:, kk + 1] = -sn * uk + cs * U[:, kk + 1]


def _chase_row(d, e, i, hi, U) -> None:
    # d[i] == 0: rotate row i against rows i+1..hi to annihilate e[i].
    f = e[i]
    e[i] = 0.0
    for j in range(i + 1, hi + 1):
        cs, sn, r = _rot(d[j], f)
        d[j] = r
        if j < hi:
            f = -sn * e[j]
            e[j] = cs * e[j]
        if U is not None:
            uj = U[:, j].copy()
            U[:, j] = cs * uj + sn * U[:, i]
            U[:, i] = -sn * uj + cs * U[:, i]


def _chase_column(d, e, lo, hi, V) -> None:
    # d[hi] == 0: rotate column hi against columns hi-1..lo to annihilate e[hi-1].
    f = e[hi - 1]
    e[hi - 1] = 0.0
    for j in range(hi - 1, lo - 1, -1):
        cs, sn, r = _rot(d[j], f)
        d[j] = r
        if j > lo:
            f = -sn * e[j - 1]
            e[j - 1] = cs * e[j - 1]
        if V is not None:
            vj = V[:, j].copy()
            V[:, j] = cs * vj + sn * V[:, hi]
            V[:, hi] = -sn * vj + cs * V[:, hi]


def svd_upper_bidiagonal(B: UpperBidiagonal, compute_vectors: bool = True) -> SmallSvd:
    """Full SVD of an upper bidiagonal matrix.

    Singular values come out in descending order. Each right singular vector
    is signed so that its first entry of magnitude above machine epsilon is
    positive; the matching left vector is flipped with it.

    With ``compute_vectors=False`` only ``values`` is meaningful and the
    returned ``left``/``right`` are empty arrays.
    """
    if not isinstance(B, UpperBidiagonal):
        raise InvalidInput("expected an UpperBidiagonal")
    k = B.k
    d = B.diag.copy()
    e = B.superdiag.copy()
    U = np.eye(k) if compute_vectors else None
    V = np.eye(k) if compute_vectors else None
    _bidiagonal_qr(d, e, U, V, max_sweeps=75 * k * k + 30)

    neg = d < 0
    d[neg] = -d[neg]
    if V is not None:
        V[:, neg] = -V[:, neg]
    order = np.argsort(-d, kind="stable")
    values = d[order]
    if not compute_vectors:
        return SmallSvd(np.empty((0, 0)), values, np.empty((0, 0)))
    U = U[:, order]
    V = V[:, order]
    for j in range(k):
        big = np.flatnonzero(np.abs(V[:, j]) > EPS)
        if big.size and V[big[0], j] < 0:
            V[:, j] = -V[:, j]
            U[:, j] = -U[:, j]
    return SmallSvd(U, values, V)


def smallest_singular_value(B: UpperBidiagonal) -> float:
    return float(svd_upper_bidiagonal(B, compute_vectors=False).values[-1])


def orthogonalize(v, basis, variant: GramSchmidt = "mgs"):
    """One Gram-Schmidt pass of ``v`` against the unit-norm columns of ``basis``.

    Returns ``(coeffs, residual, norm)`` with ``residual = v - basis @ coeffs``.
    Apply twice for a twice-is-enough scheme.
    """
    v = np.asarray(v, dtype=float)
    Q = np.asarray(basis, dtype=float)
    if Q.ndim == 1:
        Q = Q[:, None]
    if v.ndim != 1 or Q.shape[0] != v.size:
        raise InvalidInput(f"vector of length {v.size} vs basis with {Q.shape[0]} rows")
    if variant == "cgs":
        coeffs = Q.T @ v
        residual = v - Q @ coeffs
    elif variant == "mgs":
        residual = v.copy()
        coeffs = np.empty(Q.shape[1])
        for j in range(Q.shape[1]):
            coeffs[j] = Q[:, j] @ residual
            residual -= coeffs[j] * Q[:, j]
    else:
        raise InvalidInput(f"unknown Gram-Schmidt variant {variant!r}")
    return coeffs, residual, float(np.linalg.norm(residual))
