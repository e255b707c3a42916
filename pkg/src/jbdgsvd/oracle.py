"""Dense reference computations used as ground truth at desk scale.

Nothing here is meant for large problems: every routine densifies C and
refuses to run once m + p exceeds the dense cap (default 2000, overridable
through the ``GSVD_DENSE_CAP`` environment variable).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DenseCapExceeded, InvalidInput, NotRegular
from .sparse import StackedPair

EPS = float(np.finfo(float).eps)
DEFAULT_DENSE_CAP = 2000


def dense_cap() -> int:
    raw = os.environ.get("GSVD_DENSE_CAP")
    if raw is None:
        return DEFAULT_DENSE_CAP
    try:
        return int(raw)
    except ValueError:
        raise InvalidInput(f"GSVD_DENSE_CAP must be an integer, got {raw!r}") from None


def _check_cap(P: StackedPair, cap: int | None) -> None:
    cap = dense_cap() if cap is None else cap
    if P.m + P.p > cap:
        raise DenseCapExceeded(f"m + p = {P.m + P.p} exceeds the dense cap {cap}")


@dataclass(frozen=True)
class DenseQr:
    Q: np.ndarray
    R: np.ndarray
    m: int

    @property
    def QA(self) -> np.ndarray:
        return self.Q[: self.m]

    @property
    def QL(self) -> np.ndarray:
        return self.Q[self.m :]


@dataclass(frozen=True)
class DenseGsvd:
    """A = PA diag(c) X^{-1}, L = PL diag(s) X^{-1}, c descending.

    ``PA`` is m x n and ``PL`` is p x n. Columns belonging to a zero cosine
    (resp. sine) hold an orthonormal completion while room remains and are
    zero otherwise. ``clustered`` lists index pairs (i, i+1)
    whose cosines differ by less than 1e-10; their vectors are basis dependent.
    """

    c: np.ndarray
    s: np.ndarray
    X: np.ndarray
    PA: np.ndarray
    PL: np.ndarray
    W: np.ndarray
    clustered: list


def dense_qr(P: StackedPair, cap: int | None = None) -> DenseQr:
    """Thin Householder QR of C with R's diagonal made nonnegative."""
    _check_cap(P, cap)
    C = P.to_dense()
    Q, R = np.linalg.qr(C, mode="reduced")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q = Q * signs[None, :]
    R = R * signs[:, None]
    normc = np.linalg.norm(C, 2)
    if np.any(np.abs(np.diag(R)) <= 64 * EPS * P.n * normc):
        raise NotRegular("[A; L] is numerically rank deficient")
    return DenseQr(Q, R, P.m)


def exact_project(qr: DenseQr, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (qr.Q.shape[0],):
        raise InvalidInput(f"vector of length {u.size}, expected {qr.Q.shape[0]}")
    return qr.Q @ (qr.Q.T @ u)


def exact_solve(qr: DenseQr, u) -> tuple[np.ndarray, np.ndarray]:
    """Exact least-squares solution of C z = u and the projection C z = Q Q^T u."""
    y = qr.Q.T @ np.asarray(u, dtype=float)
    return sla.solve_triangular(qr.R, y), qr.Q @ y


def _paired_left_vectors(M: np.ndarray, W: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Columns p_i with M w_i = vals_i p_i, where vals ascends along W's columns.

    Dividing M w_i by a small vals_i loses accuracy like eps / vals_i, so
    those columns come from M's own SVD instead: its left vector for the
    matching singular value is accurate to eps / gap and doubles as an
    orthonormal completion when vals_i is zero.
    """
    rows, n = M.shape
    Ul, _, VlT = np.linalg.svd(M, full_matrices=True)
    P = np.zeros((rows, n))
    MW = M @ W
    for i in range(n):
        direct = vals[i] > 64 * EPS and vals[i] >= np.sqrt(0.5)
        j = n - 1 - i  # M's singular values descend while vals ascends
        if not direct and j < rows:
            align = float(VlT[j] @ W[:, i])
            if abs(align) >= 0.5:
                P[:, i] = np.copysign(1.0, align) * Ul[:, j]
                continue
            # inside a cluster the two bases need not line up
            direct = vals[i] > 64 * EPS
            if not direct:
                P[:, i] = Ul[:, j]
                continue
        if direct:
            P[:, i] = MW[:, i] / vals[i]
    return P


def dense_gsvd(P: StackedPair, cap: int | None = None, qr: DenseQr | None = None) -> DenseGsvd:
    """GSVD of a regular pair through the CS decomposition of [Q_A; Q_L]."""
    qr = dense_qr(P, cap) if qr is None else qr
    n = P.n
    QA, QL = qr.QA, qr.QL
    Ua, sv, Wt = np.linalg.svd(QA, full_matrices=True)
    W = Wt.T
    c = np.zeros(n)
    c[: sv.size] = np.minimum(sv, 1.0)
    c = np.where(c > 64 * EPS, c, 0.0)
    # Q_A's own left vectors pair exactly with W; beyond m columns there is no room
    PA = np.zeros((P.m, n))
    r = min(P.m, n)
    PA[:, :r] = Ua[:, :r]
    s = np.linalg.norm(QL @ W, axis=0)
    s = np.where(s > 64 * EPS, s, 0.0)
    PL = _paired_left_vectors(QL, W, s)
    X = sla.solve_triangular(qr.R, W)
    clustered = [(i, i + 1) for i in range(n - 1) if c[i] - c[i + 1] < 1e-10]
    return DenseGsvd(c, s, X, PA, PL, W, clustered)


def cond_number(P: StackedPair, cap: int | None = None) -> float:
    _check_cap(P, cap)
    sv = np.linalg.svd(P.to_dense(), compute_uv=False)
    if sv[-1] <= 64 * EPS * sv[0]:
        raise NotRegular("[A; L] is numerically rank deficient")
    return float(sv[0] / sv[-1])


def check_projection_relation(fact, qr: DenseQr, P: StackedPair | None = None) -> tuple[float, float, float]:
    """Residuals ||Q_A V_k - U_k B_k||, ||A Z_k - U_k B_k||, ||Q_L Vhat_k - Uhat_k Bhat_k||.

    V_k = Q^T Vt_k, Z_k = R^{-1} V_k, Vhat_k = V_k diag(1, -1, ...).
    ``A`` is taken from ``P`` when given, otherwise from ``fact.pair``.
    """
    P = fact.pair if P is None else P
    k = fact.k
    Vk = qr.Q.T @ fact.Vt[:, :k]
    Bk = fact.B.to_dense()
    UB = fact.U @ Bk
    Zk = sla.solve_triangular(qr.R, Vk)
    AZ = P.A.to_scipy() @ Zk
    signs = (-1.0) ** np.arange(k)
    r1 = np.linalg.norm(qr.QA @ Vk - UB, 2)
    r2 = np.linalg.norm(AZ - UB, 2)
    r3 = np.linalg.norm(qr.QL @ (Vk * signs[None, :]) - fact.Uh @ fact.Bhat.to_dense(), 2)
    return float(r1), float(r2), float(r3)
