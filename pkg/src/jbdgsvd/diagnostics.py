"""Measured error quantities of a JBD/rJBD run and their predicted bounds.

Most of these need the exact projector, so they are desk-scale only and take
the dense QR of C as an argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DiagnosticsUnavailable, InvalidInput, LuckyBreakdown
from .jbd import JbdFactorization
from .oracle import DenseQr, exact_project
from .small import UpperBidiagonal, smallest_singular_value


@dataclass
class StepDiagnostics:
    step: int
    alpha: float
    beta: float
    hat_alpha: float
    hat_beta: float
    orth_v: float
    orth_u: float
    orth_uhat: float
    theta: float
    inner_iters: int
    criterion: float
    norm_g: float | None = None


@dataclass
class RunReport:
    steps: list[StepDiagnostics]
    tau: float
    kappa: float | None = None
    summary: dict = field(default_factory=dict)

    @property
    def g_bound(self) -> float | None:
        """The 3 kappa tau line bounding every ||g_i||."""
        return None if self.kappa is None else 3.0 * self.kappa * self.tau


def _u_tilde(fact: JbdFactorization, i: int) -> np.ndarray:
    return np.concatenate([fact.U[:, i - 1], np.zeros(fact.pair.p)])


def g_vectors(fact: JbdFactorization, qr: DenseQr) -> np.ndarray:
    """Columns g~_i = Q Q^T u~_i - C z_i for i = 1..k (needs retained inner data)."""
    if len(fact.projections) < fact.k:
        raise DiagnosticsUnavailable("run was made without retain_inner=True")
    G = np.empty((fact.pair.m + fact.pair.p, fact.k))
    for i in range(1, fact.k + 1):
        G[:, i - 1] = exact_project(qr, _u_tilde(fact, i)) - fact.projections[i - 1]
    return G


def measure_g(fact: JbdFactorization, qr: DenseQr, i: int) -> float:
    """||g~_i||: the inner-solve error injected into outer step i."""
    if not 1 <= i <= fact.k:
        raise InvalidInput(f"step {i} outside 1..{fact.k}")
    if len(fact.projections) < i:
        raise DiagnosticsUnavailable("run was made without retain_inner=True")
    g = exact_project(qr, _u_tilde(fact, i)) - fact.projections[i - 1]
    return float(np.linalg.norm(g))


def orthogonality_level(M) -> float:
    """||I - M^T M||_2."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[1] == 0:
        return 0.0
    E = np.eye(M.shape[1]) - M.T @ M
    return float(np.max(np.abs(np.linalg.eigvalsh(E))))


def compute_H(fact: JbdFactorization):
    """H_k = B^T B + Bbar^T Bbar - I, with the 2-norms of its diagonal and off-diagonal parts."""
    B = fact.B.to_dense()
    Bb = fact.Bbar.to_dense()
    H = B.T @ B + Bb.T @ Bb - np.eye(fact.k)
    D = np.diag(np.diag(H))
    return H, float(np.linalg.norm(D, 2)), float(np.linalg.norm(H - D, 2))


def theta_from(hat_alphas, hat_betas, breakdown_tol: float = 0.0) -> np.ndarray:
    """theta_1..theta_k from theta_i = (hb_i / ha_i) (1 + theta_{i-1}), theta_0 = 0."""
    ha = np.asarray(hat_alphas, dtype=float)
    hb = np.asarray(hat_betas, dtype=float)
    out = np.empty(ha.size)
    prev = 0.0
    for i in range(ha.size):
        if ha[i] <= breakdown_tol:
            raise LuckyBreakdown("hat_alpha", i + 1, float(ha[i]))
        prev = hb[i] / ha[i] * (1.0 + prev)
        out[i] = prev
    return out


def theta_sequence(fact: JbdFactorization) -> np.ndarray:
    return theta_from(fact.hat_alphas[: fact.k], fact.hat_betas[: fact.k],
                      fact.options.breakdown_tol)


def predict_orthogonality(fact: JbdFactorization, G) -> tuple[np.ndarray, np.ndarray]:
    """Propagate mu_ji = u_j^T u_i and nu_ji = v~_j^T v~_i by the coupled recurrences.

    ``G`` holds the g~ vectors as columns. Returns ``mu`` (k x k) and
    ``nu`` ((k+1) x (k+1)), both symmetric with unit diagonal, indexed from 0.
    Meaningful for runs without reorthogonalization.
    """
    if G is None:
        raise DiagnosticsUnavailable("predicting orthogonality needs the g~ vectors")
    G = np.asarray(G, dtype=float)
    k = fact.k
    if G.shape[1] < k:
        raise DiagnosticsUnavailable(f"need {k} g~ vectors, got {G.shape[1]}")
    if fact.Vt.shape[1] < k + 1:
        raise DiagnosticsUnavailable("run ended without v~_{k+1}")
    a, b, Vt = fact.alphas, fact.betas, fact.Vt
    VG = Vt[:, : k + 1].T @ G[:, :k]  # VG[i, j] = v~_{i+1}^T g~_{j+1}
    mu = np.zeros((k, k))
    nu = np.zeros((k + 1, k + 1))
    nu[0, 0] = 1.0
    # 0-based indices: row i holds the quantities of outer step i + 1
    for i in range(k):
        mu[i, i] = 1.0
        for j in range(i):
            val = b[j] * nu[j + 1, i] + a[j] * nu[j, i] - b[i - 1] * mu[j, i - 1] + VG[i, j]
            mu[j, i] = mu[i, j] = val / a[i]
        for j in range(i + 1):
            prev = b[j - 1] * mu[j - 1, i] if j > 0 else 0.0
            val = a[j] * mu[j, i] + prev - a[i] * nu[j, i] - VG[j, i]
            nu[j, i + 1] = nu[i + 1, j] = val / b[i]
        nu[i + 1, i + 1] = 1.0
    return mu, nu


def householder_column_residual(U, alphas, betas, l: int, qa_v, n: int) -> float:
    """||P_1 ... P_{l+1} (beta_l e_l; alpha_{l+1} e_1) - (0_n; qa_v)||.

    P_i = I - p_i p_i^T with p_i = (-e_i; u_i) in R^{n+m}; ``qa_v`` is Q_A v_{l+1}.
    Works on raw arrays so the identity can be probed with hand-built inputs.
    """
    U = np.asarray(U, dtype=float)
    m = U.shape[0]
    if l + 1 > n:
        raise InvalidInput("column identity needs l + 1 <= n")
    w = np.zeros(n + m)
    w[l - 1] = betas[l - 1]
    w[l] = alphas[l]
    for i in range(l + 1, 0, -1):
        dot = -w[i - 1] + U[:, i - 1] @ w[n:]
        w[i - 1] += dot
        w[n:] -= dot * U[:, i - 1]
    w[n:] -= np.asarray(qa_v, dtype=float)
    return float(np.linalg.norm(w))


def lemma41_column_residual(fact: JbdFactorization, qr: DenseQr, l: int) -> float:
    """||f_{l+1}||: defect of the Householder-chain identity for column l + 1 of B_k."""
    if not 1 <= l <= fact.k - 1:
        raise InvalidInput(f"l = {l} outside 1..{fact.k - 1}")
    v = qr.Q.T @ fact.Vt[:, l]
    return householder_column_residual(fact.U, fact.alphas, fact.betas, l, qr.QA @ v, fact.pair.n)


def ghat_proxy(fact: JbdFactorization, qr: DenseQr) -> float:
    """||vhat_{k+1}^T Q_L^T Uhat_k - hat_beta_k e_k^T|| with vhat_{k+1} = (-1)^k Q^T v~_{k+1}."""
    k = fact.k
    if fact.Vt.shape[1] < k + 1:
        raise DiagnosticsUnavailable("run ended without v~_{k+1}")
    vhat = (-1.0) ** k * (qr.Q.T @ fact.Vt[:, k])
    row = (qr.QL @ vhat) @ fact.Uh
    row[k - 1] -= fact.hat_betas[k - 1]
    return float(np.linalg.norm(row))


def ghat_bound(fact: JbdFactorization, kappa: float) -> float:
    """sqrt(n) kappa tau / sigma_min(Bhat_k), the scale of the G-hat proxy."""
    smin = smallest_singular_value(fact.Bhat)
    return float(np.sqrt(fact.pair.n) * kappa * fact.options.tau / smin)


def run_report(
    fact: JbdFactorization,
    qr: DenseQr | None = None,
    kappa: float | None = None,
) -> RunReport:
    """Per-step diagnostics; ``norm_g`` is filled only when ``qr`` is given
    and the run retained its inner solutions."""
    theta = theta_from(fact.hat_alphas, fact.hat_betas)
    with_g = qr is not None and len(fact.projections) >= fact.k
    steps = []
    for i in range(1, fact.k + 1):
        nv = min(i + 1, fact.Vt.shape[1])
        steps.append(
            StepDiagnostics(
                step=i,
                alpha=float(fact.alphas[i - 1]),
                beta=float(fact.betas[i - 1]),
                hat_alpha=float(fact.hat_alphas[i - 1]),
                hat_beta=float(fact.hat_betas[i - 1]),
                orth_v=orthogonality_level(fact.Vt[:, :nv]),
                orth_u=orthogonality_level(fact.U[:, :i]),
                orth_uhat=orthogonality_level(fact.Uh[:, :i]),
                theta=float(theta[i - 1]),
                inner_iters=int(fact.inner_iterations[i - 1]),
                criterion=float(fact.criteria[i - 1]),
                norm_g=measure_g(fact, qr, i) if with_g else None,
            )
        )
    report = RunReport(steps, fact.options.tau, kappa)
    if kappa is not None:
        report.summary["g_bound"] = 3.0 * kappa * fact.options.tau
        try:
            report.summary["ghat_bound"] = ghat_bound(fact, kappa)
        except Exception:  # singular Bhat: no finite line to draw
            report.summary["ghat_bound"] = float("inf")
    return report
