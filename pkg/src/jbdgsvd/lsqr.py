"""Inner least-squares solver: LSQR on the stacked operator C.

Stops on the backward-error criterion ||C^T r|| / (||C|| ||r||) <= tau, where
||C|| is supplied from outside (the cached norm estimate of the pair). The
recurrence estimate of the criterion only triggers a check; convergence is
always confirmed on an explicitly recomputed residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .sparse import StackedPair, pair_apply, pair_apply_t

EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class LsqrOptions:
    """Stopping rule for :func:`lsqr_solve`.

    ``rtol`` adds the consistent-system test ||r|| <= rtol * ||rhs||; the
    default 0 leaves only the round-off guard 64 * eps * ||rhs||.
    ``max_iters=None`` means 4 n.
    """

    tau: float
    max_iters: int | None = None
    operator_norm: float | None = None
    rtol: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidInput(f"tau must be positive, got {self.tau}")
        if self.max_iters is not None and self.max_iters < 1:
            raise InvalidInput("max_iters must be at least 1")
        if self.operator_norm is not None and not self.operator_norm > 0:
            raise InvalidInput("operator_norm must be positive")
        if self.rtol < 0:
            raise InvalidInput("rtol must be nonnegative")


@dataclass
class LsqrResult:
    z: np.ndarray
    iterations: int
    criterion: float
    residual_norm: float
    converged: bool
    residual_history: list[float] = field(default_factory=list)


def _true_check(P, rhs, z, norm_c):
    r = rhs - pair_apply(P, z)
    rnorm = float(np.linalg.norm(r))
    if rnorm == 0.0:
        return r, 0.0, 0.0
    return r, rnorm, float(np.linalg.norm(pair_apply_t(P, r))) / (norm_c * rnorm)


def lsqr_solve(P: StackedPair, rhs, opts: LsqrOptions) -> LsqrResult:
    """Approximate ``argmin_z ||C z - rhs||`` starting from z = 0."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.ndim != 1 or rhs.size != P.m + P.p:
        raise InvalidInput(f"right-hand side of length {rhs.size}, expected {P.m + P.p}")
    n = P.n
    norm_c = opts.operator_norm if opts.operator_norm is not None else P.norm
    max_iters = opts.max_iters if opts.max_iters is not None else 4 * n
    z = np.zeros(n)

    beta = float(np.linalg.norm(rhs))
    if beta == 0.0:
        return LsqrResult(z, 0, 0.0, 0.0, True)
    small_r = max(64.0 * EPS, opts.rtol) * beta
    u = rhs / beta
    v = pair_apply_t(P, u)
    alpha = float(np.linalg.norm(v))
    if alpha <= EPS * norm_c:
        # rhs orthogonal to range(C): z = 0 already minimizes
        _, rnorm, crit = _true_check(P, rhs, z, norm_c)
        return LsqrResult(z, 0, crit, rnorm, True, [rnorm])
    v = v / alpha
    w = v.copy()
    phibar = beta
    rhobar = alpha
    history = [beta]

    it = 0
    converged = False
    crit = math.inf
    rnorm = beta
    while it < max_iters:
        it += 1
        u = pair_apply(P, v) - alpha * u
        beta = float(np.linalg.norm(u))
        if beta > 0.0:
            u = u / beta
        vn = pair_apply_t(P, u) - beta * v
        alpha = float(np.linalg.norm(vn))
        if alpha > 0.0:
            vn = vn / alpha

        rho = math.hypot(rhobar, beta)
        c = rhobar / rho
        s = beta / rho
        theta = s * alpha
        rhobar = -c * alpha
        phi = c * phibar
        phibar = s * phibar
        z = z + (phi / rho) * w
        w = vn - (theta / rho) * w
        v = vn
        history.append(phibar)

        est_crit = alpha * abs(c) / norm_c
        exhausted = beta == 0.0 or alpha == 0.0
        if est_crit <= opts.tau or phibar <= small_r or exhausted or it == max_iters:
            _, rnorm, crit = _true_check(P, rhs, z, norm_c)
            if crit <= opts.tau or rnorm <= small_r:
                converged = True
                break
            if exhausted:
                break
    return LsqrResult(z, it, crit, rnorm, converged, history)
