"""Approximate GSVD components from a finished JBD factorization.

Cosines come from the singular values of B_k, or sines from those of Bhat_k.
Right vectors are recovered from Vt_k y by one consistent least-squares
solve per vector.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import InvalidInput, NumericalInconsistency
from .jbd import JbdFactorization
from .lsqr import LsqrOptions, lsqr_solve
from .small import svd_upper_bidiagonal
from .sparse import StackedPair, spmv, spmv_t

Side = Literal["largest", "smallest"]
Source = Literal["b", "bhat"]


@dataclass
class GsvdEstimate:
    """One approximate GSVD component; ``index`` is 1-based within its side.

    ``y`` is the right singular vector of B_k belonging to ``c`` (for the
    ``bhat`` source, the vector of Bhat_k mapped back to B_k's basis).
    ``x`` stays None until :func:`extract_right_vectors` fills it; it stays
    None if that solve stalls, with ``x_available`` False.
    """

    index: int
    c: float
    s: float
    source: Source = "b"
    y: np.ndarray | None = field(default=None, repr=False)
    x: np.ndarray | None = field(default=None, repr=False)
    x_available: bool = False
    residual: float = math.nan
    gap: float = math.inf
    history: list = field(default_factory=list)
    clipped: bool = False
    warning: str | None = None


@dataclass(frozen=True)
class ExtractionOptions:
    count: int = 1
    side: Side = "largest"
    source: Source = "b"
    tau_bar: float = 1e-10
    kappa: float | None = None  # only sets the slack of the c <= 1 check

    def __post_init__(self):
        if self.count < 1:
            raise InvalidInput("count must be at least 1")
        if self.side not in ("largest", "smallest"):
            raise InvalidInput(f"unknown side {self.side!r}")
        if self.source not in ("b", "bhat"):
            raise InvalidInput(f"unknown source {self.source!r}")
        if not self.tau_bar > 0:
            raise InvalidInput("tau_bar must be positive")


def _clip_unit(value: float, slack: float) -> tuple[float, bool, str | None]:
    if value <= 1.0:
        return max(value, 0.0), False, None
    msg = None
    if value - 1.0 > slack:
        msg = f"singular value {value!r} exceeds 1 by more than {slack:.3e}"
        warnings.warn(msg, NumericalInconsistency, stacklevel=3)
    return 1.0, True, msg


def _gaps(values: np.ndarray) -> np.ndarray:
    """Distance from each value to its nearest neighbour in the set."""
    if values.size < 2:
        return np.full(values.size, math.inf)
    v = np.sort(values)
    d = np.diff(v)
    left = np.concatenate([[math.inf], d])
    right = np.concatenate([d, [math.inf]])
    g_sorted = np.minimum(left, right)
    out = np.empty_like(values)
    out[np.argsort(values, kind="stable")] = g_sorted
    return out


def extract_values(fact: JbdFactorization, opts: ExtractionOptions) -> list[GsvdEstimate]:
    """Estimates for the ``count`` largest or smallest cosines, most extreme first."""
    k = fact.k
    if opts.count > k:
        raise InvalidInput(f"requested {opts.count} values from a {k}-step factorization")
    slack = 5.0 * (opts.kappa if opts.kappa is not None else 1.0) * fact.options.tau
    want_large_c = opts.side == "largest"
    if opts.source == "b":
        svd = svd_upper_bidiagonal(fact.B)
        idx = np.arange(k) if want_large_c else np.arange(k - 1, -1, -1)
        primary = svd.values
        Y = svd.right
    else:
        # largest cosines pair with the smallest sines
        svd = svd_upper_bidiagonal(fact.Bhat)
        idx = np.arange(k - 1, -1, -1) if want_large_c else np.arange(k)
        primary = svd.values
        signs = (-1.0) ** np.arange(k)
        Y = svd.right * signs[:, None]
    gaps = _gaps(primary)
    out = []
    for rank, j in enumerate(idx[: opts.count], start=1):
        val, clipped, msg = _clip_unit(float(primary[j]), slack)
        other = math.sqrt(max(0.0, 1.0 - val * val))
        c, s = (val, other) if opts.source == "b" else (other, val)
        out.append(
            GsvdEstimate(
                index=rank, c=c, s=s, source=opts.source, y=Y[:, j].copy(),
                gap=float(gaps[j]), clipped=clipped, warning=msg,
            )
        )
    return out


def extract_right_vectors(
    fact: JbdFactorization,
    P: StackedPair,
    estimates: list[GsvdEstimate],
    tau_bar: float,
    max_iters: int | None = None,
) -> list[GsvdEstimate]:
    """Solve C x = Vt_k y for each estimate and fill ``x`` and ``residual`` in place."""
    if not tau_bar > 0:
        raise InvalidInput("tau_bar must be positive")
    Vk = fact.Vt[:, : fact.k]
    opts = LsqrOptions(tau=tau_bar, max_iters=max_iters, operator_norm=P.norm, rtol=tau_bar)
    for est in estimates:
        if est.y is None or est.y.size != fact.k:
            raise InvalidInput(f"estimate {est.index} carries no singular vector of size {fact.k}")
        res = lsqr_solve(P, Vk @ est.y, opts)
        if not res.converged:
            est.x, est.x_available = None, False
            est.warning = f"x solve stalled after {res.iterations} iterations"
            continue
        est.x, est.x_available = res.z, True
        est.residual = gsvd_residual(P, est)
    return estimates


def gsvd_residual(P: StackedPair, est: GsvdEstimate) -> float:
    """||s^2 A^T A x - c^2 L^T L x|| / (||C||^2 ||x||)."""
    if est.x is None:
        raise InvalidInput("estimate has no right vector")
    x = est.x
    r = est.s**2 * spmv_t(P.A, spmv(P.A, x)) - est.c**2 * spmv_t(P.L, spmv(P.L, x))
    return float(np.linalg.norm(r) / (P.norm**2 * np.linalg.norm(x)))


def track_convergence(fact: JbdFactorization, indices, side: Side = "largest", source: Source = "b") -> np.ndarray:
    """Ritz-value history: row k' - 1 holds the requested cosines from the first k' steps.

    ``indices`` are 1-based positions counted from the requested side; entries
    not yet available at step k' are NaN.
    """
    indices = [int(i) for i in indices]
    if any(i < 1 for i in indices):
        raise InvalidInput("indices are 1-based")
    hist = np.full((fact.k, len(indices)), np.nan)
    for kk in range(1, fact.k + 1):
        sub = fact.leading(kk)
        B = sub.B if source == "b" else sub.Bhat
        vals = svd_upper_bidiagonal(B, compute_vectors=False).values
        if source == "bhat":
            vals = np.sqrt(np.maximum(0.0, 1.0 - np.minimum(vals, 1.0) ** 2))
            vals = np.sort(vals)[::-1]
        vals = np.minimum(vals, 1.0)
        if side == "smallest":
            vals = vals[::-1]
        for col, i in enumerate(indices):
            if i <= kk:
                hist[kk - 1, col] = vals[i - 1]
    return hist


def attach_history(estimates: list[GsvdEstimate], fact: JbdFactorization, side: Side = "largest") -> None:
    """Fill each estimate's ``history`` with (k', c^(k')) pairs."""
    if not estimates:
        return
    src = estimates[0].source
    hist = track_convergence(fact, [e.index for e in estimates], side, src)
    for col, est in enumerate(estimates):
        est.history = [(kk + 1, float(hist[kk, col])) for kk in range(fact.k) if not math.isnan(hist[kk, col])]


def stagnation_step(series, tau: float, window: int = 5) -> int | None:
    """First 1-based step at which the last ``window`` changes all stayed below tau / 10."""
    vals = np.asarray(series, dtype=float)
    run = 0
    for j in range(1, vals.size):
        if abs(vals[j] - vals[j - 1]) < tau / 10:
            run += 1
            if run >= window:
                return j + 1
        else:
            run = 0
    return None
