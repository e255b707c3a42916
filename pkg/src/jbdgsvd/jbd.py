"""Joint bidiagonalization of {A, L}, plain (JBD) and with v-reorthogonalization (rJBD).

Each outer step needs the projection Q Q^T (u_i; 0) onto range(C). It is
either approximated by LSQR (the realistic setting, with an error that the
diagnostics module measures) or formed exactly from a dense QR of C.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DegenerateStart, InnerSolverStalled, InvalidInput, LuckyBreakdown
from .lsqr import LsqrOptions, LsqrResult, lsqr_solve
from .oracle import DenseQr, dense_qr, exact_solve
from .small import UpperBidiagonal, orthogonalize
from .sparse import StackedPair, pair_apply

EPS = float(np.finfo(float).eps)

Reorth = Literal["none", "cgs", "mgs"]
Inner = Literal["lsqr", "exact"]
Recurrence = Literal["z", "v"]


@dataclass(frozen=True)
class JbdOptions:
    """Options for :func:`jbd_run`.

    ``breakdown_tol`` is relative: a scalar counts as zero below
    ``breakdown_tol * max(1, largest alpha or beta so far)``.
    ``retain_inner`` keeps every inner solution z_i and the projection
    C z_i actually used, which the diagnostics need.
    ``on_stall='continue'`` accepts an unconverged inner solve instead of raising.

    ``recurrence='z'`` (default) carries coefficient vectors w_i with
    v~_i = C w_i and forms the new direction as C (z_i - alpha_i w_i). This
    keeps every v~ inside range(C) to rounding level. ``'v'`` evaluates
    C z_i - alpha_i v~_i literally; there any rounding component outside
    range(C) is multiplied by alpha_i / beta_i at every step.
    """

    max_steps: int = 20
    tau: float = 1e-10
    reorth: Reorth = "mgs"
    inner: Inner = "lsqr"
    breakdown_tol: float = 1e-10
    seed: int = 0
    lsqr_max_iters: int | None = None
    reorth_passes: int = 1
    retain_inner: bool = False
    on_stall: Literal["raise", "continue"] = "raise"
    dense_cap: int | None = None
    recurrence: Recurrence = "z"

    def __post_init__(self):
        if self.max_steps < 1:
            raise InvalidInput("max_steps must be at least 1")
        if not self.tau > 0:
            raise InvalidInput("tau must be positive")
        if not self.breakdown_tol > 0:
            raise InvalidInput("breakdown_tol must be positive")
        if self.reorth not in ("none", "cgs", "mgs"):
            raise InvalidInput(f"unknown reorthogonalization {self.reorth!r}")
        if self.inner not in ("lsqr", "exact"):
            raise InvalidInput(f"unknown inner solver {self.inner!r}")
        if self.reorth_passes < 1:
            raise InvalidInput("reorth_passes must be at least 1")
        if self.on_stall not in ("raise", "continue"):
            raise InvalidInput(f"unknown stall policy {self.on_stall!r}")
        if self.recurrence not in ("z", "v"):
            raise InvalidInput(f"unknown recurrence form {self.recurrence!r}")


class JbdState:
    """Mutable working state of one run; columns live in preallocated blocks."""

    def __init__(self, m: int, p: int, n: int, capacity: int):
        self.m, self.p, self.n = m, p, n
        self.step = 0
        self._cap = max(capacity, 1)
        self._U = np.zeros((m, self._cap))
        self._Vt = np.zeros((m + p, self._cap + 1))
        self._W = np.zeros((n, self._cap + 1))
        self._Uh = np.zeros((p, self._cap))
        self._xi = np.zeros((self._cap, self._cap))
        self.alphas: list[float] = []
        self.betas: list[float] = []
        self.hat_alphas: list[float] = []
        self.hat_betas: list[float] = []
        self.inner_iterations: list[int] = []
        self.criteria: list[float] = []
        self.inner_converged: list[bool] = []
        self.z_bar: list[np.ndarray] = []
        self.projections: list[np.ndarray] = []
        self.terminated: str | None = None
        self._scale = 1.0
        self._nv = 0

    def _grow(self):
        cap = 2 * self._cap
        self._U = np.hstack([self._U, np.zeros((self.m, cap - self._cap))])
        self._Uh = np.hstack([self._Uh, np.zeros((self.p, cap - self._cap))])
        self._Vt = np.hstack([self._Vt, np.zeros((self.m + self.p, cap - self._cap))])
        self._W = np.hstack([self._W, np.zeros((self.n, cap - self._cap))])
        xi = np.zeros((cap, cap))
        xi[: self._cap, : self._cap] = self._xi
        self._xi = xi
        self._cap = cap

    @property
    def U(self) -> np.ndarray:
        return self._U[:, : self.step]

    @property
    def Uh(self) -> np.ndarray:
        return self._Uh[:, : self.step]

    @property
    def Vt(self) -> np.ndarray:
        """All v-tilde vectors produced so far (step + 1 of them unless beta broke down)."""
        return self._Vt[:, : self._nv]

    @property
    def W(self) -> np.ndarray:
        """Coefficient vectors with v~_i = C w_i (same count as ``Vt``)."""
        return self._W[:, : self._nv]

    @property
    def xi(self) -> np.ndarray:
        return self._xi[: self.step, : self.step]


@dataclass(frozen=True)
class JbdFactorization:
    """Finished (possibly partial) run. ``k`` is the number of completed steps."""

    pair: StackedPair
    options: JbdOptions
    k: int
    U: np.ndarray
    Vt: np.ndarray
    Uh: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    hat_alphas: np.ndarray
    hat_betas: np.ndarray
    xi: np.ndarray
    inner_iterations: np.ndarray
    criteria: np.ndarray
    start: np.ndarray
    z_bar: list = field(default_factory=list)
    projections: list = field(default_factory=list)
    terminated: str | None = None
    W: np.ndarray | None = None

    @property
    def B(self) -> UpperBidiagonal:
        return assemble_B(self)

    @property
    def Bhat(self) -> UpperBidiagonal:
        return assemble_Bhat(self)

    @property
    def Bbar(self) -> UpperBidiagonal:
        return assemble_Bbar(self)

    def leading(self, j: int) -> "JbdFactorization":
        """The factorization after the first j steps."""
        if not 1 <= j <= self.k:
            raise InvalidInput(f"leading size {j} outside 1..{self.k}")
        return JbdFactorization(
            self.pair, self.options, j, self.U[:, :j], self.Vt[:, : j + 1], self.Uh[:, :j],
            self.alphas[:j], self.betas[:j], self.hat_alphas[:j], self.hat_betas[:j],
            self.xi[:j, :j], self.inner_iterations[:j], self.criteria[:j], self.start,
            self.z_bar[:j], self.projections[:j], None,
            None if self.W is None else self.W[:, : j + 1],
        )


def assemble_B(fact: JbdFactorization) -> UpperBidiagonal:
    return UpperBidiagonal(fact.alphas[: fact.k], fact.betas[: fact.k - 1])


def assemble_Bhat(fact: JbdFactorization) -> UpperBidiagonal:
    return UpperBidiagonal(fact.hat_alphas[: fact.k], fact.hat_betas[: fact.k - 1])


def assemble_Bbar(fact: JbdFactorization) -> UpperBidiagonal:
    """Bhat_k P with P = diag(1, -1, 1, ...): column j picks up (-1)^j (0-based)."""
    k = fact.k
    signs = (-1.0) ** np.arange(k)
    return UpperBidiagonal(fact.hat_alphas[:k] * signs, fact.hat_betas[: k - 1] * signs[1:])


def default_start(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(n)


def jbd_init(P: StackedPair, s, capacity: int = 16) -> JbdState:
    """State at step 0 holding v~_1 = C s / ||C s||."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 1 or s.size != P.n:
        raise InvalidInput(f"starting vector of length {s.size}, expected {P.n}")
    snorm = float(np.linalg.norm(s))
    if snorm == 0.0:
        raise InvalidInput("starting vector must be nonzero")
    cs = pair_apply(P, s)
    csnorm = float(np.linalg.norm(cs))
    if csnorm <= 64 * EPS * P.norm * snorm:
        raise DegenerateStart("C s vanishes for the chosen starting vector")
    state = JbdState(P.m, P.p, P.n, capacity)
    state._Vt[:, 0] = cs / csnorm
    state._W[:, 0] = s / csnorm
    state._nv = 1
    state.start = s.copy()
    return state


def _inner_solve(P, u_tilde, opts: JbdOptions, qr: DenseQr | None):
    if opts.inner == "exact":
        z, _ = exact_solve(qr, u_tilde)
        return z, LsqrResult(z, 0, 0.0, float("nan"), True)
    res = lsqr_solve(P, u_tilde, LsqrOptions(opts.tau, opts.lsqr_max_iters, P.norm))
    return res.z, res


def jbd_step(state: JbdState, P: StackedPair, opts: JbdOptions, qr: DenseQr | None = None) -> JbdState:
    """Advance ``state`` by one outer step in place and return it.

    On breakdown of alpha or hat_alpha, or a stalled inner solve, ``state`` is
    left at the previous step. On breakdown of beta the step is completed
    without the new v~ vector and the state is marked terminated.
    """
    if state.terminated is not None:
        raise InvalidInput(f"run already terminated ({state.terminated})")
    if opts.inner == "exact" and qr is None:
        raise InvalidInput("exact inner solves need the dense QR of C")
    i = state.step + 1
    if i > state._cap:
        state._grow()
    m = state.m
    thr = opts.breakdown_tol * state._scale
    v = state._Vt[:, i - 1]

    t = v[:m].copy()
    if i > 1:
        t -= state.betas[-1] * state._U[:, i - 2]
    alpha = float(np.linalg.norm(t))
    if alpha <= thr:
        raise LuckyBreakdown("alpha", i, alpha, state)
    u = t / alpha

    th = (-1.0) ** (i - 1) * v[m:]
    if i > 1:
        th = th - state.hat_betas[-1] * state._Uh[:, i - 2]
    hat_alpha = float(np.linalg.norm(th))
    if hat_alpha <= thr:
        raise LuckyBreakdown("hat_alpha", i, hat_alpha, state)

    u_tilde = np.concatenate([u, np.zeros(state.p)])
    z, res = _inner_solve(P, u_tilde, opts, qr)
    if not res.converged and opts.on_stall == "raise":
        raise InnerSolverStalled(i, res, state)

    w = z - alpha * state._W[:, i - 1]
    proj = pair_apply(P, z) if (opts.retain_inner or opts.recurrence == "v") else None
    s = pair_apply(P, w) if opts.recurrence == "z" else proj - alpha * v
    coeffs = np.zeros(i)
    if opts.reorth != "none":
        for _ in range(opts.reorth_passes):
            c, s, _ = orthogonalize(s, state._Vt[:, :i], opts.reorth)
            coeffs += c
        w -= state._W[:, :i] @ coeffs
    beta = float(np.linalg.norm(s))

    state._U[:, i - 1] = u
    state._Uh[:, i - 1] = th / hat_alpha
    state._xi[:i, i - 1] = coeffs
    state.alphas.append(alpha)
    state.hat_alphas.append(hat_alpha)
    state.inner_iterations.append(res.iterations)
    state.criteria.append(res.criterion)
    state.inner_converged.append(res.converged)
    if opts.retain_inner:
        state.z_bar.append(z)
        state.projections.append(proj)
    state.step = i

    if beta <= thr:
        state.betas.append(beta)
        state.hat_betas.append(alpha * beta / hat_alpha)
        state.terminated = "beta"
        raise LuckyBreakdown("beta", i, beta, state)
    state._Vt[:, i] = s / beta
    state._W[:, i] = w / beta
    state._nv = i + 1
    state.betas.append(beta)
    state.hat_betas.append(alpha * beta / hat_alpha)
    state._scale = max(state._scale, alpha, beta)
    return state


def finalize(state: JbdState, P: StackedPair, opts: JbdOptions) -> JbdFactorization:
    k = state.step
    return JbdFactorization(
        pair=P,
        options=opts,
        k=k,
        U=state.U.copy(),
        Vt=state.Vt.copy(),
        Uh=state.Uh.copy(),
        alphas=np.array(state.alphas),
        betas=np.array(state.betas),
        hat_alphas=np.array(state.hat_alphas),
        hat_betas=np.array(state.hat_betas),
        xi=state.xi.copy(),
        inner_iterations=np.array(state.inner_iterations, dtype=int),
        criteria=np.array(state.criteria),
        start=state.start,
        z_bar=list(state.z_bar),
        projections=list(state.projections),
        terminated=state.terminated,
        W=state.W.copy(),
    )


def jbd_run(P: StackedPair, opts: JbdOptions, start=None, qr: DenseQr | None = None) -> JbdFactorization:
    """Run ``opts.max_steps`` steps of JBD (``reorth='none'``) or rJBD.

    Breakdown and inner stalls propagate as exceptions; the partial
    factorization is attached to them as ``exc.factorization``.
    """
    if start is None:
        start = default_start(P.n, opts.seed)
    if opts.inner == "exact" and qr is None:
        qr = dense_qr(P, opts.dense_cap)
    state = jbd_init(P, start, capacity=opts.max_steps)
    try:
        for _ in range(opts.max_steps):
            jbd_step(state, P, opts, qr)
    except (LuckyBreakdown, InnerSolverStalled) as exc:
        if state.terminated is None:
            state.terminated = type(exc).__name__
        exc.factorization = finalize(state, P, opts)
        raise
    return finalize(state, P, opts)
