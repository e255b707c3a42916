import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jbdgsvd.diagnostics import orthogonality_level
from jbdgsvd.errors import DegenerateStart, InnerSolverStalled, InvalidInput, LuckyBreakdown
from jbdgsvd.harness.generators import gen_A1L1, gen_random
from jbdgsvd.jbd import JbdOptions, default_start, jbd_init, jbd_run, jbd_step
from jbdgsvd.oracle import check_projection_relation, dense_qr
from jbdgsvd.small import svd_upper_bidiagonal
from jbdgsvd.sparse import CsrMatrix, StackedPair

EPS = float(np.finfo(float).eps)


def _pair(A, L):
    return StackedPair(CsrMatrix.from_dense(np.asarray(A, float)),
                       CsrMatrix.from_dense(np.asarray(L, float)))


def _relation_residuals(f):
    m = f.pair.m
    k = f.k
    r1 = np.linalg.norm(f.Vt[:m, :k] - f.U @ f.B.to_dense(), 2)
    signs = (-1.0) ** np.arange(k)
    r2 = np.linalg.norm(f.Vt[m:, :k] * signs - f.Uh @ f.Bhat.to_dense(), 2)
    return r1, r2


def test_init_identity_pair():
    st_ = jbd_init(_pair(np.eye(2), np.eye(2)), np.array([1.0, 0.0]))
    np.testing.assert_allclose(st_.Vt[:, 0], np.array([1, 0, 1, 0]) / math.sqrt(2), atol=1e-15)


def test_init_degenerate_and_invalid():
    P = _pair([[0.0, 1.0], [0.0, 2.0]], [[0.0, 1.0]])
    with pytest.raises(DegenerateStart):
        jbd_init(P, np.array([1.0, 0.0]))
    with pytest.raises(InvalidInput):
        jbd_init(P, np.zeros(2))
    with pytest.raises(InvalidInput):
        jbd_init(P, np.ones(3))


@given(st.integers(0, 10_000))
def test_init_unit_norm(seed):
    P = gen_random(6, 5, 4, seed=seed)
    st_ = jbd_init(P, np.random.default_rng(seed).standard_normal(4))
    assert abs(np.linalg.norm(st_.Vt[:, 0]) - 1) <= 32 * EPS


def test_options_validation():
    for bad in (dict(max_steps=0), dict(tau=0.0), dict(breakdown_tol=0.0), dict(reorth="full"),
                dict(inner="cg"), dict(reorth_passes=0), dict(on_stall="ignore"), dict(recurrence="x")):
        with pytest.raises(InvalidInput):
            JbdOptions(**bad)


@given(st.integers(0, 10_000))
def test_first_step_identities(seed):
    P = gen_random(7, 6, 5, seed=seed)
    s = default_start(5, seed)
    st_ = jbd_init(P, s)
    v1 = st_.Vt[:, 0].copy()
    jbd_step(st_, P, JbdOptions(tau=1e-10))
    a, ah = st_.alphas[0], st_.hat_alphas[0]
    assert a == pytest.approx(np.linalg.norm(v1[: P.m]), rel=1e-15)
    assert abs(a * a + ah * ah - 1) <= 1e-13


def test_column_orthonormal_pair_exact():
    P = _pair(np.diag([0.8, 0.6]), np.diag([0.6, 0.8]))
    qr = dense_qr(P)
    # n = 2, so beta_2 vanishes: a lucky termination with two complete steps
    with pytest.raises(LuckyBreakdown) as info:
        jbd_run(P, JbdOptions(max_steps=2, inner="exact"), qr=qr, start=np.array([1.0, 1.0]))
    f = info.value.factorization
    assert f.k == 2 and info.value.quantity == "beta"
    assert max(check_projection_relation(f, qr)) <= 1e-13


def test_reorth_does_not_change_first_step():
    P = gen_random(8, 7, 6, seed=3)
    a = jbd_run(P, JbdOptions(max_steps=1, reorth="none"))
    b = jbd_run(P, JbdOptions(max_steps=1, reorth="mgs"))
    # alpha_1, hat_alpha_1 are formed before any reorthogonalization
    np.testing.assert_array_equal(a.alphas, b.alphas)
    np.testing.assert_array_equal(a.hat_alphas, b.hat_alphas)
    # v~_2 is still swept against v~_1, which only removes rounding
    assert abs(b.xi[0, 0]) <= 64 * EPS
    assert np.abs(a.Vt - b.Vt).max() <= 64 * EPS


def test_single_step_identity_scaled():
    P = _pair(2 * np.diag([1.0, 2.0, 3.0]), np.eye(3))
    f = jbd_run(P, JbdOptions(max_steps=1, inner="exact"), start=np.array([1.0, 2.0, 3.0]))
    assert f.B.to_dense().shape == (1, 1)
    assert orthogonality_level(f.Vt) <= 1e-14 and f.Vt.shape[1] == 2


def test_scaled_identity_pair_terminates_after_one_step():
    # C = (2 I; I): Q_A = 2/sqrt(5) I, so v~_1 already spans an invariant subspace
    P = _pair(2 * np.eye(3), np.eye(3))
    with pytest.raises(LuckyBreakdown) as info:
        jbd_run(P, JbdOptions(max_steps=3, inner="exact"))
    f = info.value.factorization
    assert f.k == 1 and f.alphas[0] == pytest.approx(2 / math.sqrt(5), rel=1e-14)


def test_exact_mgs_random_pair():
    P = StackedPair(CsrMatrix.from_dense(np.random.default_rng(0).standard_normal((40, 30))),
                    CsrMatrix.from_dense(np.random.default_rng(1).standard_normal((35, 30))))
    f = jbd_run(P, JbdOptions(max_steps=20, inner="exact", reorth="mgs"))
    assert orthogonality_level(f.Vt) <= 1e-12
    H = f.B.to_dense().T @ f.B.to_dense() + f.Bbar.to_dense().T @ f.Bbar.to_dense() - np.eye(20)
    assert np.linalg.norm(H, 2) <= 1e-12 * 20


@pytest.mark.parametrize("reorth", ["none", "cgs", "mgs"])
@pytest.mark.parametrize("tau", [1e-6, 1e-10])
def test_structural_relations_hold_at_any_tau(reorth, tau):
    g = gen_A1L1(80, 100)
    f = jbd_run(g.pair, JbdOptions(max_steps=15, tau=tau, reorth=reorth))
    r1, r2 = _relation_residuals(f)
    assert r1 <= 1e-12 * f.k and r2 <= 1e-12 * f.k
    np.testing.assert_allclose(f.hat_alphas * f.hat_betas, f.alphas * f.betas, rtol=1e-13)
    for M in (f.U, f.Vt, f.Uh):
        assert np.abs(np.linalg.norm(M, axis=0) - 1).max() <= 32 * EPS
    bound = 1 + 5 * g.kappa * tau
    assert np.all((f.alphas > 0) & (f.alphas <= bound))
    assert np.all((f.betas > 0) & (f.betas <= bound))


def test_bbar_signs():
    f = jbd_run(gen_random(8, 7, 6, seed=1), JbdOptions(max_steps=3))
    one = f.leading(1)
    np.testing.assert_array_equal(one.Bbar.to_dense(), one.Bhat.to_dense())
    np.testing.assert_allclose(f.Bbar.to_dense(), f.Bhat.to_dense() @ np.diag([1.0, -1.0, 1.0]), atol=0)
    np.testing.assert_allclose(svd_upper_bidiagonal(f.Bbar).values, svd_upper_bidiagonal(f.Bhat).values,
                               rtol=1e-14)


def test_singular_value_monotone_in_k():
    f = jbd_run(gen_A1L1(60, 50).pair, JbdOptions(max_steps=20, tau=1e-10))
    hi, lo = [], []
    for j in range(1, 21):
        vals = svd_upper_bidiagonal(f.leading(j).B, compute_vectors=False).values
        hi.append(vals[0])
        lo.append(vals[-1])
    assert all(b >= a - 1e-14 for a, b in zip(hi, hi[1:]))
    assert all(b <= a + 1e-14 for a, b in zip(lo, lo[1:]))


def test_earlier_orthogonality_loss_with_loose_tau():
    g = gen_A1L1(200, 1e3)

    def first_cross(tau):
        f = jbd_run(g.pair, JbdOptions(max_steps=90, tau=tau, reorth="none"))
        for i in range(1, f.k + 1):
            if orthogonality_level(f.Vt[:, : i + 1]) > 1e-2:
                return i
        return math.inf

    assert first_cross(1e-6) < first_cross(1e-10)


def test_lucky_breakdown_keeps_partial_factorization():
    # a 5-dimensional problem is exhausted after 5 steps
    g = gen_A1L1(5, 10.0)
    with pytest.raises(LuckyBreakdown) as info:
        jbd_run(g.pair, JbdOptions(max_steps=8, inner="exact"))
    f = info.value.factorization
    assert 1 <= f.k <= 5 and f.terminated is not None
    assert info.value.quantity in ("alpha", "beta", "hat_alpha")


def test_step_after_termination_rejected():
    g = gen_A1L1(3, 2.0)
    qr = dense_qr(g.pair)
    st_ = jbd_init(g.pair, np.ones(3))
    opts = JbdOptions(inner="exact")
    with pytest.raises(LuckyBreakdown):
        for _ in range(5):
            jbd_step(st_, g.pair, opts, qr)
    if st_.terminated:
        with pytest.raises(InvalidInput):
            jbd_step(st_, g.pair, opts, qr)


def test_inner_stall():
    g = gen_A1L1(100, 1e4)
    with pytest.raises(InnerSolverStalled) as info:
        jbd_run(g.pair, JbdOptions(max_steps=3, tau=1e-12, lsqr_max_iters=5))
    assert info.value.factorization.k == 0
    f = jbd_run(g.pair, JbdOptions(max_steps=3, tau=1e-12, lsqr_max_iters=5, on_stall="continue"))
    assert f.k == 3


def test_exact_inner_needs_qr_for_step():
    P = gen_random(5, 5, 4)
    st_ = jbd_init(P, np.ones(4))
    with pytest.raises(InvalidInput):
        jbd_step(st_, P, JbdOptions(inner="exact"))


def test_literal_recurrence_drifts_out_of_range():
    # the literal form lets rounding outside range(C) grow; the default does not
    P = gen_random(60, 50, 40, seed=3)
    qr = dense_qr(P)
    z_form = jbd_run(P, JbdOptions(max_steps=25, inner="exact"), qr=qr)
    v_form = jbd_run(P, JbdOptions(max_steps=25, inner="exact", recurrence="v"), qr=qr)

    def outside(f):
        V = f.Vt
        return np.linalg.norm(V - qr.Q @ (qr.Q.T @ V), 2)

    assert outside(z_form) <= 1e-14
    assert outside(v_form) > 100 * outside(z_form)
    np.testing.assert_allclose(z_form.alphas[:5], v_form.alphas[:5], rtol=1e-10)


def test_deterministic_runs():
    g = gen_A1L1(50, 20)
    a = jbd_run(g.pair, JbdOptions(max_steps=10, seed=7))
    b = jbd_run(g.pair, JbdOptions(max_steps=10, seed=7))
    np.testing.assert_array_equal(a.Vt, b.Vt)
    np.testing.assert_array_equal(a.alphas, b.alphas)


def test_capacity_growth():
    P = gen_random(30, 30, 25, seed=2)
    qr = dense_qr(P)
    st_ = jbd_init(P, np.ones(25), capacity=2)
    for _ in range(7):
        jbd_step(st_, P, JbdOptions(inner="exact"), qr)
    assert st_.U.shape == (30, 7) and st_.Vt.shape == (60, 8)
    assert orthogonality_level(st_.Vt) <= 1e-13
