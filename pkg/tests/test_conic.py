import numpy as np
import pytest
from numpy.testing import assert_allclose

from fpaccel.cones import NONNEG, ZERO, ConeBlock
from fpaccel.conic import (
    ConicProblem,
    DrsOperator,
    residual_norms,
    solve,
)
from fpaccel.problems import generate


def tiny_qp():
    """minimize 0.5 x^2 - 2 x  s.t.  x + s = 1, s >= 0 (optimum x = 1)."""
    return ConicProblem([[1.0]], [-2.0], [[1.0]], [1.0], [ConeBlock(NONNEG, 1)])


def tiny_qp_fixed_point(gamma):
    """Fixed point of the splitting operator, from the active-set KKT solve."""
    prob = tiny_qp()
    kkt = np.array([[prob.P[0, 0], prob.A[0, 0]], [prob.A[0, 0], 0.0]])
    x, y = np.linalg.solve(kkt, np.array([-prob.q[0], prob.b[0]]))
    s = prob.b[0] - prob.A[0, 0] * x
    return np.array([x, s + gamma * y])


def test_problem_validation():
    with pytest.raises(ValueError):
        ConicProblem([[1.0, 0.5], [0.0, 1.0]], [0.0, 0.0], None, [], [])  # asymmetric P
    with pytest.raises(ValueError):
        ConicProblem(None, [0.0], [[1.0]], [1.0], [ConeBlock(NONNEG, 2)])  # dims
    with pytest.raises(ValueError):
        ConicProblem(None, [np.nan], None, [], [])


def test_prox_identity_when_objective_vanishes():
    prob = ConicProblem(None, np.zeros(3), None, [], [])
    op = DrsOperator(prob, gamma=0.7)
    v = np.array([1.0, -2.0, 3.0])
    assert_allclose(op.prox_quadratic(v), v, atol=1e-9)


def test_prox_pure_quadratic():
    prob = ConicProblem(np.eye(2), np.zeros(2), None, [], [])
    op = DrsOperator(prob, gamma=1.0)
    v = np.array([2.0, -4.0])
    assert_allclose(op.prox_quadratic(v), v / 2.0, atol=1e-9)


def test_prox_satisfies_equality_constraint():
    rng = np.random.default_rng(0)
    prob = generate("RandomQP", n=20, m=30, seed=1)
    op = DrsOperator(prob, gamma=0.5)
    for _ in range(20):
        v = 5.0 * rng.standard_normal(op.dim)
        z = op.prox_quadratic(v)
        lhs = prob.A @ z[: prob.n] + z[prob.n :]
        assert np.linalg.norm(lhs - prob.b) <= 1e-8 * max(1.0, np.linalg.norm(prob.b))


def test_prox_kkt_residual_small():
    rng = np.random.default_rng(1)
    prob = generate("RandomQP", n=15, m=25, seed=2)
    op = DrsOperator(prob, gamma=1.3)
    n, gamma = prob.n, op.gamma
    kkt = np.block(
        [
            [prob.P + np.eye(n) / gamma, prob.A.T],
            [prob.A, -gamma * np.eye(prob.m)],
        ]
    )
    v = rng.standard_normal(op.dim)
    rhs = np.concatenate([v[:n] / gamma - prob.q, prob.b - v[n:]])
    sol = op.solve_kkt(rhs)
    assert np.linalg.norm(kkt @ sol - rhs) <= 1e-8 * np.linalg.norm(rhs)


def test_drs_fixed_point_is_fixed():
    for gamma in (0.5, 1.0, 2.0):
        op = DrsOperator(tiny_qp(), gamma=gamma)
        vstar = tiny_qp_fixed_point(gamma)
        assert np.linalg.norm(op.apply(vstar) - vstar) <= 1e-10


def test_tiny_qp_solves_to_known_optimum():
    sol = solve(tiny_qp(), "safeguarded", eps=1e-8, check_interval=5)
    assert sol.status == "converged"
    assert abs(sol.x[0] - 1.0) <= 1e-6
    assert abs(sol.y[0] - 1.0) <= 1e-6
    assert sol.s[0] >= -1e-9


def test_zero_cone_matches_equality_kkt_oracle():
    rng = np.random.default_rng(3)
    n, m = 12, 5
    M = rng.standard_normal((n, n))
    P = M.T @ M / n + 0.1 * np.eye(n)
    q = rng.standard_normal(n)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    prob = ConicProblem(P, q, A, b, [ConeBlock(ZERO, m)])
    sol = solve(prob, "safeguarded", eps=1e-9, check_interval=10)
    kkt = np.block([[P, A.T], [A, np.zeros((m, m))]])
    oracle = np.linalg.solve(kkt, np.concatenate([-q, b]))
    assert sol.status == "converged"
    assert np.linalg.norm(sol.x - oracle[:n]) <= 1e-6 * (1 + np.linalg.norm(oracle[:n]))


def test_residual_norms_trivial():
    prob = ConicProblem(None, np.zeros(2), np.zeros((3, 2)), np.array([1.0, 2.0, 3.0]),
                        [ConeBlock(NONNEG, 3)])
    r_prim, r_dual = residual_norms(prob, np.zeros(2), prob.b.copy(), np.zeros(3))
    assert r_prim == 0.0 and r_dual == 0.0


def test_residual_norms_match_recomputation():
    rng = np.random.default_rng(4)
    prob = generate("RandomQP", n=10, m=15, seed=5)
    x = rng.standard_normal(10)
    s = rng.standard_normal(15)
    y = rng.standard_normal(15)
    r_prim, r_dual = residual_norms(prob, x, s, y)
    assert r_prim == pytest.approx(np.abs(prob.A @ x + s - prob.b).max())
    assert r_dual == pytest.approx(np.abs(prob.P @ x + prob.q + prob.A.T @ y).max())


def test_residuals_at_converged_point():
    sol = solve(tiny_qp(), "vanilla", eps=1e-7, check_interval=5)
    assert sol.r_prim <= 1e-6 and sol.r_dual <= 1e-6


def test_gamma_update_refactors_and_bumps_epoch():
    op = DrsOperator(tiny_qp(), gamma=1.0)
    v = np.array([0.3, 0.4])
    before = op.prox_quadratic(v).copy()
    op.set_params([0.5])
    assert op.epoch == 1 and op.gamma == 0.5
    after = op.prox_quadratic(v)
    assert not np.allclose(before, after)  # the KKT system really changed
    op.set_params([0.5])
    assert op.epoch == 1  # unchanged parameters do not bump the epoch


def test_adapt_gamma_deadband_and_clip():
    prob = generate("RandomQP", n=8, m=12, seed=6)
    op = DrsOperator(prob, gamma=1.0)
    v = np.zeros(op.dim)
    op.apply(v)
    r_prim, r_dual, x, s, y = op.residuals(v)
    prim_scale = max(np.abs(prob.A @ x).max(), np.abs(s).max(), np.abs(prob.b).max(), 1.0)
    dual_scale = max(
        np.abs(prob.P @ x).max(), np.abs(prob.q).max(), np.abs(prob.A.T @ y).max(), 1.0
    )

    # balanced residuals: factor 1 sits inside the deadband
    assert not op.adapt_gamma(prim_scale, dual_scale)
    assert op.epoch == 0

    # scaled ratio 100 -> clip(sqrt(100)) = 10 -> gamma divided by 10
    assert op.adapt_gamma(100.0 * prim_scale, dual_scale)
    assert op.epoch == 1
    assert op.gamma == pytest.approx(0.1)

    # converged state: no change regardless of the ratio
    op2 = DrsOperator(prob, gamma=1.0)
    op2.apply(v)
    assert not op2.adapt_gamma(1e-9, 1e-13, tol=1e-6)
    assert op2.epoch == 0


def test_drs_firmly_nonexpansive_small():
    rng = np.random.default_rng(7)
    prob = generate("RandomQP", n=10, m=15, seed=8)
    op = DrsOperator(prob, gamma=0.8)
    for _ in range(200):
        v = 4.0 * rng.standard_normal(op.dim)
        w = 4.0 * rng.standard_normal(op.dim)
        fv, fw = op.apply(v), op.apply(w)
        lhs = np.linalg.norm(fv - fw) ** 2 + np.linalg.norm((v - fv) - (w - fw)) ** 2
        assert lhs <= np.linalg.norm(v - w) ** 2 + 1e-9


def test_vanilla_converges_linearly_on_seeded_qp():
    prob = generate("RandomQP", n=20, m=40, seed=9)
    sol = solve(prob, "vanilla", eps=1e-6)
    assert sol.status == "converged"
    assert sol.r_prim <= 1e-6 and sol.r_dual <= 1e-6


def test_feasible_problem_never_emits_certificate():
    sol = solve(tiny_qp(), "safeguarded", eps=1e-8, check_interval=5)
    assert sol.certificate is None
    prob = generate("RandomQP", n=15, m=30, seed=10)
    assert solve(prob, "safeguarded", eps=1e-6).certificate is None


def test_primal_infeasible_lp_detected():
    prob = generate("InfeasibleLP", seed=3)
    sol = solve(prob, "safeguarded", eps=1e-6)
    assert sol.status == "primal_infeasible"
    assert sol.record.iterations <= 2000
    w = sol.certificate.witness
    assert np.abs(w).max() == pytest.approx(1.0)
    # independent re-verification of the separating hyperplane conditions
    assert np.abs(prob.A.T @ w).max() <= 1e-6
    assert prob.b @ w < -1e-6
    assert np.all(w >= -1e-6)  # support of the nonnegative cone stays finite


def test_dual_infeasible_lp_detected():
    prob = generate("UnboundedLP", seed=3)
    sol = solve(prob, "safeguarded", eps=1e-6)
    assert sol.status == "dual_infeasible"
    assert sol.record.iterations <= 2000
    d = sol.certificate.witness
    assert np.abs(d).max() == pytest.approx(1.0)
    assert np.abs(prob.P @ d).max() <= 1e-6
    assert prob.q @ d < -1e-6
    assert np.all(prob.A @ d <= 1e-6)  # descent direction stays feasible


def test_sdp_solves():
    prob = generate("RandomSDP", side=6, seed=11)
    sol = solve(prob, "safeguarded", eps=1e-5)
    assert sol.status == "converged"
    assert sol.r_prim <= 1e-5 and sol.r_dual <= 1e-5


def test_three_modes_agree_on_tiny_qp():
    sols = {mode: solve(tiny_qp(), mode, eps=1e-8, check_interval=5) for mode in
            ("vanilla", "unsafe", "safeguarded")}
    for mode, sol in sols.items():
        assert sol.status == "converged", mode
        assert abs(sol.x[0] - 1.0) <= 1e-5, mode
