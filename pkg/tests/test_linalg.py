import numpy as np
import pytest
from numpy.testing import assert_allclose

from fpaccel.linalg import (
    ColumnRankDeficient,
    NoConvergence,
    NotQuasiDefinite,
    QrState,
    SingularTriangular,
    eigh_symmetric,
    ldl_factor,
    ldl_solve,
    qr_append_column,
    qr_solve_ls,
)


def householder_qr(mat):
    """From-scratch oracle, sign-fixed to a positive R diagonal."""
    q, r = np.linalg.qr(mat)
    signs = np.sign(np.diagonal(r))
    signs[signs == 0] = 1.0
    return q * signs, signs[:, None] * r


# -- incremental QR ----------------------------------------------------------


def test_qr_single_column():
    state = QrState(2, 4)
    qr_append_column(state, np.array([1.0, 0.0]))
    assert_allclose(state.q, [[1.0], [0.0]])
    assert_allclose(state.r, [[1.0]])


def test_qr_two_columns_forced_by_gram_schmidt():
    state = QrState(2, 4)
    qr_append_column(state, np.array([1.0, 0.0]))
    qr_append_column(state, np.array([1.0, 1.0]))
    assert_allclose(state.q, [[1.0, 0.0], [0.0, 1.0]])
    assert_allclose(state.r, [[1.0, 1.0], [0.0, 1.0]])


def test_qr_matches_householder_oracle():
    rng = np.random.default_rng(0)
    cols = [rng.standard_normal(50) for _ in range(20)]
    state = QrState(50, 20)
    for col in cols:
        qr_append_column(state, col)
    mat = np.column_stack(cols)
    q_ref, r_ref = householder_qr(mat)
    assert np.linalg.norm(state.q - q_ref) <= 1e-10 * np.linalg.norm(q_ref)
    assert np.linalg.norm(state.r - r_ref) <= 1e-10 * np.linalg.norm(r_ref)


def test_qr_invariants_on_random_appends():
    rng = np.random.default_rng(1)
    state = QrState(30, 10)
    cols = []
    for _ in range(10):
        col = rng.standard_normal(30)
        cols.append(col)
        qr_append_column(state, col)
        k = state.ncols
        assert np.abs(state.q.T @ state.q - np.eye(k)).max() < 1e-10
        assert np.all(np.tril(state.r, -1) == 0.0)
        mat = np.column_stack(cols)
        assert np.linalg.norm(state.q @ state.r - mat) < 1e-10 * np.linalg.norm(mat)


def test_qr_collinear_column_rejected():
    state = QrState(3, 4)
    col = np.array([1.0, 2.0, -1.0])
    qr_append_column(state, col)
    with pytest.raises(ColumnRankDeficient):
        qr_append_column(state, 3.0 * col)
    assert state.ncols == 1  # failed append commits nothing


def test_qr_zero_column_rejected():
    state = QrState(3, 4)
    with pytest.raises(ColumnRankDeficient):
        qr_append_column(state, np.zeros(3))


def test_qr_capacity_enforced():
    state = QrState(2, 1)
    qr_append_column(state, np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        qr_append_column(state, np.array([1.0, -1.0]))


def test_solve_ls_scalar_ratio():
    state = QrState(2, 2)
    qr_append_column(state, np.array([2.0, 0.0]))
    assert_allclose(qr_solve_ls(state, np.array([1.0, 0.0])), [0.5])


def test_solve_ls_orthonormal_square():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    state = QrState(5, 5)
    for j in range(5):
        qr_append_column(state, q[:, j])
    rhs = rng.standard_normal(5)
    # R is the identity here, so the solution is just M' rhs.
    assert_allclose(qr_solve_ls(state, rhs), q.T @ rhs, atol=1e-12)


def test_solve_ls_matches_normal_equations():
    rng = np.random.default_rng(3)
    mat = rng.standard_normal((30, 5))
    rhs = rng.standard_normal(30)
    state = QrState(30, 5)
    for j in range(5):
        qr_append_column(state, mat[:, j])
    oracle = np.linalg.solve(mat.T @ mat, mat.T @ rhs)
    got = qr_solve_ls(state, rhs)
    assert np.linalg.norm(got - oracle) <= 1e-8 * max(1.0, np.linalg.norm(oracle))


def test_solve_ls_singular_triangular():
    state = QrState(3, 3)
    qr_append_column(state, np.array([1.0, 0.0, 0.0]))
    qr_append_column(state, np.array([1.0, 1e-15, 0.0]), rank_tol=0.0)
    with pytest.raises(SingularTriangular):
        qr_solve_ls(state, np.array([1.0, 1.0, 0.0]))


def test_solve_ls_empty_state():
    with pytest.raises(ValueError):
        qr_solve_ls(QrState(3, 3), np.zeros(3))


# -- LDL^T -------------------------------------------------------------------


def test_ldl_diagonal_input():
    f = ldl_factor(np.diag([2.0, -1.0]), n_pos=1)
    assert_allclose(f.l, np.eye(2))
    assert_allclose(f.d, [2.0, -1.0])


def test_ldl_two_by_two_hand_computed():
    f = ldl_factor(np.array([[1.0, 1.0], [1.0, -1.0]]), n_pos=1)
    assert_allclose(f.l, [[1.0, 0.0], [1.0, 1.0]])
    assert_allclose(f.d, [1.0, -2.0])


def _random_kkt(n, m, gamma, rng):
    M = rng.standard_normal((n, n))
    P = M.T @ M / n
    A = rng.standard_normal((m, n))
    K = np.zeros((n + m, n + m))
    K[:n, :n] = P + np.eye(n) / gamma
    K[:n, n:] = A.T
    K[n:, :n] = A
    K[n:, n:] = -gamma * np.eye(m)
    return K


def test_ldl_reconstructs_random_kkt():
    rng = np.random.default_rng(4)
    for n, m in [(8, 5), (20, 30), (3, 1)]:
        K = _random_kkt(n, m, 0.7, rng)
        f = ldl_factor(K, n_pos=n)
        rebuilt = f.l @ np.diag(f.d) @ f.l.T
        assert np.linalg.norm(rebuilt - K) <= 1e-9 * np.linalg.norm(K)
        assert np.sum(f.d > 0) == n and np.sum(f.d < 0) == m


def test_ldl_wrong_sign_rejected():
    with pytest.raises(NotQuasiDefinite):
        ldl_factor(np.diag([2.0, 1.0]), n_pos=1)  # trailing block not negative
    with pytest.raises(NotQuasiDefinite):
        ldl_factor(np.diag([-2.0, -1.0]), n_pos=1)


def test_ldl_tiny_pivot_rejected():
    with pytest.raises(NotQuasiDefinite):
        ldl_factor(np.diag([1e-16, -1.0]), n_pos=1)


def test_ldl_solve_identity_and_diag():
    f = ldl_factor(np.eye(2), n_pos=2)
    assert_allclose(ldl_solve(f, np.array([3.0, -4.0])), [3.0, -4.0])
    f = ldl_factor(np.diag([2.0, -1.0]), n_pos=1)
    assert_allclose(ldl_solve(f, np.array([4.0, 3.0])), [2.0, -3.0])


def test_ldl_round_trip_residual():
    rng = np.random.default_rng(5)
    for n, m in [(40, 25), (200, 300)]:
        K = _random_kkt(n, m, 1.3, rng)
        f = ldl_factor(K, n_pos=n)
        rhs = rng.standard_normal(n + m)
        x = ldl_solve(f, rhs)
        assert np.linalg.norm(K @ x - rhs) <= 1e-8 * np.linalg.norm(rhs)


# -- Jacobi eigensolver -------------------------------------------------------


def test_eigh_diagonal():
    vals, vecs = eigh_symmetric(np.diag([3.0, 1.0]))
    assert sorted(vals) == [1.0, 3.0]
    assert_allclose(np.abs(vecs), np.eye(2))


def test_eigh_known_two_by_two():
    vals, vecs = eigh_symmetric(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert_allclose(sorted(vals), [-1.0, 1.0], atol=1e-14)
    assert_allclose(vecs @ np.diag(vals) @ vecs.T, [[0.0, 1.0], [1.0, 0.0]], atol=1e-13)


def test_eigh_random_reconstruction():
    rng = np.random.default_rng(6)
    G = rng.standard_normal((20, 20))
    S = 0.5 * (G + G.T)
    vals, vecs = eigh_symmetric(S)
    assert np.linalg.norm(vecs @ np.diag(vals) @ vecs.T - S) <= 1e-9 * np.linalg.norm(S)
    assert np.abs(vecs.T @ vecs - np.eye(20)).max() < 1e-10
    assert abs(vals.sum() - np.trace(S)) <= 1e-9 * abs(np.trace(S))


def test_eigh_rejects_asymmetric():
    with pytest.raises(ValueError):
        eigh_symmetric(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_eigh_zero_matrix():
    vals, vecs = eigh_symmetric(np.zeros((3, 3)))
    assert_allclose(vals, np.zeros(3))
    assert_allclose(vecs, np.eye(3))


def test_eigh_no_convergence_raised():
    rng = np.random.default_rng(7)
    G = rng.standard_normal((12, 12))
    S = 0.5 * (G + G.T)
    with pytest.raises(NoConvergence):
        eigh_symmetric(S, max_sweeps=1)
