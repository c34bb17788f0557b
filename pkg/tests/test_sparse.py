import numpy as np
import pytest
import scipy.sparse as sp

from stochfem.fem import assemble_mass, assemble_stiffness
from stochfem.mesh import build_uniform_mesh, refine_uniform
from stochfem.sparse import SparseMatrix, bicgstab_solve, cg_solve, spmv


def random_sparse(rng, n, fill):
    a = rng.standard_normal((n, n)) * (rng.random((n, n)) < fill)
    return a


def test_identity_spmv(rng):
    x = rng.standard_normal(7)
    np.testing.assert_array_equal(spmv(SparseMatrix.identity(7), x), x)


def test_row_sums():
    A = SparseMatrix.from_dense([[2, -1], [-1, 2]])
    np.testing.assert_array_equal(spmv(A, np.ones(2)), [1, 1])


def test_against_dense(rng):
    for _ in range(20):
        a = random_sparse(rng, 5, 0.4)
        x = rng.standard_normal(5)
        y = spmv(SparseMatrix.from_dense(a), x)
        assert np.max(np.abs(y - a @ x)) <= 1e-14


def test_linearity(rng):
    a = random_sparse(rng, 30, 0.2)
    A = SparseMatrix.from_dense(a)
    x, y = rng.standard_normal(30), rng.standard_normal(30)
    al, be = 1.7, -0.3
    lhs = spmv(A, al * x + be * y)
    rhs = al * spmv(A, x) + be * spmv(A, y)
    assert np.linalg.norm(lhs - rhs) <= 1e-13 * np.linalg.norm(rhs)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        spmv(SparseMatrix.identity(3), np.zeros(4))


def test_csr_invariants(rng):
    rows = rng.integers(0, 6, 40)
    cols = rng.integers(0, 6, 40)
    vals = rng.standard_normal(40)
    A = SparseMatrix.from_coo(rows, cols, vals, 6)
    for i in range(6):
        c = A.column_indices[A.row_offsets[i] : A.row_offsets[i + 1]]
        assert np.all(np.diff(c) > 0)
    assert np.all(np.diff(A.row_offsets) >= 0)
    assert A.row_offsets[-1] == A.column_indices.size == A.values.size
    dense = sp.coo_matrix((vals, (rows, cols)), shape=(6, 6)).toarray()
    np.testing.assert_allclose(A.to_dense(), dense, atol=1e-15)


def test_cg_identity(rng):
    b = rng.standard_normal(9)
    x, rep = cg_solve(SparseMatrix.identity(9), b)
    np.testing.assert_allclose(x, b, rtol=1e-14)
    assert rep.converged and rep.iterations == 1


def test_cg_2x2():
    x, rep = cg_solve(SparseMatrix.from_dense([[4, 1], [1, 3]]), np.array([1.0, 2.0]))
    np.testing.assert_allclose(x, [1 / 11, 7 / 11], rtol=1e-10)
    assert rep.converged


def test_cg_mass_consistency():
    M = assemble_mass(build_uniform_mesh(4, 4))
    x, rep = cg_solve(M, M @ np.ones(M.n), tol=1e-10)
    assert rep.converged
    np.testing.assert_allclose(x, 1.0, atol=1e-9)


def test_cg_reports_nonconvergence(rng):
    K = assemble_stiffness(build_uniform_mesh(8, 8))
    A = K + SparseMatrix.identity(K.n) * 1e-3
    b = rng.standard_normal(A.n)
    x, rep = cg_solve(A, b, tol=1e-12, maxit=2)
    assert not rep.converged and rep.iterations == 2
    assert np.all(np.isfinite(x))
    assert rep.final_residual_norm > 1e-12 * rep.initial_residual_norm


def test_report_contract(rng):
    M = assemble_mass(build_uniform_mesh(6, 6))
    x, rep = cg_solve(M, rng.standard_normal(M.n), tol=1e-10)
    assert rep.converged
    assert rep.final_residual_norm <= 1e-10 * rep.initial_residual_norm


def test_zero_rhs():
    x, rep = cg_solve(SparseMatrix.from_dense([[2.0, 0], [0, 3.0]]), np.zeros(2))
    assert rep.converged and np.all(x == 0)


def test_bicgstab_identity(rng):
    b = rng.standard_normal(5)
    x, rep = bicgstab_solve(SparseMatrix.identity(5), b)
    np.testing.assert_allclose(x, b, rtol=1e-14)
    assert rep.converged


def test_bicgstab_upper_triangular():
    x, rep = bicgstab_solve(SparseMatrix.from_dense([[2, 1], [0, 2]]), np.array([3.0, 2.0]))
    np.testing.assert_allclose(x, [1, 1], rtol=1e-10)
    assert rep.converged


def test_bicgstab_matches_cg(rng):
    m = build_uniform_mesh(8, 8)
    M, K = assemble_mass(m), assemble_stiffness(m)
    A = M + K * 0.01
    b = rng.standard_normal(A.n)
    x1, _ = cg_solve(A, b, tol=1e-13)
    x2, _ = bicgstab_solve(A, b, tol=1e-13)
    assert np.max(np.abs(x1 - x2)) <= 1e-10 * np.max(np.abs(x1))


def test_bicgstab_nonsymmetric(rng):
    a = np.eye(20) * 4 + random_sparse(rng, 20, 0.15)
    b = rng.standard_normal(20)
    x, rep = bicgstab_solve(SparseMatrix.from_dense(a), b, tol=1e-12)
    assert rep.converged
    np.testing.assert_allclose(x, np.linalg.solve(a, b), atol=1e-9)


def test_cg_iteration_bound_through_level5():
    m = build_uniform_mesh(4, 4)
    rng = np.random.default_rng(7)
    for lev in range(6):
        M, K = assemble_mass(m), assemble_stiffness(m)
        lim = 10 * np.sqrt(M.n)
        for A in (M, M + K * 1e-2):
            _, rep = cg_solve(A, rng.standard_normal(A.n), tol=1e-10)
            assert rep.converged and rep.iterations <= lim, (lev, rep)
        m, _ = refine_uniform(m)


def test_same_pattern_add():
    m = build_uniform_mesh(3, 3)
    M, K = assemble_mass(m), assemble_stiffness(m)
    assert M.same_pattern(K)
    np.testing.assert_allclose((M + K).to_dense(), M.to_dense() + K.to_dense(), atol=1e-15)
    A = SparseMatrix.from_dense(np.diag(np.arange(1.0, 17)))
    np.testing.assert_allclose((M + A).to_dense(), M.to_dense() + A.to_dense(), atol=1e-15)
    assert M.is_symmetric() and K.is_symmetric()
