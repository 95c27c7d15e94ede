import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from ddflow.linalg import (Factorization, LinearSystem, SolverError, as_csr, from_csr_arrays,
                           solve, spmv, write_matrix_market)


def test_identity_solve():
    b = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(solve(LinearSystem(sp.identity(3), b)), b)


def test_two_by_two():
    A = sp.csr_matrix([[2.0, 1.0], [1.0, 3.0]])
    x = solve(LinearSystem(A, np.array([3.0, 5.0])))
    assert np.allclose(x, [0.8, 1.4], atol=1e-14)


def test_constrained_dof_is_exact_and_column_eliminated():
    A = sp.csr_matrix([[4.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 4.0]])
    system = LinearSystem(A, np.array([1.0, 2.0, 3.0]), np.array([0]), np.array([0.5]))
    Ac, bc = system.constrained_form()
    assert Ac[0, 1] == 0 and Ac[1, 0] == 0 and Ac[0, 0] == 1
    x = solve(system)
    assert x[0] == 0.5
    assert np.allclose((A @ x)[1:], [2.0, 3.0], atol=1e-13)


def test_singular_matrix_raises():
    with pytest.raises(SolverError):
        Factorization(sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]])).solve(np.ones(2))


def test_spmv_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        spmv(sp.identity(3, format="csr"), np.ones(4))


def test_from_csr_arrays_validates():
    A = from_csr_arrays(2, 2, [0, 1, 2], [0, 1], [1.0, 2.0])
    assert A.toarray().tolist() == [[1.0, 0.0], [0.0, 2.0]]
    with pytest.raises(ValueError):
        from_csr_arrays(2, 2, [0, 2, 2], [1, 0], [1.0, 2.0])
    with pytest.raises(ValueError):
        from_csr_arrays(2, 2, [0, 1, 2], [0, 5], [1.0, 2.0])


def test_as_csr_canonical():
    A = sp.coo_matrix(([1.0, 2.0], ([0, 0], [1, 1])), shape=(2, 2))
    C = as_csr(A)
    assert C.nnz == 1 and C[0, 1] == 3.0 and C.has_sorted_indices


def test_transpose_solve():
    A = sp.csr_matrix([[2.0, 1.0], [0.0, 3.0]])
    f = Factorization(A)
    x = f.solve(np.array([1.0, 2.0]), trans=True)
    assert np.allclose(A.T @ x, [1.0, 2.0])


def test_matrix_market(tmp_path):
    write_matrix_market(tmp_path / "a.mtx", sp.identity(2))
    assert (tmp_path / "a.mtx").read_text().startswith("%%MatrixMarket")


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10_000))
def test_random_spd_systems_solve_to_tolerance(n, seed):
    rng = np.random.default_rng(seed)
    R = sp.random(n, n, density=0.3, random_state=rng)
    A = R @ R.T + n * sp.identity(n)
    b = rng.standard_normal(n)
    x = solve(LinearSystem(A, b))
    assert np.linalg.norm(A @ x - b) <= 1e-10 * max(np.linalg.norm(b), 1e-300)
