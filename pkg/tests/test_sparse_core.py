import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lin2complex.sparse_core import (
    DenseGuardError,
    DimensionError,
    MODE_DENSE,
    MODE_ITERATIVE,
    SparseMatrix,
    least_squares,
    matvec,
    projection_residual,
    spectral_summary,
)

# the 6x3 disk boundary operator reused across the suite
DISK_D2 = np.array([
    [-1, 0, 0],
    [0, -1, 0],
    [0, 0, 1],
    [1, 0, -1],
    [-1, 1, 0],
    [0, -1, 1],
], dtype=float)


def test_canonical_form_coalesces_and_sorts():
    A = SparseMatrix.from_entries(2, 2, [(1, 1, 2.0), (0, 0, 1.0), (1, 1, -2.0), (0, 1, 0.0)])
    assert A.nnz == 1
    assert A.rows.tolist() == [0] and A.cols.tolist() == [0]
    assert A.integer_exact


def test_canonical_order_row_major():
    A = SparseMatrix.from_entries(3, 3, [(2, 0, 1.0), (0, 2, 1.0), (0, 1, 1.0), (1, 1, 1.0)])
    coords = list(zip(A.rows.tolist(), A.cols.tolist()))
    assert coords == sorted(coords)


def test_matvec_identity():
    A = SparseMatrix.identity(2)
    assert np.array_equal(A @ np.array([3.0, -1.0]), np.array([3.0, -1.0]))


def test_matvec_disk_column_sums():
    A = SparseMatrix.from_dense(DISK_D2)
    assert np.array_equal(A @ np.ones(3), np.array([-1.0, -1.0, 1.0, 0.0, 0.0, 0.0]))


def test_matvec_dimension_mismatch():
    A = SparseMatrix.identity(3)
    with pytest.raises(DimensionError):
        A.matvec(np.ones(4))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_matvec_matches_dense(seed):
    rng = np.random.default_rng(seed)
    dense = rng.integers(-9, 10, size=(5, 4)).astype(float)
    x = rng.normal(size=4)
    A = SparseMatrix.from_dense(dense)
    assert np.allclose(A @ x, dense @ x, rtol=1e-12, atol=1e-12)


def test_least_squares_identity():
    A = SparseMatrix.identity(4)
    b = np.array([1.0, -2.0, 3.0, 0.5])
    res = least_squares(A, b, 1e-10)
    assert res.converged
    assert np.allclose(res.x, b)
    assert res.residual_norm < 1e-12


def test_least_squares_reweighted_two_equation_system():
    # rows (1,-1), (-1,1), (1,-1) scaled by 1/sqrt2, 1, 1/sqrt2; the optimum
    # keeps x1 - x2 = 1/2
    s = 1 / np.sqrt(2)
    A = SparseMatrix.from_dense([[s, -s], [-1, 1], [s, -s]])
    b = np.array([s, 0.0, s])
    res = least_squares(A, b, 1e-10)
    assert res.converged
    assert res.x[0] - res.x[1] == pytest.approx(0.5, abs=1e-9)


def test_least_squares_matches_pseudo_inverse():
    rng = np.random.default_rng(11)
    dense = rng.integers(-5, 6, size=(4, 3)).astype(float)
    b = rng.normal(size=4)
    res = least_squares(SparseMatrix.from_dense(dense), b, 1e-12)
    x_star = np.linalg.pinv(dense) @ b
    assert np.allclose(dense @ res.x, dense @ x_star, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_least_squares_consistent_reaches_tolerance(seed):
    rng = np.random.default_rng(seed)
    dense = rng.integers(-4, 5, size=(6, 4)).astype(float)
    x = rng.normal(size=4)
    b = dense @ x
    if np.linalg.norm(b) == 0:
        return
    res = least_squares(SparseMatrix.from_dense(dense), b, 1e-8)
    assert res.converged
    assert res.residual_norm <= 1e-8 * np.linalg.norm(b) + 1e-12


def test_least_squares_result_invariants():
    rng = np.random.default_rng(5)
    dense = rng.integers(-5, 6, size=(7, 4)).astype(float)
    b = rng.normal(size=7)
    res = least_squares(SparseMatrix.from_dense(dense), b, 1e-8)
    assert res.residual_norm >= 0 and res.projected_residual_norm >= 0
    assert res.residual_norm ** 2 >= res.projected_residual_norm ** 2 - 1e-9


def test_least_squares_reports_non_convergence():
    rng = np.random.default_rng(2)
    dense = rng.normal(size=(30, 20))
    b = rng.normal(size=30)
    res = least_squares(SparseMatrix.from_dense(dense), b, 1e-12, max_iter=1)
    assert not res.converged


def test_least_squares_rejects_bad_tolerance():
    A = SparseMatrix.identity(2)
    with pytest.raises(ValueError):
        least_squares(A, np.ones(2), 1.5)


def test_projection_residual_consistent_rhs():
    rng = np.random.default_rng(3)
    dense = rng.integers(-3, 4, size=(5, 3)).astype(float)
    x = rng.normal(size=3)
    b = dense @ x
    pr, pn = projection_residual(SparseMatrix.from_dense(dense), x, b)
    assert pr <= 1e-9 * max(pn, 1.0)
    assert pn == pytest.approx(np.linalg.norm(b), rel=1e-9)


def test_projection_residual_reweighted_optimum():
    s = 1 / np.sqrt(2)
    A = SparseMatrix.from_dense([[s, -s], [-1, 1], [s, -s]])
    b = np.array([s, 0.0, s])
    pr, pn = projection_residual(A, np.array([0.5, 0.0]), b)
    assert pr <= 1e-9
    assert pn > 0


def test_projection_residual_matches_dense_projector():
    rng = np.random.default_rng(9)
    dense = rng.integers(-5, 6, size=(6, 4)).astype(float)
    b = rng.normal(size=6)
    x = rng.normal(size=4)
    pr, pn = projection_residual(SparseMatrix.from_dense(dense), x, b)
    pib = dense @ (np.linalg.pinv(dense) @ b)
    assert pr == pytest.approx(np.linalg.norm(dense @ x - pib), abs=1e-8)
    assert pn == pytest.approx(np.linalg.norm(pib), abs=1e-8)


def test_spectral_summary_identity():
    s = spectral_summary(SparseMatrix.identity(3))
    assert s.sigma_max == pytest.approx(1.0)
    assert s.sigma_min_nonzero == pytest.approx(1.0)
    assert s.rank == 3


def test_spectral_summary_disk_rank():
    s = spectral_summary(SparseMatrix.from_dense(DISK_D2))
    assert s.rank == 3
    assert s.condition_number() < 10


def test_spectral_summary_dense_guard():
    A = SparseMatrix.identity(5)
    with pytest.raises(DenseGuardError):
        spectral_summary(A, MODE_DENSE, dense_limit=3)


def test_spectral_summary_iterative_agrees_with_dense():
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(50):
        dense = rng.normal(size=(rng.integers(3, 9), rng.integers(3, 9)))
        A = SparseMatrix.from_dense(dense)
        sd = spectral_summary(A, MODE_DENSE)
        si = spectral_summary(A, MODE_ITERATIVE)
        assert si.sigma_min_nonzero is None and si.rank is None
        worst = max(worst, abs(si.sigma_max - sd.sigma_max) / sd.sigma_max)
    assert worst < 0.01


def test_spectral_summary_zero_matrix():
    A = SparseMatrix.from_entries(3, 2, [])
    s = spectral_summary(A)
    assert s.sigma_max == 0.0 and s.rank == 0
