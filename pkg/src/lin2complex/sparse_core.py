"""Sparse-matrix substrate and the iterative least-squares reference solver.

Every reduction stage and every verification pass funnels its linear algebra
through this module: a canonical COO matrix type with an integer-exactness
flag, an LSQR-backed least-squares driver whose convergence test is the
projected residual (the right-hand side projected onto the column space is
estimated by re-running the same solver at a 100x tighter tolerance), and
dense/iterative spectral summaries used by the certificate checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_GUARD_DEFAULT = 3000

MODE_DENSE = "dense_svd"
MODE_ITERATIVE = "iterative_estimate"


class DimensionError(ValueError):
    """Operand shapes do not match."""


class DenseGuardError(ValueError):
    """A dense-mode computation was requested beyond the size guard."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """An m x n sparse matrix in canonical COO form.

    Entries are sorted row-major then by column, duplicate coordinates are
    coalesced by summation, and explicit zeros are dropped, so two equal
    matrices serialize identically.  ``integer_exact`` records that every
    stored value is an exact integer; reduction outputs keep this flag so
    chain-complex identities can be checked in integer arithmetic.
    """

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    integer_exact: bool

    @staticmethod
    def from_arrays(n_rows: int, n_cols: int, rows, cols, vals) -> "SparseMatrix":
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.size == cols.size == vals.size):
            raise DimensionError("rows, cols and vals must have equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows:
                raise DimensionError(f"row index out of range for {n_rows} rows")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise DimensionError(f"column index out of range for {n_cols} columns")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            first = np.empty(rows.size, dtype=bool)
            first[0] = True
            first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            idx = np.cumsum(first) - 1
            summed = np.zeros(idx[-1] + 1, dtype=np.float64)
            np.add.at(summed, idx, vals)
            rows, cols, vals = rows[first], cols[first], summed
        keep = vals != 0.0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        integer_exact = bool(np.all(vals == np.rint(vals)))
        return SparseMatrix(
            int(n_rows), int(n_cols),
            _readonly(rows), _readonly(cols), _readonly(vals),
            integer_exact,
        )

    @staticmethod
    def from_entries(n_rows: int, n_cols: int,
                     entries: Iterable[tuple[int, int, float]]) -> "SparseMatrix":
        entries = list(entries)
        rows = [e[0] for e in entries]
        cols = [e[1] for e in entries]
        vals = [e[2] for e in entries]
        return SparseMatrix.from_arrays(n_rows, n_cols, rows, cols, vals)

    @staticmethod
    def from_dense(a) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise DimensionError("expected a 2-d array")
        rows, cols = np.nonzero(a)
        return SparseMatrix.from_arrays(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    @staticmethod
    def identity(n: int) -> "SparseMatrix":
        idx = np.arange(n)
        return SparseMatrix.from_arrays(n, n, idx, idx, np.ones(n))

    @staticmethod
    def from_scipy(m) -> "SparseMatrix":
        coo = sp.coo_matrix(m)
        return SparseMatrix.from_arrays(coo.shape[0], coo.shape[1], coo.row, coo.col, coo.data)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self.n_rows, self.n_cols)
        )

    def to_int_csr(self) -> sp.csr_matrix:
        if not self.integer_exact:
            raise ValueError("matrix is not integer-exact")
        return sp.csr_matrix(
            (self.vals.astype(np.int64), (self.rows, self.cols)),
            shape=(self.n_rows, self.n_cols),
        )

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols))
        out[self.rows, self.cols] = self.vals
        return out

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_arrays(self.n_cols, self.n_rows, self.cols, self.rows, self.vals)

    @property
    def T(self) -> "SparseMatrix":
        return self.transpose()

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.size != self.n_cols:
            raise DimensionError(f"expected vector of length {self.n_cols}, got {x.size}")
        return self.to_csr() @ x

    def __matmul__(self, x):
        return self.matvec(x)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.vals))) if self.nnz else 0.0

    def entry_abs_sum(self) -> float:
        return float(np.sum(np.abs(self.vals)))

    def row_scaled(self, scale) -> "SparseMatrix":
        scale = np.asarray(scale, dtype=np.float64).ravel()
        if scale.size != self.n_rows:
            raise DimensionError("row scale length mismatch")
        return SparseMatrix.from_arrays(
            self.n_rows, self.n_cols, self.rows, self.cols, self.vals * scale[self.rows]
        )

    def equals(self, other: "SparseMatrix") -> bool:
        return (
            self.shape == other.shape
            and self.nnz == other.nnz
            and bool(np.array_equal(self.rows, other.rows))
            and bool(np.array_equal(self.cols, other.cols))
            and bool(np.array_equal(self.vals, other.vals))
        )


def matvec(A: SparseMatrix, x) -> np.ndarray:
    """y = A x, exact for integer-exact inputs whose values fit in float64."""
    return A.matvec(x)


@dataclass(frozen=True)
class LeastSquaresResult:
    x: np.ndarray
    residual_norm: float
    projected_residual_norm: float
    projected_rhs_norm: float
    iterations: int
    converged: bool


def _lsqr_once(csr, b, tol, iter_lim):
    out = spla.lsqr(csr, b, damp=0.0, atol=tol, btol=tol, conlim=0.0, iter_lim=iter_lim)
    return out[0], int(out[2])


def least_squares(A: SparseMatrix, b, rel_tol: float,
                  max_iter: int | None = None) -> LeastSquaresResult:
    """Approximately minimize ||Ax - b||_2 with LSQR.

    The returned ``x`` satisfies ||Ax - P b|| <= rel_tol * ||P b|| whenever
    ``converged`` is true, where P b (the projection of b onto the column
    space) is estimated by running the same solver at a 100x tighter
    tolerance.  LSQR's own stopping rule is only a proxy for that criterion,
    so the candidate solve is re-run at a 10x tighter setting, a bounded
    number of times, until the measured criterion holds.
    """
    if not (0.0 < rel_tol < 1.0):
        raise ValueError("rel_tol must lie in (0, 1)")
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.size != A.n_rows:
        raise DimensionError(f"rhs length {b.size} != {A.n_rows}")
    if max_iter is None:
        max_iter = 8 * (A.n_rows + A.n_cols) + 400
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0 or A.nnz == 0:
        x = np.zeros(A.n_cols)
        return LeastSquaresResult(x, b_norm, 0.0, 0.0, 0, True)
    csr = A.to_csr()

    tight = max(rel_tol / 100.0, 1e-15)
    x_ref, it_ref = _lsqr_once(csr, b, tight, 4 * max_iter)
    pib = csr @ x_ref
    pib_norm = float(np.linalg.norm(pib))

    total_it = it_ref
    tol = rel_tol
    converged = False
    x = x_ref
    proj = 0.0
    for _ in range(7):
        x, itn = _lsqr_once(csr, b, max(tol, 1e-15), max_iter)
        total_it += itn
        proj = float(np.linalg.norm(csr @ x - pib))
        if proj <= rel_tol * pib_norm + 1e-14 * b_norm:
            converged = True
            break
        if itn >= max_iter:
            # the iteration budget, not the tolerance, was binding; a
            # tighter tolerance would retrace the same run
            break
        tol *= 0.1
    residual = float(np.linalg.norm(csr @ x - b))
    return LeastSquaresResult(x, residual, proj, pib_norm, total_it, converged)


def iterative_solve(A: SparseMatrix, b, tol: float,
                    max_iter: int | None = None) -> tuple[np.ndarray, int]:
    """One raw LSQR pass; for callers that certify accuracy externally."""
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.size != A.n_rows:
        raise DimensionError(f"rhs length {b.size} != {A.n_rows}")
    if max_iter is None:
        max_iter = 8 * (A.n_rows + A.n_cols) + 400
    if A.nnz == 0 or float(np.linalg.norm(b)) == 0.0:
        return np.zeros(A.n_cols), 0
    return _lsqr_once(A.to_csr(), b, max(tol, 1e-15), max_iter)


def projection_residual(A: SparseMatrix, x, b,
                        rel_tol: float = 1e-8,
                        max_iter: int | None = None) -> tuple[float, float]:
    """Return (||Ax - P b||, ||P b||) with P b from a high-accuracy solve."""
    x = np.asarray(x, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if x.size != A.n_cols or b.size != A.n_rows:
        raise DimensionError("operand shapes do not match the matrix")
    if max_iter is None:
        max_iter = 16 * (A.n_rows + A.n_cols) + 800
    if float(np.linalg.norm(b)) == 0.0 or A.nnz == 0:
        return float(np.linalg.norm(A.matvec(x))) if A.nnz else 0.0, 0.0
    csr = A.to_csr()
    tight = max(rel_tol / 100.0, 1e-15)
    x_ref, _ = _lsqr_once(csr, b, tight, max_iter)
    pib = csr @ x_ref
    return float(np.linalg.norm(csr @ x - pib)), float(np.linalg.norm(pib))


@dataclass(frozen=True)
class SpectralSummary:
    sigma_max: float
    sigma_min_nonzero: float | None
    rank: int | None
    method: str

    def condition_number(self) -> float:
        if self.sigma_min_nonzero is None or self.sigma_min_nonzero == 0.0:
            raise ValueError("minimum nonzero singular value unavailable")
        return self.sigma_max / self.sigma_min_nonzero


def rank_from_singular_values(s: np.ndarray, n_rows: int, n_cols: int) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = max(n_rows, n_cols) * np.finfo(np.float64).eps * s[0]
    return int(np.sum(s > tol))


def spectral_summary(A: SparseMatrix, mode: str = MODE_DENSE,
                     dense_limit: int = DENSE_GUARD_DEFAULT) -> SpectralSummary:
    """Singular-value summary: dense SVD or a power-iteration estimate.

    Dense mode is exact to machine precision but guarded by ``dense_limit``
    on the smaller dimension.  Iterative mode estimates sigma_max within 1%
    by power iteration on A^T A and reports sigma_min/rank as unavailable.
    """
    if mode == MODE_DENSE:
        if min(A.n_rows, A.n_cols) > dense_limit:
            raise DenseGuardError(
                f"dense mode limited to min(dims) <= {dense_limit}, "
                f"got {A.shape}")
        if min(A.n_rows, A.n_cols) == 0 or A.nnz == 0:
            return SpectralSummary(0.0, None, 0, MODE_DENSE)
        s = np.linalg.svd(A.to_dense(), compute_uv=False)
        rank = rank_from_singular_values(s, A.n_rows, A.n_cols)
        sigma_min = float(s[rank - 1]) if rank > 0 else None
        return SpectralSummary(float(s[0]), sigma_min, rank, MODE_DENSE)
    if mode == MODE_ITERATIVE:
        if A.nnz == 0 or min(A.n_rows, A.n_cols) == 0:
            return SpectralSummary(0.0, None, None, MODE_ITERATIVE)
        csr = A.to_csr()
        n = A.n_cols
        # deterministic start vector; the index ramp breaks symmetric ties
        v = np.ones(n) + np.arange(n) / (3.0 * n + 1.0)
        v /= np.linalg.norm(v)
        sigma = 0.0
        for _ in range(500):
            w = csr.T @ (csr @ v)
            nw = float(np.linalg.norm(w))
            if nw == 0.0:
                return SpectralSummary(0.0, None, None, MODE_ITERATIVE)
            new_sigma = float(np.sqrt(nw))
            v = w / nw
            if sigma > 0.0 and abs(new_sigma - sigma) <= 1e-8 * sigma:
                sigma = new_sigma
                break
            sigma = new_sigma
        return SpectralSummary(sigma, None, None, MODE_ITERATIVE)
    raise ValueError(f"unknown mode {mode!r}")
