"""Shared instance generators and dense oracles for the test suite.

Oracles here are deliberately independent of the library's solve paths:
minimum residuals come from numpy lstsq/pinv on dense arrays, projections
from explicitly formed projectors, ranks from dense SVD.
"""

from __future__ import annotations

import numpy as np

from lin2complex.da_reduce import (
    CLASS_G,
    CLASS_GZ2,
    GeneralSystem,
    average_row,
    difference_row,
    plain_da_system,
)
from lin2complex.sparse_core import SparseMatrix


# -- dense oracles ------------------------------------------------------------

def dense_lstsq(A_dense, b):
    x, *_ = np.linalg.lstsq(np.asarray(A_dense, float), np.asarray(b, float), rcond=None)
    return x


def dense_min_residual(A_dense, b) -> float:
    x = dense_lstsq(A_dense, b)
    return float(np.linalg.norm(np.asarray(A_dense) @ x - np.asarray(b)))


def dense_project(A_dense, b):
    """Orthogonal projection of b onto the column space of A."""
    A_dense = np.asarray(A_dense, float)
    return A_dense @ (np.linalg.pinv(A_dense) @ np.asarray(b, float))


def dense_rank(A_dense) -> int:
    return int(np.linalg.matrix_rank(np.asarray(A_dense, float)))


def dense_nullity(A_dense) -> int:
    A_dense = np.asarray(A_dense, float)
    return A_dense.shape[1] - dense_rank(A_dense)


# -- difference-average instances ----------------------------------------------

def covering_da_rows(rng: np.random.Generator, n_vars: int, extra_rows: int,
                     p_average: float = 0.3):
    """Rows covering every variable: a difference path plus random extras."""
    order = rng.permutation(n_vars)
    rows = [difference_row(int(order[t]), int(order[t + 1]))
            for t in range(n_vars - 1)]
    for _ in range(extra_rows):
        if n_vars >= 3 and rng.random() < p_average:
            i, j, k = map(int, rng.choice(n_vars, size=3, replace=False))
            rows.append(average_row(i, j, k))
        else:
            i, j = map(int, rng.choice(n_vars, size=2, replace=False))
            rows.append(difference_row(i, j))
    return rows


def random_da_instance(rng: np.random.Generator, n_vars: int, extra_rows: int,
                       p_average: float = 0.3, b_scale: int = 5):
    """A plain difference-average instance with integer right-hand sides."""
    rows = covering_da_rows(rng, n_vars, extra_rows, p_average)
    b = np.array([float(rng.integers(-b_scale, b_scale + 1)) if r.kind == "difference"
                  else 0.0 for r in rows])
    return plain_da_system(n_vars, rows), b


def planted_da_instance(rng: np.random.Generator, n_seed: int, n_grow: int,
                        extra_rows: int):
    """Feasible instance with a planted solution (dyadic values, exact in binary)."""
    values = [float(rng.integers(-8, 9)) for _ in range(n_seed)]
    rows = []
    for _ in range(n_grow):
        n = len(values)
        if n >= 2 and rng.random() < 0.5:
            i, j = map(int, rng.choice(n, size=2, replace=False))
            values.append(0.5 * (values[i] + values[j]))
            rows.append(average_row(i, j, len(values) - 1))
        else:
            i = int(rng.integers(0, n))
            values.append(float(rng.integers(-8, 9)))
            rows.append(difference_row(len(values) - 1, i))
    n = len(values)
    for _ in range(extra_rows):
        i, j = map(int, rng.choice(n, size=2, replace=False))
        rows.append(difference_row(i, j))
    x_star = np.array(values)
    used = set()
    for r in rows:
        used.update(v for v in (r.i, r.j, r.k) if v is not None)
    for v in range(n):
        if v not in used:
            rows.append(difference_row(v, (v + 1) % n))
    sys = plain_da_system(n, rows)
    b = np.array([x_star[r.i] - x_star[r.j] if r.kind == "difference" else 0.0
                  for r in sys.rows])
    assert np.allclose(sys.pattern_matrix().to_dense() @ x_star, b)
    return sys, b, x_star


def infeasible_da_instance(rng: np.random.Generator, n_vars: int, extra_rows: int,
                           p_average: float = 0.3):
    """Instance whose least-squares residual is provably positive: it contains
    a repeated difference pattern with conflicting right-hand sides."""
    sys, b = random_da_instance(rng, n_vars, extra_rows, p_average)
    i, j = map(int, rng.choice(n_vars, size=2, replace=False))
    rows = list(sys.rows) + [difference_row(i, j), difference_row(j, i)]
    b = np.concatenate([b, [1.0, float(rng.integers(0, 3))]])
    return plain_da_system(n_vars, rows), b


# -- general integer systems ----------------------------------------------------

def random_general_system(rng: np.random.Generator, n_vars: int, n_rows: int,
                          max_entry: int = 9, row_nnz: int = 3,
                          kappa_max: float | None = None,
                          max_tries: int = 200) -> GeneralSystem:
    for _ in range(max_tries):
        dense = np.zeros((n_rows, n_vars))
        for r in range(n_rows):
            k = min(n_vars, int(rng.integers(2, row_nnz + 1)))
            cols = rng.choice(n_vars, size=k, replace=False)
            for c in cols:
                v = 0
                while v == 0:
                    v = int(rng.integers(-max_entry, max_entry + 1))
                dense[r, c] = v
        if np.any(np.all(dense == 0, axis=0)) or np.any(np.all(dense == 0, axis=1)):
            continue
        if kappa_max is not None:
            s = np.linalg.svd(dense, compute_uv=False)
            s_nz = s[s > max(dense.shape) * np.finfo(float).eps * s[0]]
            if s_nz.size == 0 or s_nz[0] / s_nz[-1] > kappa_max:
                continue
        b = rng.integers(-max_entry, max_entry + 1, size=n_rows).astype(float)
        return GeneralSystem(SparseMatrix.from_dense(dense), b, CLASS_G)
    raise RuntimeError("failed to generate a general system within the budget")


def random_gz2_system(rng: np.random.Generator, n_vars: int, n_rows: int,
                      max_pow: int = 4) -> GeneralSystem:
    """Random system with zero row sums and power-of-two positive sums."""
    def composition(total: int, max_parts: int) -> list[int]:
        parts = []
        while total > 0:
            if len(parts) == max_parts - 1:
                parts.append(total)
                break
            p = int(rng.integers(1, total + 1))
            parts.append(p)
            total -= p
        return parts

    for _ in range(200):
        dense = np.zeros((n_rows, n_vars))
        for r in range(n_rows):
            p = 1 << int(rng.integers(0, max_pow + 1))
            pos = composition(p, max_parts=min(4, n_vars // 2 or 1))
            neg = composition(p, max_parts=min(4, n_vars - len(pos)))
            cols = rng.choice(n_vars, size=len(pos) + len(neg), replace=False)
            for c, v in zip(cols[:len(pos)], pos):
                dense[r, c] = v
            for c, v in zip(cols[len(pos):], neg):
                dense[r, c] = -v
        if np.any(np.all(dense == 0, axis=0)):
            continue
        b = rng.integers(-5, 6, size=n_rows).astype(float)
        sys = GeneralSystem(SparseMatrix.from_dense(dense), b, CLASS_GZ2)
        try:
            sys.validate_class()
        except Exception:
            continue
        return sys
    raise RuntimeError("failed to generate a G_z2 system within the budget")


def planted_general_system(rng: np.random.Generator, n_vars: int, n_rows: int,
                           max_entry: int = 50, row_nnz: int = 3,
                           kappa_max: float = 1e4):
    """Class-G system with a planted integer solution (feasible rhs)."""
    sys = random_general_system(rng, n_vars, n_rows, max_entry, row_nnz, kappa_max)
    x_star = rng.integers(-6, 7, size=n_vars).astype(float)
    b = sys.A.to_dense() @ x_star
    return GeneralSystem(sys.A, b, CLASS_G), x_star


def group_indicator(problem) -> np.ndarray:
    """Dense t x n matrix mapping variable values to group-constant flows."""
    H = np.zeros((problem.n_triangles, problem.n_vars))
    for t, g in enumerate(problem.K.group_of_triangle):
        H[t, g] = 1.0
    return H
