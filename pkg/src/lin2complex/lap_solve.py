"""Solve boundary-operator systems through Laplacian or Gram solves.

Both routes rest on the same fact: the image of d1^T meets the image of d2
only at zero, so projecting an approximate solve of L1 x = d (or of
d2 d2^T x = d) through f = d2^T x lands near the projection of d onto the
image of d2.  The inner solve's accuracy is derived from spectral data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .complex2 import Complex2, boundary2, laplacian1
from .sparse_core import (
    DENSE_GUARD_DEFAULT,
    MODE_DENSE,
    MODE_ITERATIVE,
    SparseMatrix,
    least_squares,
    projection_residual,
    rank_from_singular_values,
    spectral_summary,
)

ROUTE_LAPLACIAN = "laplacian"
ROUTE_GRAM = "gram"
ROUTE_DIRECT = "direct"


@dataclass(frozen=True)
class BoundaryRouteReport:
    route: str
    eps_inner: float
    inner_converged: bool
    projected_residual: float
    projected_rhs_norm: float
    degenerate: bool
    spectral_mode: str
    ok: bool


def _min_nonzero_sq_singular(M: SparseMatrix) -> float:
    s = np.linalg.svd(M.to_dense(), compute_uv=False)
    rank = rank_from_singular_values(s, M.n_rows, M.n_cols)
    if rank == 0:
        raise ValueError("operator is zero; no nonzero singular value")
    return float(s[rank - 1])


def _solve_route(K: Complex2, d, delta: float, route: str,
                 dense_limit: int, sigma_min_floor: float | None,
                 max_iter: int | None):
    d = np.asarray(d, dtype=np.float64).ravel()
    d2 = boundary2(K)
    if d.size != d2.n_rows:
        raise ValueError(f"demand length {d.size} != {d2.n_rows} edges")
    if route == ROUTE_LAPLACIAN:
        op = laplacian1(K)
    elif route == ROUTE_GRAM:
        gram = d2.to_int_csr() @ d2.to_int_csr().T
        op = SparseMatrix.from_scipy(gram)
    else:
        raise ValueError(f"unknown route {route!r}")

    d_norm = float(np.linalg.norm(d))
    if d_norm == 0.0:
        report = BoundaryRouteReport(route, delta, True, 0.0, 0.0, False, "trivial", True)
        return np.zeros(d2.n_cols), report

    dense_ok = max(op.n_rows, d2.n_rows, d2.n_cols) <= dense_limit
    if dense_ok:
        mode = MODE_DENSE
        sigma_max_d2 = float(np.linalg.svd(d2.to_dense(), compute_uv=False)[0])
        sigma_min_op = _min_nonzero_sq_singular(op)
    else:
        mode = MODE_ITERATIVE
        sigma_max_d2 = spectral_summary(d2, MODE_ITERATIVE).sigma_max
        if sigma_min_floor is None:
            raise ValueError(
                "beyond the dense limit a lower bound on the operator's minimum "
                "nonzero singular value must be supplied")
        sigma_min_op = sigma_min_floor

    eps = delta * math.sqrt(sigma_min_op) / (sigma_max_d2 ** 2 * d_norm)
    eps = min(eps, 0.5)
    inner = least_squares(op, d, eps, max_iter)
    f = d2.T.matvec(inner.x)

    proj_res, proj_norm = projection_residual(d2, f, d, rel_tol=min(delta, 1e-8))
    degenerate = proj_norm <= 1e-10 * d_norm
    ok = degenerate or (inner.converged and proj_res <= delta * proj_norm + 1e-12 * d_norm)
    report = BoundaryRouteReport(route, eps, inner.converged,
                                 proj_res, proj_norm, degenerate, mode, ok)
    return f, report


def solve_boundary_via_laplacian(K: Complex2, d, delta: float,
                                 dense_limit: int = DENSE_GUARD_DEFAULT,
                                 sigma_min_floor: float | None = None,
                                 max_iter: int | None = None):
    """Solve d2 f ~ d through the combinatorial Laplacian.

    Picks the inner accuracy eps = delta * sigma_min(L1)^(1/2) /
    (sigma_max(d2)^2 ||d||), solves L1 x ~ d, and returns f = d2^T x.  When
    the projection of d onto the image of d2 vanishes while d does not, the
    instance is flagged degenerate (the relative guarantee is vacuous).
    """
    return _solve_route(K, d, delta, ROUTE_LAPLACIAN, dense_limit,
                        sigma_min_floor, max_iter)


def solve_boundary_via_gram(K: Complex2, d, delta: float,
                            dense_limit: int = DENSE_GUARD_DEFAULT,
                            sigma_min_floor: float | None = None,
                            max_iter: int | None = None):
    """Same contract as the Laplacian route with d2 d2^T as the inner operator."""
    return _solve_route(K, d, delta, ROUTE_GRAM, dense_limit,
                        sigma_min_floor, max_iter)
