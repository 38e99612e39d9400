import filecmp
import json

import numpy as np
import pytest

from lin2complex import fileio
from lin2complex.b2_reduce import reduce_da_to_b2, reduce_reg
from lin2complex.cli import main
from lin2complex.complex2 import validate
from lin2complex.da_reduce import gz2_to_da
from lin2complex.maxflow_ipm import FlowNetwork2
from lin2complex.sparse_core import SparseMatrix

from _gen import planted_da_instance, planted_general_system, random_gz2_system


def test_matrix_round_trip_integer(tmp_path):
    A = SparseMatrix.from_dense([[3, 0, -1], [0, 2, 0]])
    fileio.write_matrix(tmp_path / "a.mtx", A)
    B = fileio.read_matrix(tmp_path / "a.mtx")
    assert A.equals(B)
    assert B.integer_exact
    assert "integer" in (tmp_path / "a.mtx").read_text().splitlines()[0]


def test_matrix_round_trip_real(tmp_path):
    A = SparseMatrix.from_dense([[0.5, 0.0], [0.0, -2.25]])
    fileio.write_matrix(tmp_path / "a.mtx", A)
    assert A.equals(fileio.read_matrix(tmp_path / "a.mtx"))


def test_vector_round_trip(tmp_path):
    v = np.array([1.0, -2.5, 3e-17, 12345.6789])
    fileio.write_vector(tmp_path / "v.vec", v)
    assert np.array_equal(fileio.read_vector(tmp_path / "v.vec"), v)


def test_da_system_json_round_trip():
    rng = np.random.default_rng(1)
    sys = random_gz2_system(rng, 5, 3)
    da, _, _ = gz2_to_da(sys)
    obj = fileio.da_system_to_json(da)
    back = fileio.da_system_from_json(json.loads(json.dumps(obj)))
    assert back == da


def test_complex_json_round_trip():
    rng = np.random.default_rng(2)
    sys, b, _ = planted_da_instance(rng, 3, 3, 1)
    P = reduce_da_to_b2(sys, b)
    obj = fileio.complex_to_json(P.K)
    K2 = fileio.complex_from_json(json.loads(json.dumps(obj)))
    assert validate(K2).ok
    assert K2.n_vertices == P.K.n_vertices
    assert K2.loop_edges == P.K.loop_edges
    from lin2complex.complex2 import boundary2
    assert boundary2(K2).equals(P.d2)


def test_sidecar_maps_solution_without_complex():
    rng = np.random.default_rng(3)
    sys, b, x_star = planted_da_instance(rng, 3, 3, 1)
    P = reduce_da_to_b2(sys, b)
    sidecar = json.loads(json.dumps(fileio.boundary_sidecar_to_json(P)))
    H = np.zeros((P.n_triangles, P.n_vars))
    for t, g in enumerate(P.K.group_of_triangle):
        H[t, g] = 1.0
    x = fileio.sidecar_map_solution(sidecar, H @ x_star)
    assert np.allclose(x, x_star)


def _write_general(tmp_path, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    sys, x_star = planted_general_system(rng, 4, 4, max_entry=9)
    fileio.write_matrix(tmp_path / "A.mtx", sys.A)
    fileio.write_vector(tmp_path / "b.vec", sys.b)
    return sys, x_star


def test_cli_reduce_verify_solve(tmp_path):
    sys, _ = _write_general(tmp_path)
    out = tmp_path / "out"
    rc = main(["reduce", "--matrix", str(tmp_path / "A.mtx"),
               "--rhs", str(tmp_path / "b.vec"),
               "--stage", "b2w", "--out-dir", str(out), "--eps", "1e-3"])
    assert rc == 0
    for name in ("manifest.json", "b2_d2.mtx", "b2_gamma.vec", "b2_W.vec",
                 "b2_complex.json", "b2_trace.json", "da.json"):
        assert (out / name).exists()

    rc = main(["verify", "--dir", str(out)])
    assert rc == 0

    # replay purely from the written artifacts
    rc = main(["solve", "--manifest", str(out), "--eps", "1e-3",
               "--out-dir", str(out)])
    assert rc == 0
    x = fileio.read_vector(out / "x.vec")
    A = sys.A.to_dense()
    assert np.linalg.norm(A @ x - sys.b) <= 1e-3 * np.linalg.norm(sys.b)


@pytest.mark.parametrize("stage,expect", [
    ("gz", ["A_gz.mtx", "b_gz.vec"]),
    ("gz2", ["A_gz2.mtx", "b_gz2.vec"]),
    ("da", ["da.json", "da_matrix.mtx", "da_rhs.vec"]),
    ("b2", ["b2_d2.mtx", "b2_gamma.vec", "b2_complex.json"]),
])
def test_cli_reduce_stages(tmp_path, stage, expect):
    _write_general(tmp_path)
    out = tmp_path / "out"
    rc = main(["reduce", "--matrix", str(tmp_path / "A.mtx"),
               "--rhs", str(tmp_path / "b.vec"),
               "--stage", stage, "--out-dir", str(out), "--eps", "1e-3"])
    assert rc == 0
    for name in expect + ["manifest.json"]:
        assert (out / name).exists(), name
    if stage == "b2":
        assert main(["verify", "--dir", str(out)]) == 0


def test_cli_reduce_deterministic(tmp_path):
    _write_general(tmp_path)
    args = ["reduce", "--matrix", str(tmp_path / "A.mtx"),
            "--rhs", str(tmp_path / "b.vec"), "--stage", "b2w", "--eps", "1e-3"]
    main(args + ["--out-dir", str(tmp_path / "out1")])
    main(args + ["--out-dir", str(tmp_path / "out2")])
    for name in ("manifest.json", "b2_d2.mtx", "b2_gamma.vec", "b2_W.vec",
                 "b2_complex.json", "b2_trace.json", "da.json"):
        assert filecmp.cmp(tmp_path / "out1" / name, tmp_path / "out2" / name,
                           shallow=False), name


def test_cli_verify_catches_corruption(tmp_path):
    _write_general(tmp_path)
    out = tmp_path / "out"
    main(["reduce", "--matrix", str(tmp_path / "A.mtx"),
          "--rhs", str(tmp_path / "b.vec"), "--stage", "b2w",
          "--out-dir", str(out), "--eps", "1e-3"])
    d2 = fileio.read_matrix(out / "b2_d2.mtx")
    vals = d2.vals.copy()
    vals[0] = -vals[0]
    corrupted = SparseMatrix.from_arrays(d2.n_rows, d2.n_cols, d2.rows, d2.cols, vals)
    fileio.write_matrix(out / "b2_d2.mtx", corrupted)
    assert main(["verify", "--dir", str(out)]) == 1


def test_cli_solve_direct(tmp_path):
    A = SparseMatrix.from_dense([[1, 0], [0, 2], [1, 1]])
    b = np.array([1.0, 4.0, 3.0])
    fileio.write_matrix(tmp_path / "A.mtx", A)
    fileio.write_vector(tmp_path / "b.vec", b)
    rc = main(["solve", "--route", "direct", "--matrix", str(tmp_path / "A.mtx"),
               "--rhs", str(tmp_path / "b.vec"), "--eps", "1e-8",
               "--out-dir", str(tmp_path)])
    assert rc == 0
    x = fileio.read_vector(tmp_path / "x.vec")
    assert np.allclose(x, [1.0, 2.0], atol=1e-6)


@pytest.mark.parametrize("route", ["laplacian", "gram"])
def test_cli_solve_routes(tmp_path, route):
    rng = np.random.default_rng(5)
    sys, b, _ = planted_da_instance(rng, 2, 2, 1)
    P = reduce_da_to_b2(sys, b)
    fileio.write_json(tmp_path / "complex.json", fileio.complex_to_json(P.K))
    d = rng.integers(-3, 4, size=P.n_edges).astype(float)
    fileio.write_vector(tmp_path / "d.vec", d)
    rc = main(["solve", "--route", route, "--complex", str(tmp_path / "complex.json"),
               "--rhs", str(tmp_path / "d.vec"), "--eps", "1e-4",
               "--out-dir", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "f.vec").exists()


def test_cli_solve_route_guards_oversized_dense(tmp_path):
    rng = np.random.default_rng(6)
    sys, b, _ = planted_da_instance(rng, 2, 2, 1)
    P = reduce_da_to_b2(sys, b)
    fileio.write_json(tmp_path / "complex.json", fileio.complex_to_json(P.K))
    fileio.write_vector(tmp_path / "d.vec", np.ones(P.n_edges))
    rc = main(["solve", "--route", "laplacian", "--complex",
               str(tmp_path / "complex.json"), "--rhs", str(tmp_path / "d.vec"),
               "--eps", "1e-4", "--dense-limit", "3", "--out-dir", str(tmp_path)])
    assert rc == 2


def test_cli_maxflow_demo(tmp_path):
    from lin2complex.da_reduce import difference_row, plain_da_system

    sys = plain_da_system(2, [difference_row(0, 1)])
    P = reduce_da_to_b2(sys, np.array([1.0]))
    fileio.write_json(tmp_path / "net.json", {
        "complex": fileio.complex_to_json(P.K),
        "capacities": [1.0] * P.n_triangles,
        "gamma": P.gamma.tolist(),
        "f_star": 2.0,
    })
    rc = main(["maxflow-demo", "--network", str(tmp_path / "net.json"),
               "--steps", "200", "--trace", str(tmp_path / "trace.csv")])
    assert rc == 0
    rows = (tmp_path / "trace.csv").read_text().strip().splitlines()
    assert rows[0] == "step,kind,alpha,barrier,residual"
    assert len(rows) > 10
