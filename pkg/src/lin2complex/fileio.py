"""On-disk formats: Matrix Market matrices, plain-text vectors, JSON manifests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .b2_reduce import BoundaryProblem
from .complex2 import Complex2, EdgeRecord, OrientedTriangle
from .da_reduce import DARow, WeightedDASystem
from .sparse_core import SparseMatrix


def write_matrix(path, A: SparseMatrix) -> None:
    coo = sp.coo_matrix(
        (A.vals.astype(np.int64) if A.integer_exact else A.vals, (A.rows, A.cols)),
        shape=A.shape,
    )
    scipy.io.mmwrite(str(path), coo)


def read_matrix(path) -> SparseMatrix:
    return SparseMatrix.from_scipy(scipy.io.mmread(str(path)))


def write_vector(path, v) -> None:
    v = np.asarray(v, dtype=np.float64).ravel()
    with open(path, "w") as fh:
        for x in v:
            fh.write(f"{x:.17g}\n")


def read_vector(path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                values.append(float(line))
    return np.array(values)


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# -- difference-average systems ---------------------------------------------

def da_row_to_json(row: DARow) -> dict:
    return {"kind": row.kind, "i": row.i, "j": row.j, "k": row.k,
            "weight": row.weight, "scale": row.scale, "rhs": row.rhs}


def da_row_from_json(obj: dict) -> DARow:
    return DARow(obj["kind"], obj["i"], obj["j"], obj.get("k"),
                 obj.get("weight", 1.0), obj.get("rhs", 0.0), obj.get("scale", 1.0))


def da_system_to_json(sys: WeightedDASystem) -> dict:
    return {
        "n_vars": sys.n_vars,
        "n_main": sys.n_main,
        "n_aux": sys.n_aux,
        "rows": [da_row_to_json(r) for r in sys.rows],
    }


def da_system_from_json(obj: dict) -> WeightedDASystem:
    return WeightedDASystem(
        n_vars=obj["n_vars"],
        rows=tuple(da_row_from_json(r) for r in obj["rows"]),
        n_main=obj["n_main"],
        n_aux=obj["n_aux"],
    )


# -- complexes ----------------------------------------------------------------

def complex_to_json(K: Complex2) -> dict:
    return {
        "n_vertices": K.n_vertices,
        "edges": [
            {"u": e.tail, "v": e.head, "kind": e.kind,
             "q": e.q, "r": e.r, "group": e.group}
            for e in K.edges
        ],
        "triangles": [
            {"v0": t.vertices[0], "v1": t.vertices[1], "v2": t.vertices[2],
             "group": g}
            for t, g in zip(K.triangles, K.group_of_triangle)
        ],
        "central": [[g, c] for g, c in sorted(K.central_triangle.items())],
        "loops": [[q, list(ids)] for q, ids in sorted(K.loop_edges.items())],
    }


def complex_from_json(obj: dict) -> Complex2:
    edges = [EdgeRecord(e["u"], e["v"], e["kind"], e.get("q"), e.get("r"),
                        e.get("group")) for e in obj["edges"]]
    triangles = [OrientedTriangle((t["v0"], t["v1"], t["v2"]))
                 for t in obj["triangles"]]
    groups = [t["group"] for t in obj["triangles"]]
    return Complex2(
        n_vertices=obj["n_vertices"],
        edges=edges,
        triangles=triangles,
        group_of_triangle=groups,
        central_triangle={g: c for g, c in obj["central"]},
        loop_edges={q: tuple(ids) for q, ids in obj.get("loops", [])},
    )


# -- boundary problems --------------------------------------------------------

def boundary_sidecar_to_json(problem: BoundaryProblem) -> dict:
    """Trace sidecar: enough to map a flow back without the complex."""
    return {
        "n_vars": problem.n_vars,
        "central": list(problem.central),
        "equation_rhs": problem.equation_rhs.tolist(),
        "loop_weight": problem.loop_weight.tolist(),
        "da": da_system_to_json(problem.da),
        "tubes": [
            {"q": t.q, "var": t.var, "copy": t.copy, "sign": t.sign,
             "cols": {str(r): c for r, c in sorted(t.boundary_cols.items())}}
            for t in problem.tubes
        ],
    }


def sidecar_map_solution(sidecar: dict, f) -> np.ndarray:
    from .b2_reduce import map_soln_b2_to_da

    sys = da_system_from_json(sidecar["da"])
    return map_soln_b2_to_da(sys, np.array(sidecar["equation_rhs"]), f,
                             sidecar["central"])


def write_boundary_problem(out_dir, problem: BoundaryProblem, prefix: str = "b2") -> dict:
    """Write d2/W/gamma plus the complex and trace sidecar; returns file names."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = {
        "d2": f"{prefix}_d2.mtx",
        "weights": f"{prefix}_W.vec",
        "gamma": f"{prefix}_gamma.vec",
        "complex": f"{prefix}_complex.json",
        "trace": f"{prefix}_trace.json",
    }
    write_matrix(out_dir / names["d2"], problem.d2)
    write_vector(out_dir / names["weights"], problem.weights)
    write_vector(out_dir / names["gamma"], problem.gamma)
    write_json(out_dir / names["complex"], complex_to_json(problem.K))
    write_json(out_dir / names["trace"], boundary_sidecar_to_json(problem))
    return names
