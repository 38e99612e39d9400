"""Oriented 2-complex data model, triangulation builders, boundary operators.

The complex is stored purely combinatorially: oriented triangles (vertex
triples up to even permutation), oriented edges, a grouping of triangles
into per-variable components, and bookkeeping for demand-carrying loop
edges.  The normative orientation property is combinatorial as well: the
two triangles sharing an interior edge must induce opposite signs on it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .sparse_core import SparseMatrix

EDGE_LOOP = "loop"
EDGE_INTERIOR = "interior"
EDGE_BOUNDARY = "boundary"

ORIENTATION_OPPOSITE = "opposite"
ORIENTATION_IDENTICAL = "identical"


class ComplexStructureError(ValueError):
    """The complex violates a structural invariant."""


@dataclass(frozen=True)
class OrientedTriangle:
    """A 2-simplex given by an ordered vertex triple; even permutations agree."""

    vertices: tuple[int, int, int]

    def induced_edges(self) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]]:
        """The three directed edges (u -> v) carrying the +1 induced sign."""
        a, b, c = self.vertices
        return ((a, b), (b, c), (c, a))


@dataclass(frozen=True)
class EdgeRecord:
    """An oriented edge; ``(tail, head)`` is the stored +1 direction.

    kind is "loop" (demand-carrying, tagged with equation q and slot r),
    "interior" (shared by exactly two triangles of one group), or
    "boundary" (free edge of a standalone patch awaiting gluing).
    """

    tail: int
    head: int
    kind: str
    q: int | None = None
    r: int | None = None
    group: int | None = None

    @property
    def key(self) -> tuple[int, int]:
        return (self.tail, self.head) if self.tail < self.head else (self.head, self.tail)


@dataclass
class Complex2:
    n_vertices: int
    edges: list[EdgeRecord]
    triangles: list[OrientedTriangle]
    group_of_triangle: list[int]
    central_triangle: dict[int, int]
    loop_edges: dict[int, tuple[int, int, int]] = field(default_factory=dict)
    _edge_index: dict[tuple[int, int], int] | None = field(default=None, repr=False)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def groups(self) -> list[int]:
        return sorted(set(self.group_of_triangle))

    def edge_index(self) -> dict[tuple[int, int], int]:
        if self._edge_index is None:
            index = {}
            for eid, e in enumerate(self.edges):
                if e.key in index:
                    raise ComplexStructureError(f"duplicate edge {e.key}")
                index[e.key] = eid
            self._edge_index = index
        return self._edge_index

    def edge_id(self, u: int, v: int) -> int:
        key = (u, v) if u < v else (v, u)
        try:
            return self.edge_index()[key]
        except KeyError:
            raise ComplexStructureError(f"triangle references missing edge {key}") from None

    def triangles_of_group(self, group: int) -> list[int]:
        return [t for t, g in enumerate(self.group_of_triangle) if g == group]


def _annulus_cells(outer: tuple[int, int, int], inner: tuple[int, int, int]):
    """Six oriented triangles filling the annulus between two 3-cycles.

    The triangles induce the directed cycle a->b->c->a on the outer triple
    and p->q->r->p on the inner triple, and every connecting edge receives
    opposite induced signs from its two triangles.
    """
    a, b, c = outer
    p, q, r = inner
    triangles = [(a, b, p), (b, c, r), (c, a, q), (a, p, q), (p, b, r), (c, q, r)]
    connecting = [(a, p), (a, q), (b, p), (b, r), (c, q), (c, r)]
    return triangles, connecting


def sphere_cells(n_holes: int):
    """Combinatorial cells of a sphere with ``n_holes`` 3-edge boundary cycles.

    Iterative: start from one triangle (a disk), then repeatedly subdivide
    the rightmost triangle by an inner triangular hole joined through six
    connecting edges.  Returns (n_vertices, triangles, hole_cycles); every
    hole cycle is oriented the way the surrounding triangles traverse it.
    """
    triangles: list[tuple[int, int, int]] = [(0, 1, 2)]
    holes: list[tuple[int, int, int]] = [(0, 1, 2)]
    n_vertices = 3
    host = 0
    for _ in range(n_holes - 1):
        a, b, c = triangles.pop(host)
        p, q, r = n_vertices, n_vertices + 1, n_vertices + 2
        n_vertices += 3
        new_triangles, _ = _annulus_cells((a, b, c), (p, q, r))
        host = len(triangles)
        triangles.extend(new_triangles)
        holes.append((p, q, r))
    return n_vertices, triangles, holes


def _edges_from_triangles(triangles, hole_cycles, group=0):
    """Edge records for a patch: hole-cycle edges oriented along their cycle
    and tagged boundary, all remaining edges lexicographic interior."""
    boundary_dir: dict[tuple[int, int], tuple[int, int]] = {}
    for (p, q, r) in hole_cycles:
        for (u, v) in ((p, q), (q, r), (r, p)):
            boundary_dir[(min(u, v), max(u, v))] = (u, v)
    seen: set[tuple[int, int]] = set()
    keys: list[tuple[int, int]] = []
    for tri in triangles:
        a, b, c = tri
        for (u, v) in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            if key not in seen:
                seen.add(key)
                keys.append(key)
    keys.sort()
    records = []
    for key in keys:
        if key in boundary_dir:
            u, v = boundary_dir[key]
            records.append(EdgeRecord(u, v, EDGE_BOUNDARY, group=group))
        else:
            records.append(EdgeRecord(key[0], key[1], EDGE_INTERIOR, group=group))
    return records


def triangulate_punctured_sphere(n_boundary: int) -> Complex2:
    """Oriented triangulation of a sphere with ``n_boundary`` punctures.

    Produces exactly 5b-4 triangles, 9b-6 edges and 3b vertices; every
    boundary component is a 3-edge cycle.
    """
    if n_boundary < 1:
        raise ValueError("a punctured sphere needs at least one boundary component")
    n_vertices, triangles, holes = sphere_cells(n_boundary)
    edges = _edges_from_triangles(triangles, holes)
    return Complex2(
        n_vertices=n_vertices,
        edges=edges,
        triangles=[OrientedTriangle(t) for t in triangles],
        group_of_triangle=[0] * len(triangles),
        central_triangle={0: 0},
    )


def sphere_boundary_cycles(n_boundary: int) -> list[tuple[int, int, int]]:
    """The oriented boundary cycles of ``triangulate_punctured_sphere``."""
    _, _, holes = sphere_cells(n_boundary)
    return holes


def tube_cells(hole_cycle: tuple[int, int, int], loop_cycle: tuple[int, int, int],
               sign: int):
    """Cells of a tube joining a sphere hole to a demand loop.

    ``hole_cycle`` is oriented the way the sphere triangles traverse it; the
    tube triangles traverse it the opposite way, so the glued edges become
    interior edges with opposite induced signs.  ``sign`` +1 makes the tube
    traverse the loop along its orientation, -1 against it.  Returns
    (triangles, connecting_edges, boundary_triangle_by_slot) where slot r in
    {1,2,3} names the loop edge (u1,u2), (u2,u3), (u3,u1) and the triangle
    containing it; the slot indexes into the returned triangle list.
    """
    w1, w2, w3 = hole_cycle
    u1, u2, u3 = loop_cycle
    outer = (w1, w3, w2)
    inner = (u1, u2, u3) if sign > 0 else (u1, u3, u2)
    triangles, connecting = _annulus_cells(outer, inner)
    # inner-edge triangles in _annulus_cells order: (a,p,q)=3, (c,q,r)=5, (p,b,r)=4
    if sign > 0:
        by_slot = {1: 3, 2: 5, 3: 4}
    else:
        by_slot = {1: 4, 2: 5, 3: 3}
    return triangles, connecting, by_slot


def triangulate_tube(orientation_match: str,
                     hole_cycle: tuple[int, int, int] = (0, 1, 2),
                     loop_cycle: tuple[int, int, int] = (3, 4, 5)) -> Complex2:
    """Standalone oriented tube between two 3-cycles: 6 triangles, 12 edges.

    ``orientation_match`` is "opposite" for a positive coefficient (the two
    boundary components are traversed with opposite orientations) and
    "identical" for a negative one.
    """
    if orientation_match not in (ORIENTATION_OPPOSITE, ORIENTATION_IDENTICAL):
        raise ValueError(f"unknown orientation_match {orientation_match!r}")
    if set(hole_cycle) & set(loop_cycle):
        raise ValueError("boundary triples must be disjoint")
    sign = 1 if orientation_match == ORIENTATION_OPPOSITE else -1
    triangles, connecting, _ = tube_cells(hole_cycle, loop_cycle, sign)
    n_vertices = max(max(hole_cycle), max(loop_cycle)) + 1
    boundary_cycles = [hole_cycle, loop_cycle]
    edges = _edges_from_triangles(triangles, boundary_cycles)
    return Complex2(
        n_vertices=n_vertices,
        edges=edges,
        triangles=[OrientedTriangle(t) for t in triangles],
        group_of_triangle=[0] * len(triangles),
        central_triangle={0: 0},
    )


def from_triangles(n_vertices: int, triangles, edge_order=None) -> Complex2:
    """Build a one-group complex from oriented triangles alone.

    Edge kinds are inferred from incidence (one triangle: boundary, two:
    interior).  ``edge_order`` optionally fixes the edge rows as a list of
    (tail, head) pairs; by default edges are sorted lexicographically with
    the smaller endpoint first.
    """
    triangles = [OrientedTriangle(tuple(t)) for t in triangles]
    count: dict[tuple[int, int], int] = {}
    for tri in triangles:
        for (u, v) in tri.induced_edges():
            key = (min(u, v), max(u, v))
            count[key] = count.get(key, 0) + 1
    if edge_order is None:
        ordered = [(u, v) for (u, v) in sorted(count)]
    else:
        ordered = [tuple(e) for e in edge_order]
        if {(min(u, v), max(u, v)) for (u, v) in ordered} != set(count):
            raise ComplexStructureError("edge_order does not cover the triangle edges")
    edges = []
    for (u, v) in ordered:
        key = (min(u, v), max(u, v))
        kind = EDGE_BOUNDARY if count[key] == 1 else EDGE_INTERIOR
        edges.append(EdgeRecord(u, v, kind, group=0))
    return Complex2(
        n_vertices=n_vertices,
        edges=edges,
        triangles=triangles,
        group_of_triangle=[0] * len(triangles),
        central_triangle={0: 0} if triangles else {},
    )


def boundary2(K: Complex2) -> SparseMatrix:
    """The edge-by-triangle boundary operator of the complex.

    Entry (e, T) is +1 when T's induced direction on e matches the stored
    edge orientation, -1 when reversed, 0 when e is not a side of T; every
    column has exactly three nonzeros.
    """
    rows, cols, vals = [], [], []
    for t, tri in enumerate(K.triangles):
        for (u, v) in tri.induced_edges():
            eid = K.edge_id(u, v)
            e = K.edges[eid]
            sign = 1.0 if (e.tail, e.head) == (u, v) else -1.0
            rows.append(eid)
            cols.append(t)
            vals.append(sign)
    return SparseMatrix.from_arrays(K.n_edges, K.n_triangles, rows, cols, vals)


def boundary1(K: Complex2) -> SparseMatrix:
    """The oriented vertex-edge incidence matrix: -1 at the tail, +1 at the head."""
    rows, cols, vals = [], [], []
    for eid, e in enumerate(K.edges):
        rows.extend((e.tail, e.head))
        cols.extend((eid, eid))
        vals.extend((-1.0, 1.0))
    return SparseMatrix.from_arrays(K.n_vertices, K.n_edges, rows, cols, vals)


def laplacian1(K: Complex2) -> SparseMatrix:
    """First combinatorial Laplacian d1^T d1 + d2 d2^T (symmetric PSD)."""
    d1 = boundary1(K).to_int_csr()
    d2 = boundary2(K).to_int_csr() if K.n_triangles else None
    lap = d1.T @ d1
    if d2 is not None:
        lap = lap + d2 @ d2.T
    return SparseMatrix.from_scipy(lap)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violation: str | None = None


def _edge_incidence(K: Complex2):
    """Per edge: list of (triangle index, induced sign)."""
    inc: list[list[tuple[int, int]]] = [[] for _ in range(K.n_edges)]
    for t, tri in enumerate(K.triangles):
        for (u, v) in tri.induced_edges():
            eid = K.edge_id(u, v)
            e = K.edges[eid]
            sign = 1 if (e.tail, e.head) == (u, v) else -1
            inc[eid].append((t, sign))
    return inc


def triangle_adjacency(K: Complex2) -> list[list[tuple[int, int]]]:
    """Adjacency over interior edges: per triangle, sorted (neighbor, edge id)."""
    inc = _edge_incidence(K)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(K.n_triangles)]
    for eid, members in enumerate(inc):
        if K.edges[eid].kind != EDGE_INTERIOR or len(members) != 2:
            continue
        (t1, _), (t2, _) = members
        adj[t1].append((t2, eid))
        adj[t2].append((t1, eid))
    for lst in adj:
        lst.sort()
    return adj


def validate(K: Complex2) -> ValidationReport:
    """Check the structural invariants; returns the first violation or ok."""
    def fail(msg: str) -> ValidationReport:
        return ValidationReport(False, msg)

    for g in K.groups:
        if g not in K.central_triangle:
            return fail(f"group {g} has no central triangle")
        c = K.central_triangle[g]
        if not (0 <= c < K.n_triangles) or K.group_of_triangle[c] != g:
            return fail(f"central triangle of group {g} is invalid")
    for t, tri in enumerate(K.triangles):
        if len(set(tri.vertices)) != 3:
            return fail(f"triangle {t} has repeated vertices")
        if not all(0 <= v < K.n_vertices for v in tri.vertices):
            return fail(f"triangle {t} references an unknown vertex")
        for (u, v) in tri.induced_edges():
            key = (min(u, v), max(u, v))
            if key not in K.edge_index():
                return fail(f"triangle {t} references missing edge {key}")
    for q, triple in K.loop_edges.items():
        for eid in triple:
            if K.edges[eid].kind != EDGE_LOOP or K.edges[eid].q != q:
                return fail(f"loop-edge table of equation {q} is inconsistent")

    inc = _edge_incidence(K)
    for eid, members in enumerate(inc):
        e = K.edges[eid]
        signs = sorted(s for _, s in members)
        if e.kind == EDGE_INTERIOR:
            if len(members) != 2:
                return fail(f"interior edge {eid} lies in {len(members)} triangles")
            if signs != [-1, 1]:
                return fail(f"interior edge {eid} has equal induced signs")
        elif e.kind == EDGE_BOUNDARY:
            if len(members) != 1:
                return fail(f"boundary edge {eid} lies in {len(members)} triangles")
        elif e.kind == EDGE_LOOP:
            if len(members) not in (2, 4):
                return fail(f"loop edge {eid} lies in {len(members)} triangles")
            if sum(signs) != 0:
                return fail(f"loop edge {eid} has unbalanced induced signs")
        else:
            return fail(f"edge {eid} has unknown kind {e.kind!r}")

    adj = triangle_adjacency(K)
    for g in K.groups:
        members = K.triangles_of_group(g)
        if not members:
            continue
        seen = {members[0]}
        queue = deque([members[0]])
        while queue:
            t = queue.popleft()
            for (nb, _) in adj[t]:
                if K.group_of_triangle[nb] == g and nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        if len(seen) != len(members):
            return fail(f"group {g} is not connected over interior edges")

    if K.n_triangles:
        prod = boundary1(K).to_int_csr() @ boundary2(K).to_int_csr()
        prod.eliminate_zeros()
        if prod.nnz != 0:
            return fail("d1 d2 != 0")
    return ValidationReport(True, None)
