"""Triangulations, derived edge topology and geometry, newest-vertex bisection.

A mesh is stored as two arrays, the vertex coordinates ``coords`` of shape
``(nv, 2)`` and the connectivity ``triangles`` of shape ``(nt, 3)``, plus the
newest-vertex-bisection state ``refinement_edge``.  All indices are 0-based.
Local edge ``j`` of a triangle is the edge opposite its local vertex ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Mesh",
    "EdgeTopology",
    "Geometry",
    "fix_local_enumeration",
    "build_topology",
    "compute_geometry",
    "refine_nvb",
    "refine_uniform",
    "read_mesh",
    "write_mesh",
    "signed_areas",
    "min_angle",
]


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def signed_areas(coords, triangles):
    p0 = coords[triangles[:, 0]]
    p1 = coords[triangles[:, 1]]
    p2 = coords[triangles[:, 2]]
    d1 = p1 - p0
    d2 = p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _longest_edge(coords, triangles):
    """Local index of the longest edge per triangle.

    Ties are broken by the lexicographically smallest sorted endpoint pair,
    which is the smallest global edge index under the edge enumeration used
    by :func:`build_topology`.
    """
    nt = len(triangles)
    if nt == 0:
        return np.zeros(0, dtype=np.int64)
    lengths = np.empty((nt, 3))
    keys = np.empty((nt, 3, 2), dtype=np.int64)
    for j in range(3):
        a = triangles[:, (j + 1) % 3]
        b = triangles[:, (j + 2) % 3]
        lengths[:, j] = np.hypot(*(coords[b] - coords[a]).T)
        keys[:, j, 0] = np.minimum(a, b)
        keys[:, j, 1] = np.maximum(a, b)
    longest = lengths.max(axis=1, keepdims=True)
    candidate = lengths >= longest * (1.0 - 1e-12)
    result = np.empty(nt, dtype=np.int64)
    for t in range(nt):
        js = np.flatnonzero(candidate[t])
        if len(js) == 1:
            result[t] = js[0]
        else:
            result[t] = min(js, key=lambda j: tuple(keys[t, j]))
    return result


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with newest-vertex-bisection state.

    Parameters
    ----------
    coords : array_like, shape (nv, 2)
        Vertex coordinates.  Geometrically coincident vertices are allowed
        and are how slits are represented.
    triangles : array_like, shape (nt, 3)
        Vertex indices per triangle, expected counter-clockwise.
    refinement_edge : array_like, shape (nt,), optional
        Local index in {0, 1, 2} of the refinement edge of each triangle.
        Defaults to the longest edge.
    """

    coords: np.ndarray
    triangles: np.ndarray
    refinement_edge: np.ndarray = field(default=None)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        triangles = np.asarray(self.triangles, dtype=np.int64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coords must have shape (nv, 2), got {coords.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            if triangles.size == 0:
                triangles = triangles.reshape(0, 3)
            else:
                raise ValueError(f"triangles must have shape (nt, 3), got {triangles.shape}")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(coords)):
            raise ValueError("triangle references a vertex index out of range")
        repeated = (
            (triangles[:, 0] == triangles[:, 1])
            | (triangles[:, 1] == triangles[:, 2])
            | (triangles[:, 0] == triangles[:, 2])
        )
        if repeated.any():
            raise ValueError(f"triangle {int(np.flatnonzero(repeated)[0])} repeats a vertex")
        if self.refinement_edge is None:
            ref = _longest_edge(coords, triangles)
        else:
            ref = np.asarray(self.refinement_edge, dtype=np.int64)
            if ref.shape != (len(triangles),) or (ref.size and (ref.min() < 0 or ref.max() > 2)):
                raise ValueError("refinement_edge must hold one local index in {0,1,2} per triangle")
        object.__setattr__(self, "coords", _readonly(coords))
        object.__setattr__(self, "triangles", _readonly(triangles))
        object.__setattr__(self, "refinement_edge", _readonly(ref))

    @property
    def n_vertices(self):
        return len(self.coords)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def __repr__(self):
        return f"Mesh(n_vertices={self.n_vertices}, n_triangles={self.n_triangles})"


@dataclass(frozen=True, eq=False)
class EdgeTopology:
    """Edge-oriented connectivity of a mesh.

    Attributes
    ----------
    edge_vertices : (ne, 2) int
        Endpoints of each edge, sorted ascending.  Edges are enumerated
        lexicographically by this pair.
    edges_of_triangle : (nt, 3) int
        Global edge index of local edge ``j`` (opposite local vertex ``j``).
    triangles_of_edge : (ne, 2) int
        ``(T+, T-)`` per edge; ``T-`` is ``-1`` on the boundary.  For
        interior edges ``T+`` is the triangle with the smaller index.
    is_interior : (ne,) bool
    local_pos : (ne, 2) int
        ``(q, r)`` with ``Mid(E) = M+_q = M-_r``; ``r`` is ``-1`` on the boundary.
    """

    edge_vertices: np.ndarray
    edges_of_triangle: np.ndarray
    triangles_of_edge: np.ndarray
    is_interior: np.ndarray
    local_pos: np.ndarray

    @property
    def n_edges(self):
        return len(self.edge_vertices)

    def boundary_vertices(self, n_vertices):
        flags = np.zeros(n_vertices, dtype=bool)
        flags[self.edge_vertices[~self.is_interior].ravel()] = True
        return flags


@dataclass(frozen=True, eq=False)
class Geometry:
    area: np.ndarray
    length: np.ndarray
    normal: np.ndarray
    midpoint: np.ndarray


def fix_local_enumeration(mesh):
    """Return a copy of ``mesh`` with every triangle counter-clockwise.

    Clockwise triangles get their last two vertices swapped (the refinement
    edge index follows the swap).  A degenerate triangle raises ``ValueError``.
    """
    coords = mesh.coords
    tri = np.array(mesh.triangles)
    ref = np.array(mesh.refinement_edge)
    area = signed_areas(coords, tri)
    scale = np.abs(coords).max() if coords.size else 1.0
    scale = max(scale, 1.0)
    degenerate = np.abs(area) <= 1e-14 * scale**2
    if degenerate.any():
        t = int(np.flatnonzero(degenerate)[0])
        raise ValueError(f"triangle {t} is degenerate (collinear vertices {tri[t].tolist()})")
    flip = area < 0
    if not flip.any():
        return mesh
    tri[flip, 1], tri[flip, 2] = tri[flip, 2].copy(), tri[flip, 1].copy()
    swap = np.array([0, 2, 1])
    ref[flip] = swap[ref[flip]]
    return Mesh(coords, tri, ref)


def build_topology(mesh):
    """Derive the edge tables of a conforming counter-clockwise mesh."""
    tri = mesh.triangles
    nt = len(tri)
    if nt == 0:
        raise ValueError("mesh has no triangles")
    if (signed_areas(mesh.coords, tri) <= 0).any():
        bad = int(np.flatnonzero(signed_areas(mesh.coords, tri) <= 0)[0])
        raise ValueError(f"triangle {bad} is not counter-clockwise; call fix_local_enumeration")
    # local edge j runs from vertex j+1 to vertex j+2
    a = tri[:, [1, 2, 0]]
    b = tri[:, [2, 0, 1]]
    lo = np.minimum(a, b).ravel()
    hi = np.maximum(a, b).ravel()
    pairs = np.stack([lo, hi], axis=1)
    edge_vertices, inverse, counts = np.unique(
        pairs, axis=0, return_inverse=True, return_counts=True
    )
    inverse = inverse.ravel()
    if (counts > 2).any():
        e = int(np.flatnonzero(counts > 2)[0])
        raise ValueError(f"edge {edge_vertices[e].tolist()} is shared by more than two triangles")
    ne = len(edge_vertices)
    s4e = inverse.reshape(nt, 3)

    # occurrences are visited in increasing triangle index: the first one is T+
    owner = np.repeat(np.arange(nt), 3)
    local = np.tile(np.arange(3), nt)
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    e4s = np.full((ne, 2), -1, dtype=np.int64)
    pos = np.full((ne, 2), -1, dtype=np.int64)
    e4s[sorted_edges[first], 0] = owner[order[first]]
    pos[sorted_edges[first], 0] = local[order[first]]
    second = ~first
    e4s[sorted_edges[second], 1] = owner[order[second]]
    pos[sorted_edges[second], 1] = local[order[second]]
    interior = e4s[:, 1] >= 0

    # the two sides of an interior edge must traverse it in opposite directions
    if interior.any():
        ie = np.flatnonzero(interior)
        tp, q = e4s[ie, 0], pos[ie, 0]
        tm, r = e4s[ie, 1], pos[ie, 1]
        start_p = tri[tp, (q + 1) % 3]
        start_m = tri[tm, (r + 1) % 3]
        same = start_p == start_m
        if same.any():
            e = int(ie[np.flatnonzero(same)[0]])
            raise ValueError(f"triangles adjacent to edge {e} have inconsistent orientation")

    return EdgeTopology(
        edge_vertices=_readonly(edge_vertices),
        edges_of_triangle=_readonly(s4e),
        triangles_of_edge=_readonly(e4s),
        is_interior=_readonly(interior),
        local_pos=_readonly(pos),
    )


def compute_geometry(mesh, topo):
    """Areas, edge lengths, unit normals (outward of T+) and edge midpoints."""
    coords = mesh.coords
    tri = mesh.triangles
    area = signed_areas(coords, tri)
    tp = topo.triangles_of_edge[:, 0]
    q = topo.local_pos[:, 0]
    start = coords[tri[tp, (q + 1) % 3]]
    end = coords[tri[tp, (q + 2) % 3]]
    tangent = end - start
    length = np.hypot(tangent[:, 0], tangent[:, 1])
    # clockwise rotation of the counter-clockwise tangent points out of T+
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / length[:, None]
    ev = topo.edge_vertices
    midpoint = 0.5 * (coords[ev[:, 0]] + coords[ev[:, 1]])
    return Geometry(
        area=_readonly(area),
        length=_readonly(length),
        normal=_readonly(normal),
        midpoint=_readonly(midpoint),
    )


def refine_nvb(mesh, marked, topo=None, bisect_all_edges=True):
    """Newest-vertex bisection of the marked triangles plus conforming closure.

    With ``bisect_all_edges`` (default) all three edges of every marked
    triangle are bisected, so each marked triangle is replaced by four
    children; otherwise only its refinement edge is marked and a lone
    marked triangle yields two children.  A bisected triangle is split at the midpoint of its
    refinement edge; the midpoint becomes the newest vertex of both children,
    whose refinement edges are the edges opposite to it.  Triangles with
    further marked edges are split again (up to four children).
    """
    marked = np.unique(np.asarray(sorted(marked), dtype=np.int64))
    if marked.size == 0:
        return mesh
    nt = mesh.n_triangles
    if marked[0] < 0 or marked[-1] >= nt:
        raise ValueError("marked triangle index out of range")
    if topo is None:
        topo = build_topology(mesh)
    tri = mesh.triangles
    ref = mesh.refinement_edge
    s4e = topo.edges_of_triangle
    rows = np.arange(nt)
    ref_edge = s4e[rows, ref]

    edge_marked = np.zeros(topo.n_edges, dtype=bool)
    if bisect_all_edges:
        edge_marked[s4e[marked].ravel()] = True
    else:
        edge_marked[ref_edge[marked]] = True
    while True:
        need = edge_marked[s4e].any(axis=1) & ~edge_marked[ref_edge]
        if not need.any():
            break
        edge_marked[ref_edge[need]] = True

    nv = mesh.n_vertices
    new_edges = np.flatnonzero(edge_marked)
    mid_vertex = np.full(topo.n_edges, -1, dtype=np.int64)
    mid_vertex[new_edges] = nv + np.arange(len(new_edges))
    ev = topo.edge_vertices[new_edges]
    coords = np.vstack([mesh.coords, 0.5 * (mesh.coords[ev[:, 0]] + mesh.coords[ev[:, 1]])])

    # rotate every triangle to (C, A, B) with refinement edge AB opposite apex C
    C = tri[rows, ref]
    A = tri[rows, (ref + 1) % 3]
    B = tri[rows, (ref + 2) % 3]
    e_ab = ref_edge
    e_ca = s4e[rows, (ref + 2) % 3]
    e_bc = s4e[rows, (ref + 1) % 3]

    split = edge_marked[e_ab]
    split_ca = split & edge_marked[e_ca]
    split_bc = split & edge_marked[e_bc]

    m = mid_vertex[e_ab]
    m_ca = mid_vertex[e_ca]
    m_bc = mid_vertex[e_bc]

    pieces = []  # (parent index, rank within parent, triangle, refinement edge)

    keep = np.flatnonzero(~split)
    pieces.append((keep, np.zeros(len(keep), dtype=np.int64), tri[keep], ref[keep]))

    # left child (C, A, m), refinement edge CA
    idx = np.flatnonzero(split & ~split_ca)
    pieces.append((idx, np.zeros(len(idx), dtype=np.int64),
                   np.stack([C[idx], A[idx], m[idx]], axis=1), np.full(len(idx), 2)))
    idx = np.flatnonzero(split_ca)
    pieces.append((idx, np.zeros(len(idx), dtype=np.int64),
                   np.stack([m[idx], C[idx], m_ca[idx]], axis=1), np.full(len(idx), 2)))
    pieces.append((idx, np.ones(len(idx), dtype=np.int64),
                   np.stack([m[idx], m_ca[idx], A[idx]], axis=1), np.full(len(idx), 1)))

    # right child (C, m, B), refinement edge BC
    idx = np.flatnonzero(split & ~split_bc)
    pieces.append((idx, np.full(len(idx), 2, dtype=np.int64),
                   np.stack([C[idx], m[idx], B[idx]], axis=1), np.full(len(idx), 1)))
    idx = np.flatnonzero(split_bc)
    pieces.append((idx, np.full(len(idx), 2, dtype=np.int64),
                   np.stack([m[idx], B[idx], m_bc[idx]], axis=1), np.full(len(idx), 2)))
    pieces.append((idx, np.full(len(idx), 3, dtype=np.int64),
                   np.stack([m[idx], m_bc[idx], C[idx]], axis=1), np.full(len(idx), 1)))

    parent = np.concatenate([p[0] for p in pieces])
    rank = np.concatenate([p[1] for p in pieces])
    new_tri = np.concatenate([p[2].reshape(-1, 3) for p in pieces]).astype(np.int64)
    new_ref = np.concatenate([p[3] for p in pieces]).astype(np.int64)
    order = np.lexsort((rank, parent))
    return Mesh(coords, new_tri[order], new_ref[order])


def refine_uniform(mesh, rounds=1):
    """Mark every triangle ``rounds`` times (each round quadruples the count)."""
    for _ in range(rounds):
        mesh = refine_nvb(mesh, range(mesh.n_triangles))
    return mesh


def min_angle(mesh):
    """Smallest interior angle (radians) over all triangles."""
    c = mesh.coords[mesh.triangles]
    angles = []
    for j in range(3):
        u = c[:, (j + 1) % 3] - c[:, j]
        v = c[:, (j + 2) % 3] - c[:, j]
        cos = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
    return float(np.min(angles))


def write_mesh(mesh, path):
    """Write the plain-text mesh format ("nv nt", coordinates, connectivity)."""
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.coords]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path):
    """Read the plain-text mesh format written by :func:`write_mesh`."""
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing header 'nv nt'")
    try:
        nv, nt = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed header") from exc
    expected = 2 + 2 * nv + 3 * nt
    if len(tokens) != expected:
        raise ValueError(f"{path}: expected {expected} tokens, found {len(tokens)}")
    coords = np.array(tokens[2:2 + 2 * nv], dtype=float).reshape(nv, 2)
    triangles = np.array(tokens[2 + 2 * nv:], dtype=np.int64).reshape(nt, 3)
    return Mesh(coords, triangles)
