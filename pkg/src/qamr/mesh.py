"""Conforming triangular meshes of the L-shaped domain and newest-vertex bisection.

Triangles are stored counterclockwise with the newest vertex first, so the
refinement edge of triangle ``t`` is always its local edge 0, i.e. the edge
``(t[1], t[2])``. Local edge ``i`` is the edge opposite local vertex ``i``,
traversed from ``t[(i+1) % 3]`` to ``t[(i+2) % 3]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ON_BOUNDARY_TOL = 1e-12


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), CCW, newest vertex first
    generation: np.ndarray  # (nt,)
    parent: np.ndarray  # (nt,), -1 on the initial mesh
    # derived connectivity, filled in __post_init__
    edges: np.ndarray = field(init=False)  # (ne, 2), low index first
    tri_edges: np.ndarray = field(init=False)  # (nt, 3)
    tri_signs: np.ndarray = field(init=False)  # (nt, 3), +1 if local direction is low -> high
    edge_tris: np.ndarray = field(init=False)  # (ne, 2), -1 where absent
    boundary: np.ndarray = field(init=False)  # (ne,) bool

    def __post_init__(self):
        t = self.triangles
        loc = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)  # (nt, 3, 2)
        flat = np.sort(loc.reshape(-1, 2), axis=1)
        edges, inv = np.unique(flat, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        tri_edges = inv.reshape(-1, 3)
        signs = np.where(loc[:, :, 0] < loc[:, :, 1], 1, -1)
        edge_tris = -np.ones((len(edges), 2), dtype=int)
        count = np.zeros(len(edges), dtype=int)
        for k, e in enumerate(inv):
            edge_tris[e, count[e]] = k // 3
            count[e] += 1
        if count.max(initial=0) > 2:
            raise MeshError("edge shared by more than two triangles")
        for name, value in (
            ("edges", edges),
            ("tri_edges", tri_edges),
            ("tri_signs", signs),
            ("edge_tris", edge_tris),
            ("boundary", count == 1),
        ):
            object.__setattr__(self, name, value)
            value.flags.writeable = False
        for arr in (self.vertices, self.triangles, self.generation, self.parent):
            arr.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def diameters(self) -> np.ndarray:
        return self.edge_lengths()[self.tri_edges].max(axis=1)

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
        return float(np.min(angles))

    def dump(self, path: str | Path) -> None:
        """Write the plain-text mesh dump (``nv nt ne`` header, then vertices, triangles, edges)."""
        lines = [f"{self.n_vertices} {self.n_triangles} {self.n_edges}"]
        lines += [f"{x:.17g} {y:.17g}" for x, y in self.vertices]
        lines += [f"{a} {b} {c}" for a, b, c in self.triangles]
        lines += [f"{a} {b} {int(f)}" for (a, b), f in zip(self.edges, self.boundary)]
        Path(path).write_text("\n".join(lines) + "\n")


def _orient_longest_first(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Cyclically rotate each CCW triangle so the vertex opposite its longest edge comes first."""
    p = vertices[triangles]
    lengths = np.stack(
        [np.linalg.norm(p[:, (i + 2) % 3] - p[:, (i + 1) % 3], axis=1) for i in range(3)], axis=1
    )
    first = np.argmax(lengths, axis=1)
    idx = (first[:, None] + np.arange(3)[None, :]) % 3
    return np.take_along_axis(triangles, idx, axis=1)


def _ccw(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    out = triangles.copy()
    out[area < 0] = out[area < 0][:, [0, 2, 1]]
    return out


def _coarse_lshape() -> tuple[np.ndarray, np.ndarray]:
    # Each unit square is fanned from its centre; the two interior square
    # interfaces and the two reentrant edges are split at their midpoints.
    verts = [
        (-1, -1), (0, -1), (0, 0), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0),  # 0-7 corners
        (0.5, 0), (0, -0.5),  # 8-9 midpoints of the reentrant edges
        (0, 0.5), (-0.5, 0),  # 10-11 midpoints of the square interfaces
        (-0.5, 0.5), (0.5, 0.5), (-0.5, -0.5),  # 12-14 square centres
    ]
    squares = {
        13: [2, 8, 3, 4, 5, 10],  # [0,1]x[0,1]
        12: [7, 11, 2, 10, 5, 6],  # [-1,0]x[0,1]
        14: [0, 1, 9, 2, 11, 7],  # [-1,0]x[-1,0]
    }
    tris = []
    for centre, ring in squares.items():
        for a, b in zip(ring, ring[1:] + ring[:1]):
            tris.append((centre, a, b))
    return np.array(verts, dtype=float), np.array(tris, dtype=int)


def _red_refine(vertices: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    loc = np.stack([triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1)
    edges, inv = np.unique(np.sort(loc.reshape(-1, 2), axis=1), axis=0, return_inverse=True)
    mids = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    m = len(vertices) + inv.reshape(-1, 3)  # m[:, i] = midpoint of the edge opposite vertex i
    a, b, c = triangles.T
    ma, mb, mc = m.T
    children = np.concatenate(
        [
            np.stack([a, mc, mb], axis=1),
            np.stack([mc, b, ma], axis=1),
            np.stack([mb, ma, c], axis=1),
            np.stack([ma, mb, mc], axis=1),
        ]
    )
    return np.vstack([vertices, mids]), children


def make_lshape_mesh(resolution: int = 1) -> Mesh:
    """Conforming mesh of ``[-1,1]^2 \\ [0,1]x[-1,0]``.

    ``resolution=1`` is an 18-triangle mesh with 32 edges, 22 of them
    interior; each additional level applies one uniform red refinement.
    """
    if resolution < 1:
        raise MeshError("resolution must be >= 1")
    v, t = _coarse_lshape()
    t = _ccw(v, t)
    for _ in range(resolution - 1):
        v, t = _red_refine(v, t)
    t = _orient_longest_first(v, t)
    nt = len(t)
    return Mesh(v, t, np.zeros(nt, dtype=int), -np.ones(nt, dtype=int))


def refine(mesh: Mesh, marked, mode: str = "edges") -> Mesh:
    """Newest-vertex bisection of the marked triangles plus conformity closure.

    ``mode="edges"`` marks all three edges of every marked triangle (each is
    split into four children); ``mode="newest"`` marks only the refinement
    edge (one bisection). Returns a new mesh; the ``parent`` array of the
    result indexes triangles of ``mesh``.
    """
    if mode not in ("edges", "newest"):
        raise MeshError(f"unknown refinement mode {mode!r}")
    marked = np.unique(np.asarray(list(marked) if not isinstance(marked, np.ndarray) else marked, dtype=int))
    if marked.size == 0:
        raise MeshError("nothing to refine: marked set is empty")
    if marked.min() < 0 or marked.max() >= mesh.n_triangles:
        raise MeshError("marked element id out of range")
    edge_marked = np.zeros(mesh.n_edges, dtype=bool)
    if mode == "edges":
        edge_marked[mesh.tri_edges[marked].ravel()] = True
    else:
        edge_marked[mesh.tri_edges[marked, 0]] = True
    return _bisect(mesh, edge_marked)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Bisect every edge once: each triangle is split into four children."""
    return _bisect(mesh, np.ones(mesh.n_edges, dtype=bool))


def closure(mesh: Mesh, edge_marked: np.ndarray) -> tuple[np.ndarray, int]:
    """Mark refinement edges until every triangle with a marked edge has its refinement edge marked."""
    edge_marked = edge_marked.copy()
    passes = 0
    while True:
        passes += 1
        need = edge_marked[mesh.tri_edges].any(axis=1) & ~edge_marked[mesh.tri_edges[:, 0]]
        if not need.any():
            return edge_marked, passes
        edge_marked[mesh.tri_edges[need, 0]] = True
        if passes > mesh.n_triangles:
            raise MeshError("bisection closure did not terminate")


def _bisect(mesh: Mesh, edge_marked: np.ndarray) -> Mesh:
    edge_marked, _ = closure(mesh, edge_marked)
    new_ids = -np.ones(mesh.n_edges, dtype=int)
    new_ids[edge_marked] = mesh.n_vertices + np.arange(edge_marked.sum())
    e = mesh.edges[edge_marked]
    vertices = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])])

    edge_index = {tuple(ed): k for k, ed in enumerate(mesh.edges.tolist())}

    def midpoint(a, b):
        k = edge_index.get((a, b) if a < b else (b, a))
        return -1 if k is None else new_ids[k]

    tris, gens, parents = [], [], []

    def bisect(tri, gen, parent):
        v0, v1, v2 = tri
        m = midpoint(v1, v2)
        if m < 0:
            tris.append(tri)
            gens.append(gen)
            parents.append(parent)
            return
        bisect((m, v0, v1), gen + 1, parent)
        bisect((m, v2, v0), gen + 1, parent)

    for k, tri in enumerate(mesh.triangles.tolist()):
        bisect(tuple(tri), int(mesh.generation[k]), k)

    return Mesh(vertices, np.array(tris, dtype=int), np.array(gens, dtype=int), np.array(parents, dtype=int))


def element_geometry(mesh: Mesh, k: int):
    """Return ``(h_K, area, h_f, normals)`` for triangle ``k``.

    ``h_f[i]`` and ``normals[i]`` refer to local edge ``i``; normals point
    out of the triangle.
    """
    if not 0 <= k < mesh.n_triangles:
        raise MeshError(f"invalid element id {k}")
    p = mesh.vertices[mesh.triangles[k]]
    d = np.array([p[(i + 2) % 3] - p[(i + 1) % 3] for i in range(3)])
    h_f = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / h_f[:, None]
    return float(h_f.max()), float(mesh.areas()[k]), h_f, normals


def outward_normals(mesh: Mesh) -> np.ndarray:
    """(nt, 3, 2) outward unit normals per local edge."""
    p = mesh.vertices[mesh.triangles]
    d = np.stack([p[:, (i + 2) % 3] - p[:, (i + 1) % 3] for i in range(3)], axis=1)
    n = np.stack([d[..., 1], -d[..., 0]], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def on_lshape_boundary(points: np.ndarray, tol: float = ON_BOUNDARY_TOL) -> np.ndarray:
    x, y = np.asarray(points, dtype=float).T
    outer = (np.abs(np.abs(x) - 1) < tol) | (np.abs(np.abs(y) - 1) < tol)
    slit_x = (np.abs(y) < tol) & (x >= -tol)
    slit_y = (np.abs(x) < tol) & (y <= tol)
    return outer | slit_x | slit_y


def check_conformity(mesh: Mesh) -> list[str]:
    """Exhaustive scan; returns a list of violations (empty when the mesh is valid)."""
    problems = []
    if np.any(mesh.areas() <= 0):
        problems.append("non-positive triangle area")
    counts = (mesh.edge_tris >= 0).sum(axis=1)
    if np.any(counts == 0) or np.any(counts > 2):
        problems.append("edge with invalid incidence count")
    bnd = mesh.edges[mesh.boundary]
    mids = 0.5 * (mesh.vertices[bnd[:, 0]] + mesh.vertices[bnd[:, 1]])
    ends = mesh.vertices[bnd.ravel()]
    if not (on_lshape_boundary(mids).all() and on_lshape_boundary(ends).all()):
        problems.append("boundary edge off the domain boundary")
    # hanging nodes in the interior already show up as unmatched edges above;
    # the direct geometric scan is quadratic, so only run it on small meshes
    if mesh.n_vertices <= 3000 and _has_hanging_node(mesh):
        problems.append("hanging node")
    total = mesh.areas().sum()
    if abs(total - 3.0) > 1e-12:
        problems.append(f"total area {total} != 3")
    return problems


def _has_hanging_node(mesh: Mesh) -> bool:
    v = mesh.vertices
    a, b = v[mesh.edges[:, 0]], v[mesh.edges[:, 1]]
    lo, hi = np.minimum(a, b) - 1e-12, np.maximum(a, b) + 1e-12
    for k in range(mesh.n_vertices):
        p = v[k]
        box = np.all((p >= lo) & (p <= hi), axis=1)
        box &= (mesh.edges[:, 0] != k) & (mesh.edges[:, 1] != k)
        if box.any():
            d = b[box] - a[box]
            w = p - a[box]
            cross = np.abs(d[:, 0] * w[:, 1] - d[:, 1] * w[:, 0])
            if np.any(cross < 1e-12 * np.linalg.norm(d, axis=1)):
                return True
    return False
