"""Lowest-order Nedelec (Whitney) edge elements for the 2D cavity problem.

Local basis function ``i`` of a triangle is attached to local edge ``i``
(opposite vertex ``i``) and is ``lam_a grad(lam_b) - lam_b grad(lam_a)`` with
``a, b = (i+1) % 3, (i+2) % 3``. The global basis function of an edge is the
local one times the orientation sign ``mesh.tri_signs``, so its tangential
integral along the edge in the low -> high direction equals 1.

The 2D curl of a field ``(u, v)`` is the scalar ``dv/dx - du/dy``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.io as sio
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh
from .quadrature import Quadrature, corner_rule, default_quadrature

Field = Callable[[np.ndarray], np.ndarray]  # (..., 2) points -> (..., 2) values

CORNER_TOL = 1e-12


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


# ----------------------------------------------------------------------------
# element kinematics
# ----------------------------------------------------------------------------


def barycentric_gradients(mesh: Mesh, elements=None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(grads, area)`` with ``grads`` of shape (ne, 3, 2)."""
    tri = mesh.triangles if elements is None else mesh.triangles[elements]
    p = mesh.vertices[tri]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    grads = np.empty(p.shape)
    for i in range(3):
        v = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        grads[:, i, 0] = -v[:, 1]
        grads[:, i, 1] = v[:, 0]
    grads /= (2.0 * area)[:, None, None]
    return grads, area


def _pairs():
    return [((i + 1) % 3, (i + 2) % 3) for i in range(3)]


def whitney_basis(bary: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Local basis values.

    bary: (q, 3) shared points or (ne, q, 3) per-element points.
    grads: (ne, 3, 2).
    Returns (ne, q, 3, 2).
    """
    if bary.ndim == 2:
        bary = np.broadcast_to(bary, (grads.shape[0],) + bary.shape)
    out = np.empty(bary.shape[:2] + (3, 2))
    for i, (a, b) in enumerate(_pairs()):
        out[:, :, i, :] = (
            bary[:, :, a, None] * grads[:, None, b, :] - bary[:, :, b, None] * grads[:, None, a, :]
        )
    return out


def whitney_curl(grads: np.ndarray) -> np.ndarray:
    """(ne, 3) constant curls, ``2 * grad(lam_a) x grad(lam_b)``."""
    out = np.empty(grads.shape[:2])
    for i, (a, b) in enumerate(_pairs()):
        out[:, i] = 2.0 * (grads[:, a, 0] * grads[:, b, 1] - grads[:, a, 1] * grads[:, b, 0])
    return out


def whitney_div(grads: np.ndarray) -> np.ndarray:
    """(ne, 3) divergences, ``grad(lam_a).grad(lam_b) - grad(lam_b).grad(lam_a)``."""
    out = np.empty(grads.shape[:2])
    for i, (a, b) in enumerate(_pairs()):
        out[:, i] = np.einsum("ek,ek->e", grads[:, a], grads[:, b]) - np.einsum(
            "ek,ek->e", grads[:, b], grads[:, a]
        )
    return out


def whitney_curlcurl(grads: np.ndarray, npoints: int) -> np.ndarray:
    """(ne, q, 3, 2) vector curl of the scalar curl; the scalar curl is constant per element."""
    curl = whitney_curl(grads)
    # rot(c) = (dc/dy, -dc/dx) with c constant on each element
    return np.zeros(curl.shape[:1] + (npoints,) + curl.shape[1:] + (2,))


def whitney_value(vertices: np.ndarray, local_edge: int, point: np.ndarray) -> np.ndarray:
    """Value of the local Whitney function of ``local_edge`` at ``point``.

    ``vertices`` is the (3, 2) array of a single CCW triangle.
    """
    p = np.asarray(vertices, dtype=float)
    d1, d2 = p[1] - p[0], p[2] - p[0]
    area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
    if abs(area) < 1e-14:
        raise ValueError("degenerate triangle")
    T = np.column_stack([d1, d2])
    st = np.linalg.solve(T, np.asarray(point, dtype=float) - p[0])
    bary = np.array([1.0 - st.sum(), st[0], st[1]])
    grads = np.empty((3, 2))
    for i in range(3):
        v = p[(i + 2) % 3] - p[(i + 1) % 3]
        grads[i] = np.array([-v[1], v[0]]) / (2.0 * area)
    a, b = (local_edge + 1) % 3, (local_edge + 2) % 3
    return bary[a] * grads[b] - bary[b] * grads[a]


def map_points(mesh: Mesh, bary: np.ndarray, elements=None) -> np.ndarray:
    """Physical coordinates of barycentric points: (ne, q, 2)."""
    tri = mesh.triangles if elements is None else mesh.triangles[elements]
    p = mesh.vertices[tri]
    if bary.ndim == 2:
        return np.einsum("qi,eik->eqk", bary, p)
    return np.einsum("eqi,eik->eqk", bary, p)


# ----------------------------------------------------------------------------
# quadrature helpers with corner grading
# ----------------------------------------------------------------------------


def element_rules(mesh: Mesh, quad: Quadrature, corner_graded: bool = True):
    """Group elements by rule. Yields ``(elements, bary, weights)``.

    Elements with a vertex at the origin use a composite rule graded
    towards that vertex when ``corner_graded`` is set.
    """
    at_origin = np.linalg.norm(mesh.vertices[mesh.triangles], axis=2) < CORNER_TOL  # (nt, 3)
    plain = ~at_origin.any(axis=1) if corner_graded else np.ones(mesh.n_triangles, dtype=bool)
    groups = [(np.flatnonzero(plain), quad.triangle.points, quad.triangle.weights)]
    if corner_graded and quad.corner_levels > 0:
        for c in range(3):
            els = np.flatnonzero(at_origin[:, c])
            if els.size:
                pts, wts = corner_rule(quad.triangle, c, quad.corner_levels)
                groups.append((els, pts, wts))
    elif corner_graded:
        els = np.flatnonzero(~plain)
        groups.append((els, quad.triangle.points, quad.triangle.weights))
    return [g for g in groups if g[0].size]


def _safe_eval(field: Field, pts: np.ndarray) -> np.ndarray:
    return np.asarray(field(pts))


# ----------------------------------------------------------------------------
# DOF map and system
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DofMap:
    """Edge -> DOF numbering: interior (free) edges first, then boundary edges.

    ``edge_dof[e]`` indexes the full coefficient vector of length
    ``n_edges``; entries ``< n_free`` are unknowns of the linear system.
    """

    edge_dof: np.ndarray  # (ne,)
    free_edges: np.ndarray  # (N,)
    boundary_edges: np.ndarray  # (ne - N,)
    signs: np.ndarray  # (nt, 3)
    element_dofs: np.ndarray  # (nt, 3) full-vector indices

    @property
    def n_free(self) -> int:
        return len(self.free_edges)

    @property
    def n_total(self) -> int:
        return len(self.edge_dof)


def build_dofmap(mesh: Mesh) -> DofMap:
    free = np.flatnonzero(~mesh.boundary)
    bnd = np.flatnonzero(mesh.boundary)
    edge_dof = np.empty(mesh.n_edges, dtype=int)
    edge_dof[free] = np.arange(len(free))
    edge_dof[bnd] = len(free) + np.arange(len(bnd))
    return DofMap(edge_dof, free, bnd, mesh.tri_signs.copy(), edge_dof[mesh.tri_edges])


@dataclass(frozen=True, eq=False)
class FemSystem:
    A: sp.csr_matrix  # (N, N) complex
    F: np.ndarray  # (N,) complex, lifting already folded in
    lifting: np.ndarray  # (N,) the part of F coming from boundary data, -A_fb g
    boundary_values: np.ndarray  # (ne - N,) prescribed boundary DOFs g
    k: complex = 1.0
    eps_r: complex = 1.0
    mu_r: complex = 1.0

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def full_vector(self, e_free: np.ndarray) -> np.ndarray:
        """Concatenate free DOFs and the prescribed boundary DOFs."""
        return np.concatenate([np.asarray(e_free, dtype=complex), self.boundary_values.astype(complex)])


def local_matrices(mesh: Mesh, quad: Quadrature) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signed local curl-curl and mass matrices (nt, 3, 3) plus areas.

    Signs are folded in, so entries refer to the global basis functions.
    """
    grads, area = barycentric_gradients(mesh)
    curl = whitney_curl(grads) * mesh.tri_signs
    stiff = area[:, None, None] * curl[:, :, None] * curl[:, None, :]
    phi = whitney_basis(quad.triangle.points, grads) * mesh.tri_signs[:, None, :, None]
    mass = area[:, None, None] * np.einsum("q,eqik,eqjk->eij", quad.triangle.weights, phi, phi)
    return stiff, mass, area


def load_vector_local(mesh: Mesh, source: Field, quad: Quadrature) -> np.ndarray:
    """(nt, 3) element integrals of ``source . phi_i`` (signed basis)."""
    grads, area = barycentric_gradients(mesh)
    out = np.zeros((mesh.n_triangles, 3), dtype=complex)
    for els, bary, w in element_rules(mesh, quad):
        phi = whitney_basis(bary, grads[els]) * mesh.tri_signs[els][:, None, :, None]
        f = _safe_eval(source, map_points(mesh, bary, els))
        out[els] = area[els, None] * np.einsum("q,eqk,eqik->ei", w, f, phi)
    return out


def interpolate_edges(mesh: Mesh, field: Field, quad: Quadrature, edges=None) -> np.ndarray:
    """Edge DOFs ``int_e field . t ds`` with ``t`` the low -> high unit tangent."""
    edges = np.arange(mesh.n_edges) if edges is None else np.asarray(edges)
    a = mesh.vertices[mesh.edges[edges, 0]]
    b = mesh.vertices[mesh.edges[edges, 1]]
    s = quad.edge.points
    pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    vals = _safe_eval(field, pts)
    # |e| * t = (b - a), so int f.t ds = sum_w f.(b - a)
    return np.einsum("q,eqk,ek->e", quad.edge.weights, vals, b - a)


def interpolate_gradient(mesh: Mesh, potential: Callable[[np.ndarray], np.ndarray], edges=None) -> np.ndarray:
    """Exact edge DOFs of ``grad(potential)``: ``u(high) - u(low)``."""
    edges = np.arange(mesh.n_edges) if edges is None else np.asarray(edges)
    u = potential(mesh.vertices)
    return u[mesh.edges[edges, 1]] - u[mesh.edges[edges, 0]]


def interpolate_full(mesh: Mesh, dofmap: DofMap, edge_values: np.ndarray) -> np.ndarray:
    """Reorder per-edge values into the full DOF vector."""
    out = np.empty(dofmap.n_total, dtype=np.result_type(edge_values, float))
    out[dofmap.edge_dof] = edge_values
    return out


def assemble(
    mesh: Mesh,
    dofmap: DofMap,
    source: Field | None,
    quad: Quadrature | None = None,
    k: complex = 1.0,
    eps_r: complex = 1.0,
    mu_r: complex = 1.0,
    boundary_field: Field | None = None,
    boundary_values: np.ndarray | None = None,
) -> FemSystem:
    """Assemble ``A = S/mu_r - k^2 eps_r M`` and the load vector.

    Boundary edge DOFs are taken from ``boundary_values`` (ordered like
    ``dofmap.boundary_edges``) or by interpolating ``boundary_field``; zero
    when neither is given. They are eliminated and their contribution moves
    to the right-hand side.
    """
    quad = quad or default_quadrature()
    stiff, mass, _ = local_matrices(mesh, quad)
    local = stiff / mu_r - (k**2) * eps_r * mass
    dofs = dofmap.element_dofs
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    nt = dofmap.n_total
    full = sp.coo_matrix((local.ravel().astype(complex), (rows, cols)), shape=(nt, nt)).tocsr()
    N = dofmap.n_free
    A = full[:N, :N].tocsr()
    A_fb = full[:N, N:]

    b = np.zeros(nt, dtype=complex)
    if source is not None:
        np.add.at(b, dofs.ravel(), load_vector_local(mesh, source, quad).ravel())

    if boundary_values is not None:
        g = np.asarray(boundary_values, dtype=complex)
        if g.shape != (nt - N,):
            raise ValueError("boundary_values has the wrong length")
    elif boundary_field is not None and len(dofmap.boundary_edges):
        g = interpolate_edges(mesh, boundary_field, quad, dofmap.boundary_edges).astype(complex)
    else:
        g = np.zeros(nt - N, dtype=complex)
    lifting = -(A_fb @ g) if g.size else np.zeros(N, dtype=complex)
    return FemSystem(A, b[:N] + lifting, lifting, g, k, eps_r, mu_r)


def solve_classical(system: FemSystem, rtol: float = 1e-10) -> np.ndarray:
    """Sparse direct solve; raises :class:`SolverError` if the residual check fails."""
    if system.n == 0:
        return np.zeros(0, dtype=complex)
    normF = np.linalg.norm(system.F)
    if normF == 0.0:
        return np.zeros(system.n, dtype=complex)
    try:
        x = spla.splu(system.A.tocsc()).solve(system.F)
    except RuntimeError as err:  # exactly singular factor
        raise SolverError(str(err), float("inf")) from err
    res = np.linalg.norm(system.A @ x - system.F) / normF
    if not np.isfinite(res) or res > rtol:
        raise SolverError("direct solve did not reach tolerance", float(res))
    return x


# ----------------------------------------------------------------------------
# L-shape benchmark
# ----------------------------------------------------------------------------


def _polar(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x, y = points[..., 0], points[..., 1]
    r = np.hypot(x, y)
    phi = np.arctan2(y, x)
    phi = np.where(phi < 0, phi + 2.0 * np.pi, phi)
    return r, phi


def exact_potential(points: np.ndarray) -> np.ndarray:
    r, phi = _polar(np.asarray(points, dtype=float))
    return r ** (2.0 / 3.0) * np.sin(2.0 * phi / 3.0)


def exact_solution(points: np.ndarray) -> np.ndarray:
    """Gradient of ``r^(2/3) sin(2 phi / 3)``, with phi in [0, 3pi/2] over the L-shape."""
    pts = np.asarray(points, dtype=float)
    r, phi = _polar(pts)
    if np.any(r == 0.0):
        raise ValueError("exact solution is singular at the origin")
    c = (2.0 / 3.0) * r ** (-1.0 / 3.0)
    return np.stack([-c * np.sin(phi / 3.0), c * np.cos(phi / 3.0)], axis=-1)


def exact_curl(points: np.ndarray) -> np.ndarray:
    return np.zeros(np.shape(points)[:-1])


def benchmark_source(points: np.ndarray) -> np.ndarray:
    """Right-hand side for k = 1, eps_r = mu_r = 1: ``curl curl E - E = -E``."""
    return -exact_solution(points)


def assemble_benchmark(mesh: Mesh, dofmap: DofMap, quad: Quadrature | None = None) -> FemSystem:
    g = interpolate_gradient(mesh, exact_potential, dofmap.boundary_edges)
    return assemble(mesh, dofmap, benchmark_source, quad, 1.0, 1.0, 1.0, boundary_values=g)


# ----------------------------------------------------------------------------
# field evaluation and errors
# ----------------------------------------------------------------------------


def evaluate_field(mesh: Mesh, dofmap: DofMap, e_full: np.ndarray, bary: np.ndarray, elements=None):
    """Return ``(values (ne, q, 2), curls (ne,))`` of the discrete field."""
    els = np.arange(mesh.n_triangles) if elements is None else np.asarray(elements)
    grads, _ = barycentric_gradients(mesh, els)
    coef = np.asarray(e_full)[dofmap.element_dofs[els]] * mesh.tri_signs[els]
    phi = whitney_basis(bary, grads)
    vals = np.einsum("ei,eqik->eqk", coef, phi)
    curls = np.einsum("ei,ei->e", coef, whitney_curl(grads))
    return vals, curls


def hcurl_error(
    mesh: Mesh,
    dofmap: DofMap,
    e_full: np.ndarray,
    quad: Quadrature | None = None,
    exact: Field = exact_solution,
    exact_curl_fn: Callable[[np.ndarray], np.ndarray] = exact_curl,
) -> tuple[np.ndarray, float]:
    """Per-element and global ``||E - E_h||_H(curl)``."""
    quad = quad or default_quadrature()
    area = mesh.areas()
    err2 = np.zeros(mesh.n_triangles)
    for els, bary, w in element_rules(mesh, quad):
        vals, curls = evaluate_field(mesh, dofmap, e_full, bary, els)
        pts = map_points(mesh, bary, els)
        diff = exact(pts) - vals
        cdiff = exact_curl_fn(pts) - curls[:, None]
        err2[els] = area[els] * (
            np.einsum("q,eqk->e", w, np.abs(diff) ** 2) + np.einsum("q,eq->e", w, np.abs(cdiff) ** 2)
        )
    local = np.sqrt(err2)
    return local, float(np.sqrt(err2.sum()))


def write_dof_csv(path: str | Path, e: np.ndarray) -> None:
    lines = ["dofIndex,re,im"] + [f"{i},{v.real:.17g},{v.imag:.17g}" for i, v in enumerate(np.asarray(e, dtype=complex))]
    Path(path).write_text("\n".join(lines) + "\n")


def write_matrix_market(path: str | Path, A: sp.spmatrix) -> None:
    sio.mmwrite(str(path), sp.coo_matrix(A), comment="edge-element system matrix")
