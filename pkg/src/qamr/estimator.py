"""Residual a posteriori error estimator for the 2D cavity problem.

Two independent evaluation routes:

* :func:`estimate_classical` integrates the residuals and jumps directly.
* :func:`estimate_from_forms` evaluates the same quantities as quadratic
  forms of the DOF vector with the local matrices of
  :func:`build_local_matrices`.

Both work on the *full* DOF vector (free DOFs followed by the lifted
boundary DOFs), because the field on boundary elements depends on the
prescribed tangential trace.

Jump conventions: for an interior edge ``f`` shared by ``K1, K2`` with
outward normals ``n1 = -n2``::

    [[v]]_T = v|K1 x n1 + v|K2 x n2      (v = scalar 2D curl, v x n = v (-n_y, n_x))
    [[v]]_N = v|K1 . n1 + v|K2 . n2
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fem
from .fem import DofMap, Field
from .mesh import Mesh, outward_normals
from .quadrature import Quadrature, default_quadrature


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LocalEstimator:
    eta1sq: np.ndarray
    eta2sq: np.ndarray
    eta3sq: np.ndarray
    eta4sq: np.ndarray

    @property
    def eta_k_sq(self) -> np.ndarray:
        return self.eta1sq + self.eta2sq + self.eta3sq + self.eta4sq

    @property
    def eta_k(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.eta_k_sq, 0.0))

    @property
    def eta(self) -> float:
        # sampled readouts can push the sum below zero
        return float(np.sqrt(max(self.eta_k_sq.sum(), 0.0)))

    def __len__(self) -> int:
        return len(self.eta1sq)

    def write_csv(self, path: str | Path, hcurl_local: np.ndarray | None = None) -> None:
        rows = ["elementId,eta1sq,eta2sq,eta3sq,eta4sq,etaK,hcurlErrK"]
        for k in range(len(self)):
            err = "" if hcurl_local is None else f"{hcurl_local[k]:.17g}"
            rows.append(
                f"{k},{self.eta1sq[k]:.17g},{self.eta2sq[k]:.17g},{self.eta3sq[k]:.17g},"
                f"{self.eta4sq[k]:.17g},{self.eta_k[k]:.17g},{err}"
            )
        Path(path).write_text("\n".join(rows) + "\n")


# ----------------------------------------------------------------------------
# interior faces
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Faces:
    edges: np.ndarray  # (nf,) mesh edge ids of the interior edges
    tris: np.ndarray  # (nf, 2) K1, K2
    local: np.ndarray  # (nf, 2) local edge index of f in K1 and K2
    length: np.ndarray  # (nf,)
    normals: np.ndarray  # (nf, 2, 2) outward normal of K1 and of K2


def interior_faces(mesh: Mesh) -> Faces:
    interior = np.flatnonzero(~mesh.boundary)
    tris = mesh.edge_tris[interior]
    local = np.empty_like(tris)
    for side in range(2):
        local[:, side] = np.argmax(mesh.tri_edges[tris[:, side]] == interior[:, None], axis=1)
    nrm = outward_normals(mesh)
    normals = np.stack([nrm[tris[:, 0], local[:, 0]], nrm[tris[:, 1], local[:, 1]]], axis=1)
    return Faces(interior, tris, local, mesh.edge_lengths()[interior], normals)


def _edge_bary(mesh: Mesh, tri: np.ndarray, local: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Barycentric coordinates (nf, q, 3) of the points at global parameter ``s``
    (low -> high vertex) on local edge ``local`` of triangle ``tri``."""
    nf, q = len(tri), len(s)
    bary = np.zeros((nf, q, 3))
    sign = mesh.tri_signs[tri, local]  # +1: local direction a -> b is low -> high
    a = (local + 1) % 3
    b = (local + 2) % 3
    sa = np.where(sign[:, None] > 0, 1.0 - s[None, :], s[None, :])
    rows = np.arange(nf)[:, None]
    cols = np.arange(q)[None, :]
    bary[rows, cols, a[:, None]] = sa
    bary[rows, cols, b[:, None]] = 1.0 - sa
    return bary


def _face_side_basis(mesh: Mesh, faces: Faces, side: int, quad: Quadrature):
    """Signed basis values (nf, q, 3, 2) and curls (nf, 3) of one side's element on the face."""
    tri = faces.tris[:, side]
    bary = _edge_bary(mesh, tri, faces.local[:, side], quad.edge.points)
    grads, _ = fem.barycentric_gradients(mesh, tri)
    sg = mesh.tri_signs[tri]
    phi = fem.whitney_basis(bary, grads) * sg[:, None, :, None]
    curl = fem.whitney_curl(grads) * sg
    return phi, curl


def _curl_cross_n(curl: np.ndarray, n: np.ndarray) -> np.ndarray:
    """``c x n`` for scalar curls c (..., ) and normals n (..., 2) broadcastable."""
    return np.stack([-curl * n[..., 1], curl * n[..., 0]], axis=-1)


# ----------------------------------------------------------------------------
# classical route
# ----------------------------------------------------------------------------


def project_source(mesh: Mesh, source: Field, quad: Quadrature | None = None) -> np.ndarray:
    """Elementwise L2 projection of ``source`` onto the local Whitney space.

    Returns (nt, 3) coefficients with respect to the signed (global) basis.
    """
    quad = quad or default_quadrature()
    _, mass, _ = fem.local_matrices(mesh, quad)
    rhs = fem.load_vector_local(mesh, source, quad)
    return np.linalg.solve(mass.astype(complex), rhs[..., None])[..., 0]


def _whitney_source(mesh: Mesh, coeffs: np.ndarray):
    """Source evaluator for a piecewise Whitney field given per-element coefficients."""

    def values(els, bary):
        grads, _ = fem.barycentric_gradients(mesh, els)
        phi = fem.whitney_basis(bary, grads) * mesh.tri_signs[els][:, None, :, None]
        return np.einsum("ei,eqik->eqk", coeffs[els], phi)

    return values


def estimate_classical(
    mesh: Mesh,
    dofmap: DofMap,
    e_full: np.ndarray,
    source: Field | None,
    quad: Quadrature | None = None,
    k: complex = 1.0,
    eps_r: complex = 1.0,
    mu_r: complex = 1.0,
    source_coeffs: np.ndarray | None = None,
) -> LocalEstimator:
    """Evaluate the four estimator contributions by quadrature.

    ``source_coeffs`` (nt, 3) replaces ``source`` by the piecewise Whitney
    field with these coefficients (e.g. from :func:`project_source`).
    """
    quad = quad or default_quadrature()
    e_full = np.asarray(e_full, dtype=complex)
    if e_full.shape != (dofmap.n_total,):
        raise EstimatorError("DOF vector length does not match the DOF map")
    nt = mesh.n_triangles
    h = mesh.diameters()
    area = mesh.areas()
    k2e = k**2 * eps_r
    eta1 = np.zeros(nt)
    eta2 = np.zeros(nt)
    proj = _whitney_source(mesh, source_coeffs) if source_coeffs is not None else None

    for els, bary, w in fem.element_rules(mesh, quad):
        grads, _ = fem.barycentric_gradients(mesh, els)
        coef = e_full[dofmap.element_dofs[els]] * mesh.tri_signs[els]
        phi = fem.whitney_basis(bary, grads)
        eh = np.einsum("ei,eqik->eqk", coef, phi)
        cc = np.einsum("ei,eqik->eqk", coef, fem.whitney_curlcurl(grads, len(w))) / mu_r
        if proj is not None:
            f = proj(els, bary)
        elif source is not None:
            f = np.asarray(source(fem.map_points(mesh, bary, els)))
        else:
            f = np.zeros_like(eh)
        r = f - cc + k2e * eh
        eta1[els] = h[els] ** 2 * area[els] * np.einsum("q,eqk->e", w, np.abs(r) ** 2)
        div = k2e * np.einsum("ei,ei->e", coef, fem.whitney_div(grads))  # constant per element
        eta2[els] = h[els] ** 2 * area[els] * np.abs(div) ** 2

    eta3, eta4 = _jump_terms(mesh, dofmap, e_full, quad, k, eps_r, mu_r)
    return LocalEstimator(eta1, eta2, eta3, eta4)


def face_jumps(
    mesh: Mesh,
    dofmap: DofMap,
    e_full: np.ndarray,
    quad: Quadrature | None = None,
    k: complex = 1.0,
    eps_r: complex = 1.0,
    mu_r: complex = 1.0,
) -> tuple[Faces, np.ndarray, np.ndarray]:
    """Per interior face: ``h_f ||[[curl E_h / mu_r]]_T||^2`` and ``h_f k^2 ||[[eps_r E_h]]_N||^2``."""
    quad = quad or default_quadrature()
    faces = interior_faces(mesh)
    e_full = np.asarray(e_full, dtype=complex)
    w = quad.edge.weights
    tang = np.zeros((len(faces.edges), 2), dtype=complex)
    norm = np.zeros((len(faces.edges), len(w)), dtype=complex)
    for side in range(2):
        phi, curl = _face_side_basis(mesh, faces, side, quad)
        coef = e_full[dofmap.element_dofs[faces.tris[:, side]]]
        n = faces.normals[:, side]
        tang += _curl_cross_n(np.einsum("fi,fi->f", coef, curl) / mu_r, n)
        norm += eps_r * np.einsum("fi,fqik,fk->fq", coef, phi, n)
    # the tangential jump of the (elementwise constant) curl is constant along f
    j3 = faces.length * faces.length * np.sum(np.abs(tang) ** 2, axis=1)
    j4 = faces.length * np.abs(k) ** 2 * faces.length * np.einsum("q,fq->f", w, np.abs(norm) ** 2)
    return faces, j3, j4


def _jump_terms(mesh, dofmap, e_full, quad, k, eps_r, mu_r):
    faces, j3, j4 = face_jumps(mesh, dofmap, e_full, quad, k, eps_r, mu_r)
    eta3 = np.zeros(mesh.n_triangles)
    eta4 = np.zeros(mesh.n_triangles)
    for side in range(2):
        np.add.at(eta3, faces.tris[:, side], 0.5 * j3)
        np.add.at(eta4, faces.tris[:, side], 0.5 * j4)
    return eta3, eta4


# ----------------------------------------------------------------------------
# quadratic-form route
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LocalMatrices:
    """Dense local blocks of the estimator matrices with their DOF index maps.

    Element blocks (nt, 3, 3) act on ``elem_dofs``; face blocks (nf, 5, 5)
    act on ``face_dofs``, the union of the DOFs of both neighbours. ``11`` /
    ``22`` / ``12`` suffixes denote (K1, K1), (K2, K2) and (K1, K2)
    restrictions. Weights ``h_K^2`` and ``h_f`` are included.
    """

    elem_dofs: np.ndarray
    M: np.ndarray
    S: np.ndarray
    C: np.ndarray
    D: np.ndarray
    faces: Faces
    face_dofs: np.ndarray
    C11: np.ndarray
    C22: np.ndarray
    C12: np.ndarray
    M11: np.ndarray
    M22: np.ndarray
    M12: np.ndarray

    @property
    def n_elements(self) -> int:
        return len(self.elem_dofs)

    def element_faces(self, k: int) -> list[tuple[int, int]]:
        """(face index, side of ``k``) for each interior face of element ``k``."""
        out = []
        for f in np.flatnonzero((self.faces.tris == k).any(axis=1)):
            out.append((int(f), int(np.flatnonzero(self.faces.tris[f] == k)[0])))
        return out


def build_local_matrices(mesh: Mesh, dofmap: DofMap, quad: Quadrature | None = None) -> LocalMatrices:
    """Assemble all local estimator matrices (eps_r k^2 = 1, mu_r = 1)."""
    quad = quad or default_quadrature()
    nt = mesh.n_triangles
    h2 = mesh.diameters() ** 2
    area = mesh.areas()
    grads, _ = fem.barycentric_gradients(mesh)
    sg = mesh.tri_signs
    w = quad.triangle.weights
    phi = fem.whitney_basis(quad.triangle.points, grads) * sg[:, None, :, None]
    cc = fem.whitney_curlcurl(grads, len(w)) * sg[:, None, :, None]
    div = fem.whitney_div(grads) * sg
    scale = (h2 * area)[:, None, None]
    M = scale * np.einsum("q,eqik,eqjk->eij", w, phi, phi)
    S = scale * np.einsum("q,eqik,eqjk->eij", w, phi, cc)
    C = scale * np.einsum("q,eqik,eqjk->eij", w, cc, cc)
    D = scale * div[:, :, None] * div[:, None, :]

    faces = interior_faces(mesh)
    nf = len(faces.edges)
    we = quad.edge.weights
    side_dofs = [dofmap.element_dofs[faces.tris[:, s]] for s in range(2)]
    face_dofs = np.zeros((nf, 5), dtype=int)
    pos = np.zeros((2, nf, 3), dtype=int)  # position of each side's DOFs in face_dofs
    for f in range(nf):
        u = np.unique(np.concatenate([side_dofs[0][f], side_dofs[1][f]]))
        if len(u) != 5:
            raise EstimatorError("neighbouring elements must share exactly one edge")
        face_dofs[f] = u
        for s in range(2):
            pos[s, f] = np.searchsorted(u, side_dofs[s][f])

    tang, nrm = [], []
    for s in range(2):
        phi_s, curl_s = _face_side_basis(mesh, faces, s, quad)
        n = faces.normals[:, s]
        tang.append(_curl_cross_n(curl_s, n[:, None, :]))  # (nf, 3, 2)
        nrm.append(np.einsum("fqik,fk->fqi", phi_s, n))  # (nf, q, 3)
    hf = faces.length
    blocks = {}
    for a in range(2):
        for b in range(2):
            # constant integrand for the curl family: h_f * |f| * (t_a . t_b)
            c_loc = (hf * hf)[:, None, None] * np.einsum("fik,fjk->fij", tang[a], tang[b])
            m_loc = (hf * hf)[:, None, None] * np.einsum("q,fqi,fqj->fij", we, nrm[a], nrm[b])
            for name, loc in (("C", c_loc), ("M", m_loc)):
                full = np.zeros((nf, 5, 5))
                rows = pos[a][:, :, None]
                cols = pos[b][:, None, :]
                full[np.arange(nf)[:, None, None], rows, cols] = loc
                blocks[f"{name}{a + 1}{b + 1}"] = full
    return LocalMatrices(
        dofmap.element_dofs.copy(), M, S, C, D, faces, face_dofs,
        blocks["C11"], blocks["C22"], blocks["C12"], blocks["M11"], blocks["M22"], blocks["M12"],
    )


def _qf(x: np.ndarray, A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Batched ``x^H A y``."""
    return np.einsum("ei,eij,ej->e", x.conj(), A, y)


def estimate_from_forms(
    e_full: np.ndarray, f_coeffs: np.ndarray, lm: LocalMatrices, jump_sign: float = 1.0
) -> LocalEstimator:
    """Evaluate the estimator as quadratic forms in the DOF vector.

    ``f_coeffs`` (nt, 3) are the per-element source coefficients. The
    ``jump_sign`` argument exists only to let the self-test inject a fault.
    """
    e = np.asarray(e_full, dtype=complex)
    f = np.asarray(f_coeffs, dtype=complex)
    if f.shape != (lm.n_elements, 3):
        raise EstimatorError("source coefficients must have shape (n_elements, 3)")
    if e.ndim != 1 or (lm.elem_dofs.size and e.size <= lm.elem_dofs.max()):
        raise EstimatorError("DOF vector does not cover the index maps")
    eK = e[lm.elem_dofs]
    eta1 = (
        _qf(f, lm.M, f)
        + _qf(eK, lm.C, eK)
        + _qf(eK, lm.M, eK)
        - 2 * _qf(f, lm.S, eK).real
        + 2 * _qf(f, lm.M, eK).real
        - 2 * _qf(eK, lm.S, eK).real
    ).real
    eta2 = _qf(eK, lm.D, eK).real
    eF = e[lm.face_dofs]
    j3 = (_qf(eF, lm.C11, eF) + _qf(eF, lm.C22, eF) + jump_sign * 2 * _qf(eF, lm.C12, eF).real).real
    j4 = (_qf(eF, lm.M11, eF) + _qf(eF, lm.M22, eF) + jump_sign * 2 * _qf(eF, lm.M12, eF).real).real
    eta3 = np.zeros(lm.n_elements)
    eta4 = np.zeros(lm.n_elements)
    for side in range(2):
        np.add.at(eta3, lm.faces.tris[:, side], 0.5 * j3)
        np.add.at(eta4, lm.faces.tris[:, side], 0.5 * j4)
    return LocalEstimator(eta1, eta2, eta3, eta4)


def mark(estimator: LocalEstimator | np.ndarray, theta: float) -> np.ndarray:
    """Maximum strategy: ``{K : eta_K >= theta * max eta_K'}``."""
    if not 0.0 <= theta <= 1.0:
        raise EstimatorError("theta must lie in [0, 1]")
    eta_k = estimator.eta_k if isinstance(estimator, LocalEstimator) else np.asarray(estimator, dtype=float)
    if eta_k.size == 0:
        raise EstimatorError("no elements to mark")
    return np.flatnonzero(eta_k >= theta * eta_k.max())
