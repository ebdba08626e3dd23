"""Structural invariants checked by ``qamr selftest``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fem
from .config import SelftestConfig
from .estimator import (
    build_local_matrices,
    estimate_classical,
    estimate_from_forms,
    face_jumps,
    mark,
    project_source,
)
from .mesh import Mesh, check_conformity, make_lshape_mesh, refine
from .quadrature import default_quadrature
from .quantum.blockencoding import block_encode, embed
from .quantum.hadamard import hadamard_test_cross, hadamard_test_diag
from .quantum.stateprep import prepare_state


@dataclass
class Check:
    name: str
    ok: bool
    detail: str

    def __post_init__(self):
        self.ok = bool(self.ok)


def _meshes(quick: bool, seed: int) -> list[Mesh]:
    """The coarse mesh followed by a few adaptively refined ones."""
    rng = np.random.default_rng(seed)
    out = [make_lshape_mesh(1)]
    for _ in range(2 if quick else 5):
        m = out[-1]
        marked = rng.choice(m.n_triangles, size=max(1, m.n_triangles // 5), replace=False)
        out.append(refine(m, marked))
    return out


def check_conformity_all(meshes, **_) -> Check:
    problems = [p for m in meshes for p in check_conformity(m)]
    return Check("conformity", not problems, "; ".join(problems[:3]) or f"{len(meshes)} meshes conforming")


def check_basis_duality(meshes, quad, **_) -> Check:
    """Tangential moments of the local basis on the three edges form the identity."""
    worst = 0.0
    s, w = quad.edge.points, quad.edge.weights
    for m in meshes:
        grads, _ = fem.barycentric_gradients(m)
        p = m.vertices[m.triangles]
        for j in range(3):
            a, b = (j + 1) % 3, (j + 2) % 3
            bary = np.zeros((len(s), 3))
            bary[:, a], bary[:, b] = 1.0 - s, s
            phi = fem.whitney_basis(bary, grads)  # (nt, q, 3, 2)
            tangent = p[:, b] - p[:, a]
            mom = np.einsum("q,eqik,ek->ei", w, phi, tangent)
            worst = max(worst, float(np.abs(mom - np.eye(3)[j]).max()))
    return Check("basis duality", worst < 1e-12, f"max deviation {worst:.2e}")


def check_divergence(meshes, rng, n_points: int = 20, **_) -> Check:
    """Central differences of the basis functions at random interior points."""
    worst = 0.0
    h = 1e-6
    m = meshes[-1]
    for k in rng.choice(m.n_triangles, size=min(n_points, m.n_triangles), replace=False):
        verts = m.vertices[m.triangles[k]]
        lam = rng.dirichlet(np.ones(3))
        x = lam @ verts
        for i in range(3):
            dx = fem.whitney_value(verts, i, x + [h, 0]) - fem.whitney_value(verts, i, x - [h, 0])
            dy = fem.whitney_value(verts, i, x + [0, h]) - fem.whitney_value(verts, i, x - [0, h])
            scale = np.linalg.norm(fem.whitney_value(verts, i, x)) + 1.0
            worst = max(worst, abs(dx[0] + dy[1]) / (2 * h) / scale)
    analytic = max(float(np.abs(fem.whitney_div(fem.barycentric_gradients(mm)[0])).max()) for mm in meshes)
    ok = worst < 1e-6 and analytic == 0.0
    return Check("div(Whitney) = 0", ok, f"finite-difference {worst:.2e}, analytic {analytic:.1e}")


def check_vanishing_blocks(systems, **_) -> Check:
    worst = max(max(np.abs(B).max() for B in (lm.S, lm.C, lm.D)) for *_x, lm in systems)
    return Check("S = C = D = 0 at lowest order", worst == 0.0, f"max entry {worst:.1e}")


def check_face_splitting(systems, quad, **_) -> Check:
    worst = 0.0
    for m, d, e, f, lm in systems:
        _faces, j3, j4 = face_jumps(m, d, e, quad)
        est = estimate_from_forms(e, f, lm)
        worst = max(
            worst,
            abs(est.eta3sq.sum() - j3.sum()) / (1 + j3.sum()),
            abs(est.eta4sq.sum() - j4.sum()) / (1 + j4.sum()),
        )
    return Check("jump half-splitting face sums", worst < 1e-10, f"max relative mismatch {worst:.2e}")


def check_path_equivalence(systems, quad, jump_sign: float = 1.0, **_) -> Check:
    worst = 0.0
    for m, d, e, f, lm in systems:
        forms = estimate_from_forms(e, f, lm, jump_sign=jump_sign)
        classical = estimate_classical(m, d, e, None, quad, source_coeffs=f)
        for name in ("eta1sq", "eta2sq", "eta3sq", "eta4sq", "eta_k_sq"):
            a, b = getattr(forms, name), getattr(classical, name)
            worst = max(worst, float(np.max(np.abs(a - b) / (1 + b))))
    return Check("quadrature vs quadratic-form estimator", worst <= 1e-10, f"max deviation {worst:.2e}")


def check_hadamard(rng, cases: int = 100, **_) -> Check:
    worst = 0.0
    for i in range(cases):
        n = 1 + i % 3
        M = rng.normal(size=(2**n, 2**n))
        be = block_encode(M)
        psi, phi = rng.normal(size=2**n), rng.normal(size=2**n)
        u, v = psi / np.linalg.norm(psi), phi / np.linalg.norm(phi)
        Up, Uf = prepare_state(psi, n), prepare_state(phi, n)
        d = hadamard_test_diag(be, Up) - 0.5 * (1 + u @ M @ u / be.alpha)
        c = hadamard_test_cross(be, Uf, Up) - 0.5 * (1 + v @ M @ u / be.alpha)
        worst = max(worst, abs(d), abs(c))
    return Check("Hadamard-test identity", worst < 1e-10, f"{cases} random cases, max deviation {worst:.2e}")


def check_block_encoding(systems, rng, cases: int = 50, **_) -> Check:
    worst = 0.0
    for i in range(cases):
        n = 1 + i % 3
        worst = max(worst, block_encode(rng.normal(size=(2**n, 2**n))).reconstruction_error())
    *_x, lm = systems[0]
    for B in list(lm.M) + list(lm.C11) + list(lm.C12) + list(lm.M12):
        if np.any(B):
            worst = max(worst, block_encode(embed(B)).reconstruction_error())
    return Check("block-encoding reconstruction", worst <= 1e-10, f"max entry error {worst:.2e}")


CHECKS: list[Callable[..., Check]] = [
    check_conformity_all,
    check_basis_duality,
    check_divergence,
    check_vanishing_blocks,
    check_face_splitting,
    check_path_equivalence,
    check_hadamard,
    check_block_encoding,
]


def run_selftest(cfg: SelftestConfig) -> list[Check]:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    quad = default_quadrature()
    meshes = _meshes(cfg.quick, cfg.seed)
    systems = []
    for m in meshes[: 2 if cfg.quick else 4]:
        d = fem.build_dofmap(m)
        s = fem.assemble_benchmark(m, d, quad)
        e = s.full_vector(fem.solve_classical(s))
        systems.append((m, d, e, project_source(m, fem.benchmark_source, quad), build_local_matrices(m, d, quad)))
    jump_sign = -1.0 if cfg.inject_fault == "jump_sign" else 1.0
    cases = 30 if cfg.quick else 100
    kw = dict(meshes=meshes, systems=systems, quad=quad, rng=rng, jump_sign=jump_sign)
    out = []
    for check in CHECKS:
        if check is check_hadamard:
            out.append(check(rng=rng, cases=cases))
        else:
            out.append(check(**kw))
    # marking smoke check: the maximum strategy always selects the worst element
    est = estimate_from_forms(systems[0][2], systems[0][3], systems[0][4])
    out.append(Check("maximum marking", int(np.argmax(est.eta_k)) in mark(est, 1.0), "argmax marked at theta=1"))
    return out
