from __future__ import annotations

import numpy as np
import pytest

from qamr import fem
from qamr.estimator import build_local_matrices, project_source
from qamr.mesh import make_lshape_mesh, refine
from qamr.quadrature import default_quadrature

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


class Benchmark:
    """Solved benchmark problem on one mesh."""

    def __init__(self, mesh, quad):
        self.mesh = mesh
        self.quad = quad
        self.dofmap = fem.build_dofmap(mesh)
        self.system = fem.assemble_benchmark(mesh, self.dofmap, quad)
        self.e_free = fem.solve_classical(self.system)
        self.e_full = self.system.full_vector(self.e_free)
        self.f_coeffs = project_source(mesh, fem.benchmark_source, quad)
        self.lm = build_local_matrices(mesh, self.dofmap, quad)


@pytest.fixture(scope="session")
def quad():
    return default_quadrature()


@pytest.fixture(scope="session")
def coarse(quad):
    return Benchmark(make_lshape_mesh(1), quad)


@pytest.fixture(scope="session")
def refined(quad):
    """A mesh after two rounds of random local refinement."""
    rng = np.random.default_rng(7)
    m = make_lshape_mesh(1)
    for _ in range(2):
        m = refine(m, rng.choice(m.n_triangles, size=5, replace=False))
    return Benchmark(m, quad)
