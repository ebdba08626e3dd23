"""Acceptance criteria 1-8, each recorded as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""
import sys
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE, Benchmark

from qamr.cli import main
from qamr.config import AmrConfig, SelftestConfig
from qamr.driver import run_amr, run_uniform
from qamr.estimator import estimate_from_forms, mark
from qamr.mesh import make_lshape_mesh, refine
from qamr.quantum.blockencoding import block_encode, embed
from qamr.quantum.local_estimator import quantum_local_estimator, quantum_estimate
from qamr.selftest import run_selftest
from qamr.vqls import fidelity_experiment

pytestmark = pytest.mark.slow

CORNER_RADIUS = 0.25


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def amr_meshes(quad):
    """Coarse mesh and two classical AMR iterations (theta = 0.6)."""
    out = [Benchmark(make_lshape_mesh(1), quad)]
    for _ in range(2):
        b = out[-1]
        marked = mark(estimate_from_forms(b.e_full, b.f_coeffs, b.lm), 0.6)
        out.append(Benchmark(refine(b.mesh, marked), quad))
    return out


@pytest.fixture(scope="module")
def adaptive():
    return run_amr(AmrConfig(theta=0.6, iterations=10))


@pytest.fixture(scope="module")
def uniform():
    return run_uniform(AmrConfig(iterations=5))


def test_1_quantum_classical_agreement(amr_meshes):
    t = time.perf_counter()
    worst, ndofs = 0.0, []
    for b in amr_meshes:
        ref = estimate_from_forms(b.e_full, b.f_coeffs, b.lm).eta_k_sq
        q = quantum_estimate(b.lm, b.e_full, b.f_coeffs, mode="exact").estimator.eta_k_sq
        worst = max(worst, float(np.max(np.abs(q - ref) / (1 + ref))))
        ndofs.append(b.dofmap.n_free)
    dt = time.perf_counter() - t
    record(1, worst <= 1e-9 and dt < 600, f"max |dEta^2|/(1+eta^2) = {worst:.2e} on N = {ndofs}, {dt:.1f} s")


def test_2_block_encoding_reconstruction(amr_meshes):
    worst, count = 0.0, 0
    for b in amr_meshes:
        lm = b.lm
        for family in (lm.M, lm.S, lm.C, lm.D, lm.C11, lm.C22, lm.C12, lm.M11, lm.M22, lm.M12):
            for B in family:
                if np.any(B):
                    worst = max(worst, block_encode(embed(B)).reconstruction_error())
                    count += 1
    rng = np.random.default_rng(2024)
    for i in range(50):
        n = 1 + i % 3
        worst = max(worst, block_encode(rng.normal(size=(2**n, 2**n))).reconstruction_error())
    record(2, worst <= 1e-10, f"max entry error {worst:.2e} over {count} local + 50 random matrices")


def test_3_convergence_separation(adaptive, uniform):
    su, sa = uniform.slope(), adaptive.slope()
    ok = sa <= su - 0.1 and -0.45 <= su <= -0.20 and -0.65 <= sa <= -0.35
    record(3, ok, f"slope uniform {su:.3f}, adaptive {sa:.3f}")


def test_4_effectivity(adaptive):
    eff = adaptive.column("eta")[1:] / adaptive.column("hcurl_error")[1:]
    ratio = eff.max() / eff.min()
    record(4, ratio <= 3, f"effectivity max/min {ratio:.3f} over iterations 2-10")


def test_5_corner_concentration(adaptive):
    first, last = adaptive.records[0], adaptive.records[-1]
    f0, f10 = first.corner_fraction, last.corner_fraction
    # the coarse mesh has no centroid within 0.25 of the origin, so the literal ratio is unbounded;
    # also compare against the area share of the corner sector
    area_share = (3 * np.pi / 4 * CORNER_RADIUS**2) / 3.0
    ok = f10 >= 5 * f0 and f10 >= 5 * area_share
    record(
        5,
        ok,
        f"corner fraction {f0:.3f} -> {f10:.3f} (x{f10 / area_share:.1f} the area share {area_share:.3f})",
    )


def test_6_sampling_noise(coarse):
    e, f = coarse.e_full.real, coarse.f_coeffs.real.ravel()
    ne, nf = np.linalg.norm(e), np.linalg.norm(f)
    k, label = 0, "F.M.E"

    def term_values(shots):
        vals = []
        for s in range(20):
            r = quantum_local_estimator(k, coarse.lm, e / ne, f / nf, ne, nf, "shots", shots, seed=s)
            vals.append(next(t.value for t in r.terms if t.term.label == label))
        return np.array(vals)

    s3, s5 = term_values(10**3).std(ddof=1), term_values(10**5).std(ddof=1)
    ratio = s3 / s5
    record(6, 5 <= ratio <= 20, f"element {k} term {label}: std {s3:.3e} -> {s5:.3e}, ratio {ratio:.2f}")


def test_7_vqls_fidelity(coarse):
    t = time.perf_counter()
    table = fidelity_experiment(coarse.system.A, coarse.system.F, trials=5, seed=0)
    dt = time.perf_counter() - t
    means = {(s.n, s.layout): s.mean for s in table.summary()}
    layouts = ("circular", "alternating")
    ok = (
        max(means[(2, lay)] for lay in layouts) >= 0.9
        and all(means[(5, lay)] < means[(2, lay)] for lay in layouts)
        and dt < 1800
    )
    detail = ", ".join(f"n={n} {lay[:4]} {m:.3f}" for (n, lay), m in sorted(means.items()))
    record(7, ok, f"{detail}; {dt:.0f} s")


def test_8_selftest(tmp_path):
    checks = run_selftest(SelftestConfig(quick=False))
    passed = sum(c.ok for c in checks)
    exit_code = main(["selftest", "--out", str(tmp_path)])
    record(8, exit_code == 0, f"{passed}/{len(checks)} invariants hold, CLI exit {exit_code}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
