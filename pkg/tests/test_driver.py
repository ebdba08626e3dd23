import dataclasses

import numpy as np
import pytest

from qamr.config import AmrConfig
from qamr.driver import DriverError, corner_fraction, run_amr, run_uniform, shots_for
from qamr.mesh import make_lshape_mesh


def test_shots_for_examples():
    assert shots_for(0.1, 1.0, 1.0) == 100
    assert shots_for(0.1, 2.0, 1.0) == 400
    assert shots_for(0.1, 1.0, 2.0) == 1600
    assert shots_for(0.05, 1.0, 1.0) == 400
    assert shots_for(0.1, 1.0, 1.0, c=2.5) == 250
    with pytest.raises(DriverError):
        shots_for(0.0, 1.0, 1.0)


def test_corner_fraction_bounds():
    m = make_lshape_mesh(1)
    assert corner_fraction(m) == 0.0
    assert corner_fraction(m, radius=10) == 1.0


def test_single_iteration():
    rep = run_amr(AmrConfig(iterations=1))
    assert len(rep.records) == 1
    r = rep.records[0]
    assert r.iteration == 1 and r.ndof == 22 and r.n_elements == 18
    # the forms path sees the projected source, the classical path the exact one
    assert 0 < r.forms_discrepancy <= 1e-2 * r.eta**2


def test_deterministic_and_growing():
    cfg = AmrConfig(iterations=4, seed=5)
    a, b = run_amr(cfg), run_amr(cfg)
    assert a.to_dict(timings=False) == b.to_dict(timings=False)
    n = a.column("ndof")
    assert np.all(np.diff(n) > 0)
    assert all(0 < r.marked_count <= r.n_elements for r in a.records)


def test_eta_target_stops_early():
    rep = run_amr(AmrConfig(iterations=10, eta_target=10.0))
    assert len(rep.records) == 1


def test_uniform_quadruples_elements():
    rep = run_uniform(AmrConfig(iterations=3))
    ne = rep.column("n_elements")
    assert list(ne) == [18, 72, 288]
    assert all(r.marked_count == r.n_elements for r in rep.records)


def test_quantum_exact_matches_forms():
    rep = run_amr(AmrConfig(iterations=2, estimator="quantum-exact"))
    for r in rep.records:
        assert r.quantum_max_diff <= 1e-9
        assert r.eta_quantum == pytest.approx(r.eta, rel=1e-10)
        assert r.alpha["max"] > 0 and r.alpha["tests"] > 0


def test_quantum_sampled_scaled_shots():
    cfg = AmrConfig(iterations=1, estimator="quantum-sampled", shots_policy="scaled", shots_epsilon=10.0)
    r = run_amr(cfg).records[0]
    from conftest import Benchmark
    from qamr.quadrature import default_quadrature
    from qamr.quantum.local_estimator import max_alpha

    b = Benchmark(make_lshape_mesh(1), default_quadrature())
    expect = np.ceil(max_alpha(b.lm) ** 2 * np.linalg.norm(b.e_full) ** 4 / 10.0**2)
    assert r.shots == expect
    assert np.isfinite(r.eta_quantum)


def test_vqls_refused_above_budget():
    cfg = AmrConfig(iterations=3, solver="vqls", vqls_max_qubits=5)
    with pytest.raises(DriverError, match="VQLS refused"):
        run_amr(dataclasses.replace(cfg, iterations=2, theta=0.0))


def test_outputs_written(tmp_path):
    run_amr(AmrConfig(iterations=2), out_dir=tmp_path, dump_mesh=True)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [
        "convergence.csv",
        "estimator_iter01.csv",
        "estimator_iter02.csv",
        "mesh_iter01.txt",
        "mesh_iter02.txt",
        "report.json",
    ]
    lines = (tmp_path / "convergence.csv").read_text().splitlines()
    assert lines[0] == "iter,Ndof,eta,hcurlError,markedCount" and len(lines) == 3
