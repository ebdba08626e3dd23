import csv
import os

import pytest

from qamr import config as cfgmod
from qamr.cli import EXIT_ERROR, EXIT_OK, EXIT_SELFTEST, main


def test_parse_pairs_and_overrides(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\ntheta = 0.5\n\niterations=3  # trailing\n")
    cfg = cfgmod.load(cfgmod.AmrConfig(), f, ["iterations=4", "estimator=forms"])
    assert cfg.theta == 0.5 and cfg.iterations == 4 and cfg.estimator == "forms"
    again = cfgmod.load(cfgmod.AmrConfig(), None, cfgmod.dump(cfg).splitlines())
    assert again == cfg


def test_config_errors(tmp_path):
    with pytest.raises(cfgmod.ConfigError, match="unknown key"):
        cfgmod.load(cfgmod.AmrConfig(), None, ["thetta=0.5"])
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.load(cfgmod.AmrConfig(), None, ["theta=2"])
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.load(cfgmod.AmrConfig(), None, ["iterations=many"])
    with pytest.raises(cfgmod.ConfigError, match="key=value"):
        cfgmod.parse_pairs(["theta"])
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.load(cfgmod.FidelityConfig(), None, ["sizes=2,7"])
    assert cfgmod.load(cfgmod.FidelityConfig(), None, ["sizes=2,3"]).sizes == (2, 3)
    assert cfgmod.load(cfgmod.SelftestConfig(), None, ["quick=yes"]).quick is True


def _tree(root):
    return sorted(os.path.relpath(os.path.join(d, f), root) for d, _, fs in os.walk(root) for f in fs)


def test_amr_cli(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["amr", "--out", str(out), "--set", "iterations=3", "--seed", "2", "--dump-circuits", "qasm"])
    assert code == EXIT_OK
    assert "slope" in capsys.readouterr().out
    with open(out / "convergence.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["iter", "Ndof", "eta", "hcurlError", "markedCount"]
    assert [r["iter"] for r in rows] == ["1", "2", "3"]
    assert "seed=2" in (out / "config.txt").read_text()
    assert {"qasm/prepare_E.qasm", "qasm/hadamard_EME_element0.qasm", "qasm/hadamard_FME_element0.qasm"} <= set(
        _tree(out)
    )
    # nothing leaks outside the output directory
    assert _tree(tmp_path) == ["out/" + p for p in _tree(out)]


def test_quantum_column(tmp_path):
    out = tmp_path / "q"
    assert main(["amr", "--out", str(out), "--set", "iterations=2", "--set", "estimator=quantum-exact"]) == EXIT_OK
    head = (out / "convergence.csv").read_text().splitlines()[0]
    assert head.endswith(",etaQuantum")


def test_uniform_cli(tmp_path):
    assert main(["uniform", "--out", str(tmp_path), "--set", "iterations=2"]) == EXIT_OK
    assert len((tmp_path / "convergence.csv").read_text().splitlines()) == 3


def test_cli_errors(tmp_path, capsys):
    assert main(["amr", "--out", str(tmp_path), "--set", "bogus=1"]) == EXIT_ERROR
    assert "unknown key" in capsys.readouterr().err
    assert main(["amr", "--out", str(tmp_path / "o"), "--dump-circuits", "../../escape"]) == EXIT_ERROR
    assert not (tmp_path / "escape").exists() and not (tmp_path.parent / "escape").exists()
    # a VQLS run beyond the qubit budget is refused with a diagnostic
    assert main(["amr", "--out", str(tmp_path / "v"), "--set", "solver=vqls", "--set", "iterations=3"]) == EXIT_ERROR
    assert "VQLS refused" in capsys.readouterr().err


def test_selftest_cli(tmp_path, capsys):
    assert main(["selftest", "--out", str(tmp_path), "--set", "quick=true"]) == EXIT_OK
    assert "invariants hold" in capsys.readouterr().out
    code = main(["selftest", "--out", str(tmp_path), "--set", "quick=true", "--set", "inject_fault=jump_sign"])
    assert code == EXIT_SELFTEST
    assert "FAIL  quadrature vs quadratic-form" in capsys.readouterr().out


def test_fidelity_cli(tmp_path):
    args = ["fidelity", "--out", str(tmp_path), "--set", "trials=1", "--set", "sizes=2,3"]
    assert main(args) == EXIT_OK
    first = (tmp_path / "fidelity.csv").read_text()
    lines = first.splitlines()
    assert lines[0] == "n,layout,layers,maxIters,trial,finalCost,fidelity"
    assert len(lines) == 1 + 2 * 2
    assert main(args) == EXIT_OK
    assert (tmp_path / "fidelity.csv").read_text() == first
    assert (tmp_path / "fidelity_summary.csv").exists()
