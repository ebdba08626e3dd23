"""Command-line entry point: ``qamr {amr,uniform,fidelity,selftest}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import driver, fem, vqls
from .estimator import build_local_matrices, project_source
from .mesh import make_lshape_mesh
from .quantum.blockencoding import block_encode, embed
from .quantum.hadamard import hadamard_test_cross_circuit, hadamard_test_diag_circuit
from .quantum.qasm import write_qasm
from .quantum.stateprep import prepare_state
from .selftest import run_selftest

log = logging.getLogger("qamr")

EXIT_OK, EXIT_ERROR, EXIT_SELFTEST = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qamr", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value configuration file")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    common.add_argument("--seed", type=int, help="shorthand for --set seed=N")
    common.add_argument("--dump-mesh", action="store_true", help="write each mesh into the output directory")
    common.add_argument(
        "--dump-circuits", metavar="DIR", help="write OpenQASM for the coarse-mesh circuits into DIR under --out"
    )
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("amr", parents=[common], help="adaptive refinement run")
    sub.add_parser("uniform", parents=[common], help="uniform refinement baseline")
    sub.add_parser("fidelity", parents=[common], help="VQLS fidelity against qubit count")
    sub.add_parser("selftest", parents=[common], help="structural invariant suite")
    return p


def _inside(out: Path, name: str) -> Path:
    """Resolve ``name`` under ``out`` and refuse anything that escapes it."""
    target = (out / name).resolve()
    if not target.is_relative_to(out.resolve()):
        raise cfgmod.ConfigError(f"{name!r} resolves outside the output directory")
    return target


def _resolve(args, default):
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return cfgmod.load(default, args.config, overrides)


def dump_circuits(directory: Path) -> list[Path]:
    """OpenQASM for the coarse-mesh state preparation and one element's Hadamard tests."""
    directory.mkdir(parents=True, exist_ok=True)
    mesh = make_lshape_mesh(1)
    d = fem.build_dofmap(mesh)
    s = fem.assemble_benchmark(mesh, d)
    e = s.full_vector(fem.solve_classical(s)).real
    f = project_source(mesh, fem.benchmark_source).real
    lm = build_local_matrices(mesh, d)
    written = []
    prep = prepare_state(e)
    write_qasm(directory / "prepare_E.qasm", prep)
    written.append(directory / "prepare_E.qasm")
    k = 0
    be = block_encode(embed(lm.M[k]))
    e_loc, f_loc = e[lm.elem_dofs[k]], f[k]
    circuits = {
        "hadamard_EME_element0.qasm": hadamard_test_diag_circuit(be, prepare_state(e_loc, be.n)),
        "hadamard_FME_element0.qasm": hadamard_test_cross_circuit(
            be, prepare_state(f_loc, be.n), prepare_state(e_loc, be.n)
        ),
    }
    for name, c in circuits.items():
        write_qasm(directory / name, c, measure=(0,))
        written.append(directory / name)
    return written


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        out: Path = args.out
        out.mkdir(parents=True, exist_ok=True)
        circuits_dir = _inside(out, args.dump_circuits) if args.dump_circuits else None
        if args.command in ("amr", "uniform"):
            cfg = _resolve(args, cfgmod.AmrConfig())
            (out / "config.txt").write_text(cfgmod.dump(cfg))
            run = driver.run_amr if args.command == "amr" else driver.run_uniform
            report = run(cfg, out_dir=out, dump_mesh=args.dump_mesh)
            for r in report.records:
                extra = f" etaQ={r.eta_quantum:.6e}" if r.eta_quantum is not None else ""
                print(f"iter {r.iteration:2d}  N={r.ndof:6d}  eta={r.eta:.6e}  err={r.hcurl_error:.6e}{extra}")
            if len(report.records) > 1:
                print(f"slope of log(err) against log(N): {report.slope():.4f}")
        elif args.command == "fidelity":
            cfg = _resolve(args, cfgmod.FidelityConfig())
            (out / "config.txt").write_text(cfgmod.dump(cfg))
            mesh = make_lshape_mesh(cfg.resolution)
            d = fem.build_dofmap(mesh)
            s = fem.assemble_benchmark(mesh, d)
            table = vqls.fidelity_experiment(s.A, s.F, cfg.sizes, cfg.layouts, cfg.trials, cfg.seed)
            table.write_csv(out / "fidelity.csv")
            table.write_summary_csv(out / "fidelity_summary.csv")
            for sm in table.summary():
                print(f"n={sm.n} {sm.layout:11s} mean fidelity {sm.mean:.4f} +/- {sm.half_width:.4f}")
            for msg in table.skipped:
                print(f"warning: {msg}", file=sys.stderr)
        else:
            cfg = _resolve(args, cfgmod.SelftestConfig())
            checks = run_selftest(cfg)
            for c in checks:
                print(f"{'PASS' if c.ok else 'FAIL'}  {c.name}: {c.detail}")
            failed = [c for c in checks if not c.ok]
            print(f"{len(checks) - len(failed)}/{len(checks)} invariants hold")
            if failed:
                return EXIT_SELFTEST
        if circuits_dir is not None:
            dump_circuits(circuits_dir)
        return EXIT_OK
    except Exception as exc:  # report any module error as a diagnostic, not a traceback
        if args.verbose:
            log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
