#!/usr/bin/env python3
"""VQLS fidelity against qubit count on principal subsystems of the coarse benchmark."""
import argparse
from pathlib import Path

from qamr import fem
from qamr.mesh import make_lshape_mesh
from qamr.vqls import LAYOUTS, fidelity_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", type=Path, default=Path("out/fidelity"))
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--sizes", type=int, nargs="+", default=[2, 3, 4, 5])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    mesh = make_lshape_mesh(1)
    system = fem.assemble_benchmark(mesh, fem.build_dofmap(mesh))
    table = fidelity_experiment(system.A, system.F, args.sizes, LAYOUTS, args.trials, args.seed)
    table.write_csv(args.out / "fidelity.csv")
    table.write_summary_csv(args.out / "fidelity_summary.csv")
    print(f"{'n':>2}  {'layout':11s}  {'fidelity':>8}  {'95% CI':>8}")
    for s in table.summary():
        print(f"{s.n:>2}  {s.layout:11s}  {s.mean:8.4f}  {s.half_width:8.4f}")


if __name__ == "__main__":
    main()
