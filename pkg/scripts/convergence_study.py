#!/usr/bin/env python3
"""Adaptive against uniform refinement: error, estimator and slopes side by side."""
import argparse
import csv
from pathlib import Path

from qamr.config import AmrConfig
from qamr.driver import run_amr, run_uniform


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", type=Path, default=Path("out/convergence_study"))
    p.add_argument("--theta", type=float, default=0.6)
    p.add_argument("--adaptive-iterations", type=int, default=10)
    p.add_argument("--uniform-iterations", type=int, default=5)
    p.add_argument("--estimator", default="classical", help="classical, forms, quantum-exact or quantum-sampled")
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    cfg = AmrConfig(theta=args.theta, iterations=args.adaptive_iterations, estimator=args.estimator)
    runs = {
        "adaptive": run_amr(cfg, out_dir=args.out / "adaptive"),
        "uniform": run_uniform(AmrConfig(iterations=args.uniform_iterations), out_dir=args.out / "uniform"),
    }
    with open(args.out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["refinement", "iter", "Ndof", "eta", "hcurlError", "effectivity", "cornerFraction"])
        for name, rep in runs.items():
            for r in rep.records:
                w.writerow([name, r.iteration, r.ndof, r.eta, r.hcurl_error, r.eta / r.hcurl_error, r.corner_fraction])
    for name, rep in runs.items():
        print(f"{name:9s} slope {rep.slope():+.3f}  final N={rep.records[-1].ndof}  err={rep.records[-1].hcurl_error:.3e}")
    print(f"wrote {args.out / 'comparison.csv'}")


if __name__ == "__main__":
    main()
