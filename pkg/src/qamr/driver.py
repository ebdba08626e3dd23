"""Adaptive and uniform refinement loops on the L-shaped benchmark."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fem, vqls
from .config import AmrConfig
from .estimator import (
    LocalEstimator,
    build_local_matrices,
    estimate_classical,
    estimate_from_forms,
    mark,
    project_source,
)
from .mesh import Mesh, make_lshape_mesh, refine, refine_uniform
from .quadrature import default_quadrature
from .quantum.local_estimator import max_alpha, quantum_estimate
from .quantum.stateprep import n_qubits_for

log = logging.getLogger(__name__)

CORNER_RADIUS = 0.25


class DriverError(RuntimeError):
    pass


def shots_for(epsilon: float, max_alpha: float, norm_e: float, c: float = 1.0) -> int:
    """Shots so that every term reaches precision ``epsilon`` after rescaling."""
    if epsilon <= 0:
        raise DriverError("epsilon must be positive")
    # round before ceil so that exact instances are not bumped by roundoff
    return int(math.ceil(round(c * max_alpha**2 * norm_e**4 / epsilon**2, 9)))


def corner_fraction(mesh: Mesh, radius: float = CORNER_RADIUS) -> float:
    return float(np.mean(np.linalg.norm(mesh.centroids(), axis=1) < radius))


@dataclass
class IterationRecord:
    iteration: int
    ndof: int
    n_elements: int
    eta: float
    hcurl_error: float
    marked_count: int
    eta_classical: float
    eta_forms: float
    forms_discrepancy: float  # max over elements of |eta_K^2(forms) - eta_K^2(classical)|
    corner_fraction: float
    eta_quantum: float | None = None
    quantum_max_diff: float | None = None  # max over elements of |quantum - forms| eta_K^2
    shots: int | None = None
    alpha: dict | None = None
    vqls: dict | None = None
    timings: dict = field(default_factory=dict)


@dataclass
class RunReport:
    kind: str
    config: dict
    records: list[IterationRecord] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def append(self, rec: IterationRecord) -> None:
        if self.records and rec.iteration <= self.records[-1].iteration:
            raise DriverError("iteration records must be appended in order")
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def slope(self) -> float:
        """Least-squares slope of log error against log DOF count."""
        return float(np.polyfit(np.log(self.column("ndof")), np.log(self.column("hcurl_error")), 1)[0])

    def to_dict(self, timings: bool = True) -> dict:
        d = dataclasses.asdict(self)
        if not timings:
            for r in d["records"]:
                r.pop("timings")
        return d

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    def write_convergence_csv(self, path: str | Path) -> None:
        quantum = any(r.eta_quantum is not None for r in self.records)
        head = ["iter", "Ndof", "eta", "hcurlError", "markedCount"] + (["etaQuantum"] if quantum else [])
        lines = [",".join(head)]
        for r in self.records:
            row = [str(r.iteration), str(r.ndof), f"{r.eta:.15e}", f"{r.hcurl_error:.15e}", str(r.marked_count)]
            if quantum:
                row.append(f"{r.eta_quantum:.15e}")
            lines.append(",".join(row))
        Path(path).write_text("\n".join(lines) + "\n")


def _solve_vqls(system: fem.FemSystem, cfg: AmrConfig, iteration: int):
    n = n_qubits_for(system.n)
    if n > cfg.vqls_max_qubits:
        raise DriverError(
            f"VQLS refused: {system.n} DOFs need {n} qubits, above the budget of {cfg.vqls_max_qubits}"
        )
    problem = vqls.VqlsProblem.from_system(system.A, system.F)
    layers, iters = vqls.BUDGETS.get(n, vqls.BUDGETS[max(vqls.BUDGETS)])
    rng = np.random.default_rng([cfg.seed, iteration])
    res = vqls.optimize(problem, cfg.vqls_layout, layers, iters, rng)
    x = vqls.ansatz_state(cfg.vqls_layout, n, layers, res.params)
    q, _ = vqls.norm_estimate(problem, x)
    e = (q * x)[: system.n]
    info = {
        "qubits": n,
        "layers": layers,
        "max_iters": iters,
        "final_cost": res.cost,
        "evaluations": res.evaluations,
        "fidelity": vqls.fidelity(x, problem.solution()),
        "optimizer": res.method,
    }
    return e, info


def _run(cfg: AmrConfig, uniform: bool, out_dir: str | Path | None = None, dump_mesh: bool = False) -> RunReport:
    cfg.validate()
    quad = default_quadrature(cfg.quad_degree, cfg.edge_points, cfg.corner_levels)
    report = RunReport("uniform" if uniform else "amr", dataclasses.asdict(cfg))
    report.metadata = {"seed": cfg.seed, "estimator": cfg.estimator, "solver": cfg.solver}
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    t = time.perf_counter()
    mesh = make_lshape_mesh(cfg.resolution)
    t_mesh = time.perf_counter() - t
    for it in range(1, cfg.iterations + 1):
        timings = {"mesh": t_mesh}
        if out is not None and dump_mesh:
            mesh.dump(out / f"mesh_iter{it:02d}.txt")

        t = time.perf_counter()
        dofmap = fem.build_dofmap(mesh)
        system = fem.assemble_benchmark(mesh, dofmap, quad)
        vqls_info = None
        if cfg.solver == "vqls":
            e_free, vqls_info = _solve_vqls(system, cfg, it)
        else:
            e_free = fem.solve_classical(system)
        e_full = system.full_vector(e_free)
        timings["solve"] = time.perf_counter() - t

        t = time.perf_counter()
        hcurl_local, hcurl = fem.hcurl_error(mesh, dofmap, e_full, quad)
        f_coeffs = project_source(mesh, fem.benchmark_source, quad)
        classical = estimate_classical(mesh, dofmap, e_full, fem.benchmark_source, quad)
        lm = build_local_matrices(mesh, dofmap, quad)
        forms = estimate_from_forms(e_full, f_coeffs, lm)
        est: LocalEstimator = classical if cfg.estimator == "classical" else forms
        rec_q = {}
        if cfg.estimator.startswith("quantum"):
            shots = None
            if cfg.estimator == "quantum-sampled":
                shots = cfg.shots
                if cfg.shots_policy == "scaled":
                    n_glob = max(n_qubits_for(len(e_full)), n_qubits_for(f_coeffs.size))
                    amax = max_alpha(lm, cfg.embedding, n_glob)
                    shots = shots_for(cfg.shots_epsilon, amax, float(np.linalg.norm(e_full)), cfg.shots_constant)
                if shots <= 0:
                    raise DriverError("the sampled estimator needs a positive shot count")
            qe = quantum_estimate(
                lm,
                e_full,
                f_coeffs,
                mode="shots" if shots else "exact",
                shots=shots,
                seed=[cfg.seed, it],
                embedding=cfg.embedding,
                global_max_qubits=cfg.global_max_qubits,
            )
            est = qe.estimator
            rec_q = {
                "eta_quantum": qe.estimator.eta,
                "quantum_max_diff": float(np.max(np.abs(qe.estimator.eta_k_sq - forms.eta_k_sq))),
                "shots": shots,
                "alpha": qe.alpha_stats() | {"max_qubits": qe.max_qubits, "tests": qe.n_tests},
            }
        timings["estimate"] = time.perf_counter() - t
        if out is not None:
            est.write_csv(out / f"estimator_iter{it:02d}.csv", hcurl_local)

        t = time.perf_counter()
        marked = np.arange(mesh.n_triangles) if uniform else mark(est, cfg.theta)
        timings["mark"] = time.perf_counter() - t

        rec = IterationRecord(
            iteration=it,
            ndof=dofmap.n_free,
            n_elements=mesh.n_triangles,
            eta=forms.eta if cfg.estimator.startswith("quantum") else est.eta,
            hcurl_error=hcurl,
            marked_count=int(len(marked)),
            eta_classical=classical.eta,
            eta_forms=forms.eta,
            forms_discrepancy=float(np.max(np.abs(forms.eta_k_sq - classical.eta_k_sq))),
            corner_fraction=corner_fraction(mesh),
            vqls=vqls_info,
            timings=timings,
            **rec_q,
        )
        report.append(rec)
        log.info("iter %d: N=%d eta=%.4e err=%.4e marked=%d", it, rec.ndof, rec.eta, rec.hcurl_error, rec.marked_count)

        if it == cfg.iterations or (cfg.eta_target > 0 and rec.eta < cfg.eta_target):
            break
        t = time.perf_counter()
        mesh = refine_uniform(mesh) if uniform else refine(mesh, marked, mode=cfg.refine_mode)
        t_mesh = time.perf_counter() - t

    if out is not None:
        report.write_json(out / "report.json")
        report.write_convergence_csv(out / "convergence.csv")
    return report


def run_amr(cfg: AmrConfig, out_dir=None, dump_mesh: bool = False) -> RunReport:
    """Solve, estimate, mark with the maximum strategy and refine, ``cfg.iterations`` times."""
    return _run(cfg, uniform=False, out_dir=out_dir, dump_mesh=dump_mesh)


def run_uniform(cfg: AmrConfig, out_dir=None, dump_mesh: bool = False) -> RunReport:
    """Same loop with every element marked."""
    return _run(cfg, uniform=True, out_dir=out_dir, dump_mesh=dump_mesh)
