"""Variational quantum linear solver emulated with dense linear algebra.

The solution ``|x>`` is the output of a hardware-efficient Ry/CZ ansatz.
The local cost

    C_L = 1 - (1/n) sum_j || P_j U_F^dag A |x> ||^2 / || A |x> ||^2,

with ``P_j`` projecting qubit ``j`` onto ``|0>``, vanishes exactly when
``A|x>`` is parallel to ``|F> = U_F |0>``. It is minimised with COBYLA.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.optimize as so
import scipy.stats as st

from .quantum.circuit import Circuit
from .quantum.stateprep import prepare_state

log = logging.getLogger(__name__)

LAYOUTS = ("circular", "alternating")

# qubits -> (layers, optimizer iterations)
BUDGETS = {2: (1, 1000), 3: (2, 2000), 4: (4, 5000), 5: (8, 10000)}


class VqlsError(ValueError):
    pass


def _ring(n: int) -> list[tuple[int, int]]:
    pairs = [(i, i + 1) for i in range(n - 1)]
    if n > 2:
        pairs.append((n - 1, 0))
    return pairs


def _even_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(0, n - 1, 2)]


def _odd_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(1, n - 1, 2)]


def n_parameters(layout: str, n: int, layers: int) -> int:
    if layout == "circular":
        return n * (layers + 1)
    if layout == "alternating":
        return n + layers * (n + 2 * len(_odd_pairs(n)))
    raise VqlsError(f"unknown ansatz layout {layout!r}; expected one of {LAYOUTS}")


def build_ansatz(layout: str, n: int, layers: int, params) -> Circuit:
    """Ry/CZ ansatz.

    Both layouts start with an Ry column. A circular layer is a CZ ring
    followed by an Ry column. An alternating layer applies CZ on the pairs
    (0,1), (2,3), ..., an Ry column, then CZ on (1,2), (3,4), ... and Ry on
    the qubits those pairs touch.
    """
    if n < 2 or layers < 1:
        raise VqlsError("the ansatz needs n >= 2 qubits and at least one layer")
    params = np.asarray(params, dtype=float).ravel()
    need = n_parameters(layout, n, layers)
    if params.size != need:
        raise VqlsError(f"{layout} ansatz with n={n}, L={layers} takes {need} parameters, got {params.size}")
    it = iter(params)
    c = Circuit(n, f"{layout}-L{layers}")

    def column(qubits):
        for q in qubits:
            c.ry(next(it), q)

    column(range(n))
    for _ in range(layers):
        if layout == "circular":
            for a, b in _ring(n):
                c.cz(a, b)
            column(range(n))
        else:
            for a, b in _even_pairs(n):
                c.cz(a, b)
            column(range(n))
            odd = _odd_pairs(n)
            for a, b in odd:
                c.cz(a, b)
            column(sorted({q for p in odd for q in p}))
    return c


def ansatz_state(layout: str, n: int, layers: int, params) -> np.ndarray:
    return build_ansatz(layout, n, layers, params).run()


@dataclass(eq=False)
class VqlsProblem:
    """``A x = F`` padded to ``2^n``: identity on the padded block of ``A``, zeros in ``F``."""

    A: np.ndarray
    F: np.ndarray
    n: int
    size: int  # unpadded dimension
    prep: Circuit
    _B: np.ndarray = field(repr=False)  # U_F^dag A
    _proj: np.ndarray = field(repr=False)  # (n, 2^n) indicator of qubit j being 0

    @classmethod
    def from_system(cls, A, F) -> "VqlsProblem":
        A = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
        F = np.asarray(F)
        size = len(F)
        if A.shape != (size, size):
            raise VqlsError("matrix and right-hand side sizes differ")
        n = max(1, int(np.ceil(np.log2(size))))
        Ap = np.eye(2**n, dtype=complex)
        Ap[:size, :size] = A
        Fp = np.zeros(2**n, dtype=complex)
        Fp[:size] = F
        prep = prepare_state(Fp, n)
        UF = prep.unitary()
        idx = np.arange(2**n)
        proj = np.array([((idx >> (n - 1 - j)) & 1) == 0 for j in range(n)], dtype=float)
        return cls(Ap, Fp, n, size, prep, UF.conj().T @ Ap, proj)

    def residual_state(self, x: np.ndarray) -> np.ndarray:
        return self._B @ x

    def solution(self) -> np.ndarray:
        """Classical normalised solution of the padded system."""
        x = sla.solve(self.A, self.F)
        return x / np.linalg.norm(x)


def local_cost(problem: VqlsProblem, x: np.ndarray) -> float:
    y = problem.residual_state(np.asarray(x))
    norm2 = float(np.vdot(y, y).real)
    if norm2 < 1e-300:
        raise VqlsError("A|x> vanishes; the local cost is undefined")
    p0 = problem._proj @ (np.abs(y) ** 2) / norm2
    return float(np.clip(1.0 - p0.mean(), 0.0, 1.0))


def local_hamiltonian(problem: VqlsProblem) -> np.ndarray:
    """Dense ``H_L = A^dag U_F (1 - (1/n) sum_j |0_j><0_j|) U_F^dag A``, for reference checks."""
    mid = np.diag(1.0 - problem._proj.mean(axis=0))
    return problem._B.conj().T @ mid @ problem._B


@dataclass
class OptimizeResult:
    params: np.ndarray
    cost: float
    trace: list[float]
    evaluations: int
    method: str = "COBYLA"


def optimize(
    problem: VqlsProblem, layout: str, layers: int, max_iters: int, seed=None, initial=None
) -> OptimizeResult:
    """Minimise the local cost with COBYLA from a seeded random start in ``[0, 2 pi)``."""
    if max_iters < 1:
        raise VqlsError("max_iters must be at least 1")
    npar = n_parameters(layout, problem.n, layers)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x0 = rng.uniform(0.0, 2.0 * np.pi, npar) if initial is None else np.asarray(initial, dtype=float)
    trace: list[float] = []
    best = [np.inf, x0]

    def cost(theta):
        c = local_cost(problem, ansatz_state(layout, problem.n, layers, theta))
        trace.append(c)
        if c < best[0]:
            best[0], best[1] = c, np.array(theta)
        return c

    so.minimize(cost, x0, method="COBYLA", options={"maxiter": int(max_iters), "rhobeg": 1.0}, tol=1e-12)
    return OptimizeResult(best[1], float(best[0]), trace, len(trace))


def norm_estimate(problem: VqlsProblem, x: np.ndarray) -> tuple[complex, float]:
    """``||F|| / <F|A|x>`` as the raw complex quotient and its magnitude."""
    f = problem.F / np.linalg.norm(problem.F)
    denom = np.vdot(f, problem.A @ np.asarray(x))
    if abs(denom) < 1e-12:
        raise VqlsError("<F|A|x> vanishes; the solution norm cannot be recovered")
    q = np.linalg.norm(problem.F) / denom
    return complex(q), float(abs(q))


def fidelity(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise VqlsError("states have different dimensions")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return float(abs(np.vdot(a, b)) ** 2 / (na * na * nb * nb))


# -- fidelity against system size ------------------------------------------


@dataclass
class FidelityRow:
    n: int
    layout: str
    layers: int
    max_iters: int
    trial: int
    final_cost: float
    fidelity: float


@dataclass
class FidelitySummary:
    n: int
    layout: str
    mean: float
    half_width: float  # 95% confidence half-width (Student t)
    trials: int


@dataclass
class FidelityTable:
    rows: list[FidelityRow]
    skipped: list[str]

    def summary(self) -> list[FidelitySummary]:
        out = []
        keys = sorted({(r.n, r.layout) for r in self.rows}, key=lambda k: (k[0], LAYOUTS.index(k[1])))
        for n, layout in keys:
            f = np.array([r.fidelity for r in self.rows if r.n == n and r.layout == layout])
            hw = 0.0
            if f.size > 1:
                hw = float(st.t.ppf(0.975, f.size - 1) * f.std(ddof=1) / np.sqrt(f.size))
            out.append(FidelitySummary(n, layout, float(f.mean()), hw, int(f.size)))
        return out

    def mean(self, n: int, layout: str) -> float:
        return next(s.mean for s in self.summary() if s.n == n and s.layout == layout)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "layout", "layers", "maxIters", "trial", "finalCost", "fidelity"])
            for r in self.rows:
                w.writerow([r.n, r.layout, r.layers, r.max_iters, r.trial, f"{r.final_cost:.12e}", f"{r.fidelity:.12e}"])

    def write_summary_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "layout", "meanFidelity", "ciHalfWidth", "trials"])
            for s in self.summary():
                w.writerow([s.n, s.layout, f"{s.mean:.12e}", f"{s.half_width:.12e}", s.trials])


def trial_seed(base_seed: int, n: int, layout: str, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base_seed), n, LAYOUTS.index(layout), trial])


def fidelity_experiment(
    A,
    F,
    sizes=(2, 3, 4, 5),
    layouts=LAYOUTS,
    trials: int = 5,
    seed: int = 0,
    budgets: dict | None = None,
) -> FidelityTable:
    """VQLS fidelity on the leading ``2^n x 2^n`` principal subsystems of ``A x = F``.

    Sizes beyond the system are zero/identity padded. Each trial is compared
    with the normalised classical solution of the same subsystem.
    """
    budgets = budgets or BUDGETS
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
    F = np.asarray(F)
    rows, skipped = [], []
    for n in sizes:
        m = min(2**n, len(F))
        sub_A, sub_F = A[:m, :m], F[:m]
        if np.linalg.cond(sub_A) > 1e12 or not np.any(sub_F):
            msg = f"n={n}: singular or trivial subsystem skipped"
            log.warning(msg)
            skipped.append(msg)
            continue
        problem = VqlsProblem.from_system(sub_A, sub_F)
        target = problem.solution()
        layers, iters = budgets[n]
        for layout in layouts:
            for t in range(1, trials + 1):
                rng = np.random.default_rng(trial_seed(seed, n, layout, t))
                res = optimize(problem, layout, layers, iters, rng)
                x = ansatz_state(layout, n, layers, res.params)
                rows.append(FidelityRow(n, layout, layers, iters, t, res.cost, fidelity(x, target)))
                log.info("n=%d %s trial %d: cost %.3e fidelity %.4f", n, layout, t, res.cost, rows[-1].fidelity)
    return FidelityTable(rows, skipped)
