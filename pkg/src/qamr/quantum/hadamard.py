"""Hadamard tests on block encodings, exact or shot-sampled."""
from __future__ import annotations

import numpy as np

from .blockencoding import BlockEncoding
from .circuit import Circuit, CircuitError


def _check(be: BlockEncoding, *preps: Circuit) -> None:
    for p in preps:
        if p.n_qubits != be.n:
            raise CircuitError(f"state preparation acts on {p.n_qubits} qubits, block encoding expects {be.n}")


def hadamard_test_diag_circuit(be: BlockEncoding, prep: Circuit) -> Circuit:
    """Qubit 0 is the test ancilla, then the ``m`` encoding ancillas, then the system."""
    _check(be, prep)
    total = 1 + be.n_qubits
    sys = tuple(range(1 + be.m, total))
    c = Circuit(total, "hadamard_diag")
    c.append(prep, sys)
    c.h(0)
    c.controlled_append(be.circuit, 0, tuple(range(1, total)))
    c.h(0)
    return c


def hadamard_test_cross_circuit(be: BlockEncoding, prep_left: Circuit, prep_right: Circuit) -> Circuit:
    """Ancilla 0 branch prepares the left state, ancilla 1 branch prepares the right state and applies U."""
    _check(be, prep_left, prep_right)
    total = 1 + be.n_qubits
    sys = tuple(range(1 + be.m, total))
    c = Circuit(total, "hadamard_cross")
    c.h(0)
    c.controlled_append(prep_left, 0, sys, value=0)
    c.controlled_append(prep_right, 0, sys, value=1)
    c.controlled_append(be.circuit, 0, tuple(range(1, total)), value=1)
    c.h(0)
    return c


def _p0(circ: Circuit) -> float:
    psi = circ.run()
    half = psi.size // 2
    return float(np.clip(np.sum(np.abs(psi[:half]) ** 2), 0.0, 1.0))


def hadamard_test_diag(be: BlockEncoding, prep: Circuit) -> float:
    """Exact ``P(ancilla = 0) = (1 + Re<psi|M|psi> / alpha) / 2``."""
    return _p0(hadamard_test_diag_circuit(be, prep))


def hadamard_test_cross(be: BlockEncoding, prep_left: Circuit, prep_right: Circuit) -> float:
    """Exact ``P(ancilla = 0) = (1 + Re<phi|M|psi> / alpha) / 2``."""
    return _p0(hadamard_test_cross_circuit(be, prep_left, prep_right))


def sample_p0(p0: float, shots: int, seed=None) -> float:
    """Binomial estimate of ``p0`` from ``shots`` measurements."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    if not -1e-12 <= p0 <= 1 + 1e-12:
        raise ValueError("p0 must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return float(rng.binomial(int(shots), float(np.clip(p0, 0.0, 1.0))) / shots)
