"""Statevector emulation of block encodings and Hadamard tests."""
from .blockencoding import BlockEncoding, block_encode, embed
from .circuit import Circuit, CircuitError, StateVector, compile_circuit
from .hadamard import hadamard_test_cross, hadamard_test_diag, sample_p0
from .local_estimator import quantum_estimate, quantum_local_estimator
from .stateprep import prepare_state

__all__ = [
    "BlockEncoding",
    "block_encode",
    "embed",
    "Circuit",
    "CircuitError",
    "StateVector",
    "compile_circuit",
    "hadamard_test_cross",
    "hadamard_test_diag",
    "sample_p0",
    "quantum_estimate",
    "quantum_local_estimator",
    "prepare_state",
]
