"""Real-amplitude state preparation with a binary tree of Ry rotations."""
from __future__ import annotations

import numpy as np

from .circuit import Circuit, CircuitError


def n_qubits_for(length: int) -> int:
    return max(1, int(np.ceil(np.log2(max(length, 1)))))


def pad(v: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(2**n, dtype=np.asarray(v).dtype)
    out[: len(v)] = v
    return out


def prepare_state(v, n: int | None = None) -> Circuit:
    """Circuit mapping ``|0^n>`` to ``v / ||v||`` zero-padded to ``2^n`` amplitudes.

    Level ``k`` of the tree splits the weight of each ``k``-bit prefix
    between its two halves with a uniformly controlled Ry on qubit ``k``.
    The last level uses signed ``atan2`` angles, so negative amplitudes need
    no extra phase gates.
    """
    v = np.asarray(v)
    if np.iscomplexobj(v):
        if np.any(np.abs(v.imag) > 0):
            raise CircuitError("only real amplitudes can be prepared")
        v = v.real
    v = v.astype(float)
    if v.ndim != 1 or v.size == 0:
        raise CircuitError("expected a non-empty vector")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise CircuitError("cannot prepare the zero vector")
    n = n_qubits_for(v.size) if n is None else n
    if v.size > 2**n:
        raise CircuitError(f"vector of length {v.size} does not fit in {n} qubits")
    amp = pad(v / norm, n)
    circ = Circuit(n, "prep")
    for k in range(n):
        blocks = amp.reshape(2**k, 2, -1)
        if k == n - 1:
            angles = 2.0 * np.arctan2(blocks[:, 1, 0], blocks[:, 0, 0])
        else:
            w = np.linalg.norm(blocks, axis=2)
            angles = 2.0 * np.arctan2(w[:, 1], w[:, 0])
        circ.ucry(angles, tuple(range(k)), k)
    return circ
