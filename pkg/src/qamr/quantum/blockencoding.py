"""FABLE-style block encodings of real matrices.

Register layout on ``2n + 1`` qubits: qubit 0 is the rotation ancilla,
qubits ``1..n`` the row register and ``n+1..2n`` the system register. The
circuit is ``H^n (row) . SWAP(row, sys) . O_A . H^n (row)`` where ``O_A``
rotates the ancilla by ``2 arccos(M_ij / max|M|)`` controlled on
``(row, sys) = (i, j)``. Projecting all ancillas on ``|0>`` leaves
``M / (2^n max|M|)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, CircuitError, compile_circuit


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    circuit: Circuit
    alpha: float
    m: int  # ancilla qubits
    n: int  # system qubits
    matrix: np.ndarray  # the encoded matrix, kept for reference checks

    @property
    def n_qubits(self) -> int:
        return self.m + self.n

    def block(self) -> np.ndarray:
        """Top-left ``2^n x 2^n`` block of the unitary."""
        dim = 2**self.n
        return self.circuit.unitary()[:dim, :dim]

    def reconstruction_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.alpha * self.block())))


def embed(block: np.ndarray, n: int | None = None) -> np.ndarray:
    """Zero-pad a (possibly rectangular) matrix into ``2^n x 2^n``."""
    block = np.asarray(block)
    size = max(block.shape)
    if n is None:
        n = max(1, int(np.ceil(np.log2(size))))
    if size > 2**n:
        raise CircuitError("block does not fit")
    out = np.zeros((2**n, 2**n), dtype=block.dtype)
    out[: block.shape[0], : block.shape[1]] = block
    return out


def block_encode(M, compiled: bool = False) -> BlockEncoding:
    """Block-encode a real ``2^n x 2^n`` matrix with ``alpha = 2^n max|M_ij|``.

    With ``compiled=True`` the oracle is expanded into Ry/CNOT gates;
    otherwise it stays a single uniformly controlled rotation.
    """
    M = np.asarray(M)
    if np.iscomplexobj(M):
        if np.any(np.abs(M.imag) > 0):
            raise CircuitError("only real matrices are supported")
        M = M.real
    M = M.astype(float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise CircuitError("matrix must be square")
    dim = M.shape[0]
    n = int(round(np.log2(dim)))
    if 2**n != dim or n < 1:
        raise CircuitError("matrix dimension must be a power of two >= 2")
    scale = np.max(np.abs(M))
    if scale == 0.0:
        raise CircuitError("cannot block-encode the zero matrix")
    a = np.clip(M / scale, -1.0, 1.0)
    angles = 2.0 * np.arccos(a)  # indexed [row, col]
    row = list(range(1, n + 1))
    sys = list(range(n + 1, 2 * n + 1))
    c = Circuit(2 * n + 1, "fable")
    for q in row:
        c.h(q)
    c.ucry(angles.reshape(-1), row + sys, 0)
    for r, s in zip(row, sys):
        c.swap(r, s)
    for q in row:
        c.h(q)
    if compiled:
        c = compile_circuit(c)
    return BlockEncoding(c, float(dim * scale), n + 1, n, M)
