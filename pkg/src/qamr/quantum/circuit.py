"""Gate-list circuits and a dense statevector simulator.

Qubit 0 is the most significant bit of a basis-state index, so the
top-left block of an operator corresponds to the leading qubits being 0.
States are simulated as tensors of shape ``(2,) * n`` with optional
trailing batch axes, which lets :meth:`Circuit.unitary` push all basis
states through in one pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]])


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    """One instruction.

    ``name`` is one of ``h x ry rz cx cz swap mcry ucry ctrl``. For ``mcry``
    the controls must equal ``ctrl_values``; ``ucry`` applies ``Ry(angles[c])``
    with ``c`` the integer read from ``controls`` (first control = MSB);
    ``ctrl`` runs ``sub`` on ``qubits`` when ``controls[0] == ctrl_values[0]``.
    """

    name: str
    qubits: tuple[int, ...]
    controls: tuple[int, ...] = ()
    params: tuple[float, ...] = ()
    ctrl_values: tuple[int, ...] = ()
    angles: np.ndarray | None = field(default=None, compare=False)
    sub: "Circuit | None" = field(default=None, compare=False)

    def all_qubits(self) -> tuple[int, ...]:
        return tuple(self.controls) + tuple(self.qubits)


class Circuit:
    def __init__(self, n_qubits: int, name: str = ""):
        if n_qubits < 1:
            raise CircuitError("a circuit needs at least one qubit")
        self.n_qubits = n_qubits
        self.name = name
        self.gates: list[Gate] = []

    def __len__(self) -> int:
        return len(self.gates)

    def __repr__(self) -> str:
        return f"Circuit({self.n_qubits} qubits, {len(self.gates)} gates{', ' + self.name if self.name else ''})"

    # -- construction -------------------------------------------------------

    def _add(self, gate: Gate) -> "Circuit":
        qs = gate.all_qubits()
        if len(set(qs)) != len(qs):
            raise CircuitError(f"repeated qubit in {gate.name}")
        if any(q < 0 or q >= self.n_qubits for q in qs):
            raise CircuitError(f"qubit index out of range in {gate.name}")
        self.gates.append(gate)
        return self

    def h(self, q: int):
        return self._add(Gate("h", (q,)))

    def x(self, q: int):
        return self._add(Gate("x", (q,)))

    def ry(self, theta: float, q: int):
        return self._add(Gate("ry", (q,), params=(float(theta),)))

    def rz(self, theta: float, q: int):
        return self._add(Gate("rz", (q,), params=(float(theta),)))

    def cx(self, c: int, t: int):
        return self._add(Gate("cx", (t,), controls=(c,)))

    def cz(self, a: int, b: int):
        return self._add(Gate("cz", (b,), controls=(a,)))

    def swap(self, a: int, b: int):
        return self._add(Gate("swap", (a, b)))

    def mcry(self, theta: float, controls: Sequence[int], target: int, ctrl_values: Sequence[int] | None = None):
        controls = tuple(controls)
        values = tuple(ctrl_values) if ctrl_values is not None else (1,) * len(controls)
        if len(values) != len(controls):
            raise CircuitError("ctrl_values must match controls")
        return self._add(Gate("mcry", (target,), controls, (float(theta),), values))

    def ucry(self, angles: np.ndarray, controls: Sequence[int], target: int):
        controls = tuple(controls)
        angles = np.asarray(angles, dtype=float).reshape(-1)
        if angles.size != 2 ** len(controls):
            raise CircuitError("ucry needs 2**len(controls) angles")
        if not controls:
            return self.ry(float(angles[0]), target)
        return self._add(Gate("ucry", (target,), controls, angles=angles))

    def append(self, other: "Circuit", qubits: Sequence[int] | None = None):
        """Append ``other`` with its qubit ``i`` mapped to ``qubits[i]``."""
        qubits = tuple(range(other.n_qubits)) if qubits is None else tuple(qubits)
        if len(qubits) != other.n_qubits:
            raise CircuitError("qubit map length mismatch")
        for g in other.gates:
            self._add(_remap(g, qubits))
        return self

    def controlled_append(self, other: "Circuit", control: int, qubits: Sequence[int] | None = None, value: int = 1):
        """Append ``other`` controlled on ``control == value``."""
        qubits = tuple(range(other.n_qubits)) if qubits is None else tuple(qubits)
        if len(qubits) != other.n_qubits:
            raise CircuitError("qubit map length mismatch")
        if control in qubits:
            raise CircuitError("control qubit overlaps the target register")
        return self._add(Gate("ctrl", qubits, (control,), ctrl_values=(value,), sub=other))

    def inverse(self) -> "Circuit":
        inv = Circuit(self.n_qubits, f"{self.name}^-1" if self.name else "")
        for g in reversed(self.gates):
            if g.name in ("ry", "rz", "mcry"):
                inv._add(Gate(g.name, g.qubits, g.controls, (-g.params[0],), g.ctrl_values))
            elif g.name == "ucry":
                inv._add(Gate("ucry", g.qubits, g.controls, angles=-g.angles))
            elif g.name == "ctrl":
                inv._add(Gate("ctrl", g.qubits, g.controls, ctrl_values=g.ctrl_values, sub=g.sub.inverse()))
            else:
                inv._add(g)
        return inv

    # -- simulation ---------------------------------------------------------

    def run(self, state: np.ndarray | None = None) -> np.ndarray:
        """Apply the circuit to a flat state (default ``|0...0>``) and return the flat result.

        A 2D input of shape (2**n, batch) is treated as a batch of column states.
        """
        n = self.n_qubits
        if state is None:
            state = np.zeros(2**n, dtype=complex)
            state[0] = 1.0
        state = np.asarray(state, dtype=complex)
        batch = state.shape[1:]
        if state.shape[0] != 2**n:
            raise CircuitError("state dimension does not match the qubit count")
        psi = state.reshape((2,) * n + batch).copy()
        psi = _run_gates(self.gates, psi)
        return psi.reshape((2**n,) + batch)

    def unitary(self) -> np.ndarray:
        dim = 2**self.n_qubits
        return self.run(np.eye(dim, dtype=complex))

    def depth_hint(self) -> int:
        return len(self.gates)


def _remap(g: Gate, qmap: tuple[int, ...]) -> Gate:
    return Gate(
        g.name,
        tuple(qmap[q] for q in g.qubits),
        tuple(qmap[q] for q in g.controls),
        g.params,
        g.ctrl_values,
        g.angles,
        g.sub,
    )


def _apply_1q(psi: np.ndarray, U: np.ndarray, q: int) -> np.ndarray:
    out = np.tensordot(U, psi, axes=([1], [q]))
    return np.moveaxis(out, 0, q)


def _run_gates(gates, psi):
    for g in gates:
        psi = _apply(psi, g)
    return psi


def _apply(psi: np.ndarray, g: Gate) -> np.ndarray:
    name = g.name
    if name == "h":
        return _apply_1q(psi, _H, g.qubits[0])
    if name == "x":
        return np.flip(psi, axis=g.qubits[0]).copy()
    if name == "ry":
        return _apply_1q(psi, ry_matrix(g.params[0]), g.qubits[0])
    if name == "rz":
        return _apply_1q(psi, rz_matrix(g.params[0]), g.qubits[0])
    if name == "swap":
        return np.swapaxes(psi, g.qubits[0], g.qubits[1]).copy()
    if name == "cz":
        idx = [slice(None)] * psi.ndim
        idx[g.controls[0]] = 1
        idx[g.qubits[0]] = 1
        psi[tuple(idx)] *= -1.0
        return psi
    if name in ("cx", "mcry", "ctrl"):
        values = g.ctrl_values or (1,) * len(g.controls)
        idx = [slice(None)] * psi.ndim
        for c, v in zip(g.controls, values):
            idx[c] = v
        idx = tuple(idx)
        sub = psi[idx]
        removed = sorted(g.controls)

        def shift(q):
            return q - sum(1 for c in removed if c < q)

        if name == "cx":
            psi[idx] = np.flip(sub, axis=shift(g.qubits[0]))
        elif name == "mcry":
            psi[idx] = _apply_1q(sub, ry_matrix(g.params[0]), shift(g.qubits[0]))
        else:
            qmap = tuple(shift(q) for q in g.qubits)
            psi[idx] = _run_gates([_remap(x, qmap) for x in g.sub.gates], sub.copy())
        return psi
    if name == "ucry":
        return _apply_ucry(psi, g.angles, g.controls, g.qubits[0])
    raise CircuitError(f"unknown gate {name}")


def _apply_ucry(psi: np.ndarray, angles: np.ndarray, controls: tuple[int, ...], target: int) -> np.ndarray:
    k = len(controls)
    order = list(controls) + [target]
    moved = np.moveaxis(psi, order, list(range(k + 1)))
    shape = moved.shape
    flat = moved.reshape(2**k, 2, -1)
    c = np.cos(angles / 2.0)[:, None]
    s = np.sin(angles / 2.0)[:, None]
    a0, a1 = flat[:, 0, :], flat[:, 1, :]
    out = np.empty_like(flat)
    out[:, 0, :] = c * a0 - s * a1
    out[:, 1, :] = s * a0 + c * a1
    return np.moveaxis(out.reshape(shape), list(range(k + 1)), order)


# ----------------------------------------------------------------------------
# gray-code compilation of uniformly controlled rotations
# ----------------------------------------------------------------------------


def gray_code(k: int) -> np.ndarray:
    i = np.arange(2**k)
    return i ^ (i >> 1)


def compile_ucry(angles: np.ndarray, controls: Sequence[int], target: int, n_qubits: int) -> Circuit:
    """Expand a uniformly controlled Ry into alternating Ry and CNOT gates.

    Control value ``c`` (first control = MSB) sees the rotation
    ``sum_i (-1)^popcount(c & g_i) theta_i`` where ``g_i`` is the i-th Gray
    code word, so ``theta = M^T angles / 2^k`` with ``M[c, i]`` that sign.
    """
    controls = tuple(controls)
    k = len(controls)
    circ = Circuit(n_qubits)
    angles = np.asarray(angles, dtype=float).reshape(-1)
    if k == 0:
        return circ.ry(angles[0], target)
    g = gray_code(k)
    c = np.arange(2**k)
    parity = np.array([[bin(ci & gi).count("1") & 1 for gi in g] for ci in c])
    M = 1.0 - 2.0 * parity
    theta = M.T @ angles / 2**k
    for i in range(2**k):
        circ.ry(theta[i], target)
        flipped = g[i] ^ g[(i + 1) % 2**k]
        bit = int(flipped).bit_length() - 1  # bit position, 0 = LSB
        circ.cx(controls[k - 1 - bit], target)
    return circ


def compile_circuit(circ: Circuit) -> Circuit:
    """Replace every ``ucry`` by its Gray-code expansion (recursively inside ``ctrl``)."""
    out = Circuit(circ.n_qubits, circ.name)
    for g in circ.gates:
        if g.name == "ucry":
            out.append(compile_ucry(g.angles, g.controls, g.qubits[0], circ.n_qubits))
        elif g.name == "ctrl":
            out._add(Gate("ctrl", g.qubits, g.controls, ctrl_values=g.ctrl_values, sub=compile_circuit(g.sub)))
        else:
            out._add(g)
    return out


@dataclass(frozen=True)
class StateVector:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.n,):
            raise CircuitError("amplitude count must be 2**n")
        if abs(np.linalg.norm(self.amplitudes) - 1.0) > 1e-12:
            raise CircuitError("state is not normalised")

    @classmethod
    def from_circuit(cls, circ: Circuit) -> "StateVector":
        return cls(circ.n_qubits, circ.run())

    def probability(self, qubit: int, value: int = 0) -> float:
        psi = self.amplitudes.reshape((2,) * self.n)
        idx = [slice(None)] * self.n
        idx[qubit] = value
        return float(np.sum(np.abs(psi[tuple(idx)]) ** 2))
