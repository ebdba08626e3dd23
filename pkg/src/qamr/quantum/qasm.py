"""OpenQASM 3 text export.

Uniformly controlled rotations are expanded into Ry/CNOT sequences; gates
inside a controlled subcircuit get ``ctrl @`` or ``negctrl @`` modifiers.
"""
from __future__ import annotations

from pathlib import Path

from .circuit import Circuit, Gate, compile_ucry

_PLAIN = {"h": "h", "x": "x", "ry": "ry", "rz": "rz", "cx": "cx", "cz": "cz", "swap": "swap"}


def _modifier(value: int) -> str:
    return "ctrl @ " if value else "negctrl @ "


def _lines(circ: Circuit, qmap, prefix: list[tuple[int, int]]):
    mods = "".join(_modifier(v) for _, v in prefix)
    ctrl_ops = [f"q[{c}]" for c, _ in prefix]
    for g in circ.gates:
        if g.name == "ucry":
            sub = compile_ucry(g.angles, g.controls, g.qubits[0], circ.n_qubits)
            yield from _lines(sub, qmap, prefix)
        elif g.name == "ctrl":
            inner = [(qmap[g.controls[0]], g.ctrl_values[0])]
            yield from _lines(g.sub, [qmap[q] for q in g.qubits], prefix + inner)
        elif g.name == "mcry":
            extra = "".join(_modifier(v) for v in g.ctrl_values)
            ops = ctrl_ops + [f"q[{qmap[q]}]" for q in g.controls + g.qubits]
            yield f"{mods}{extra}ry({g.params[0]!r}) {', '.join(ops)};"
        else:
            yield _plain(g, qmap, mods, ctrl_ops)


def _plain(g: Gate, qmap, mods: str, ctrl_ops: list[str]) -> str:
    name = _PLAIN[g.name]
    if g.params:
        name += f"({g.params[0]!r})"
    ops = ctrl_ops + [f"q[{qmap[q]}]" for q in g.controls + g.qubits]
    return f"{mods}{name} {', '.join(ops)};"


def to_qasm(circ: Circuit, measure: tuple[int, ...] = ()) -> str:
    """Render ``circ`` as OpenQASM 3, optionally measuring the listed qubits."""
    out = ["OPENQASM 3.0;", 'include "stdgates.inc";']
    if circ.name:
        out.append(f"// {circ.name}")
    out.append(f"qubit[{circ.n_qubits}] q;")
    if measure:
        out.append(f"bit[{len(measure)}] c;")
    out.extend(_lines(circ, list(range(circ.n_qubits)), []))
    for i, q in enumerate(measure):
        out.append(f"c[{i}] = measure q[{q}];")
    return "\n".join(out) + "\n"


def write_qasm(path: str | Path, circ: Circuit, measure: tuple[int, ...] = ()) -> None:
    Path(path).write_text(to_qasm(circ, measure))
