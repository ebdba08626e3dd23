import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qamr.quantum.blockencoding import block_encode, embed
from qamr.quantum.circuit import Circuit, CircuitError
from qamr.quantum.hadamard import (
    hadamard_test_cross,
    hadamard_test_cross_circuit,
    hadamard_test_diag,
    sample_p0,
)
from qamr.quantum.qasm import to_qasm
from qamr.quantum.stateprep import prepare_state

seeds = st.integers(0, 2**32 - 1)


# -- state preparation ------------------------------------------------------------


def test_prepare_basis_state_is_identity_on_zero():
    for n in (1, 3):
        v = np.zeros(2**n)
        v[0] = 1
        out = prepare_state(v).run()
        assert np.allclose(out, v)


def test_prepare_uniform():
    out = prepare_state(np.ones(8)).run()
    assert np.allclose(out, 2 ** (-1.5))


def test_prepare_length_22_in_five_qubits():
    rng = np.random.default_rng(0)
    v = rng.normal(size=22)
    out = prepare_state(v, 5).run()
    assert np.abs(out[:22] - v / np.linalg.norm(v)).max() < 1e-12
    assert np.abs(out[22:]).max() < 1e-12


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=16).filter(lambda v: np.linalg.norm(v) > 1e-6))
def test_prepare_signed_amplitudes(v):
    v = np.array(v)
    out = prepare_state(v).run()
    assert np.abs(out[: len(v)] - v / np.linalg.norm(v)).max() < 1e-12


def test_prepare_errors():
    with pytest.raises(CircuitError):
        prepare_state(np.zeros(4))
    with pytest.raises(CircuitError):
        prepare_state(np.array([1, 1j]))
    with pytest.raises(CircuitError):
        prepare_state(np.ones(5), n=2)


# -- block encoding ---------------------------------------------------------------


def test_identity_encoding():
    be = block_encode(np.eye(2))
    assert be.alpha == 2 and be.m == 2 and be.n == 1
    assert np.allclose(be.block(), np.eye(2) / 2)


def test_sign_preserved():
    M = np.diag([1.0, -1.0])
    be = block_encode(M)
    assert np.allclose(be.block(), M / 2, atol=1e-15)


def test_padded_local_blocks(coarse):
    rng = np.random.default_rng(3)
    B6 = rng.normal(size=(6, 6))
    B6 = B6 + B6.T
    for B in (B6, coarse.lm.C11[0], coarse.lm.M12[0], coarse.lm.M[0]):
        P = embed(B)
        assert P.shape[0] in (4, 8)
        assert block_encode(P).reconstruction_error() <= 1e-10
        assert block_encode(P, compiled=True).reconstruction_error() <= 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), seeds)
def test_random_reconstruction(n, seed):
    M = np.random.default_rng(seed).normal(size=(2**n, 2**n))
    be = block_encode(M)
    assert be.alpha == pytest.approx(2**n * np.abs(M).max())
    assert be.reconstruction_error() <= 1e-10
    assert abs(np.linalg.norm(be.circuit.run(np.eye(2 ** be.n_qubits)[:, 1])) - 1) < 1e-12


def test_block_encode_errors():
    with pytest.raises(CircuitError):
        block_encode(np.zeros((2, 2)))
    with pytest.raises(CircuitError):
        block_encode(np.ones((3, 3)))


# -- Hadamard tests ---------------------------------------------------------------


def test_trivial_identity_encoding():
    be = block_encode(np.eye(4))
    p = hadamard_test_diag(be, prepare_state([1.0, 2.0, -1.0, 0.5]))
    assert p == pytest.approx(0.5 * (1 + 1 / be.alpha))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_diag_matches_dense(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(4, 4))
    M = M + M.T
    psi = rng.normal(size=4)
    be = block_encode(M)
    expect = 0.5 * (1 + psi @ M @ psi / (be.alpha * psi @ psi))
    assert hadamard_test_diag(be, prepare_state(psi)) == pytest.approx(expect, abs=1e-10)


def test_null_space_gives_half():
    M = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert hadamard_test_diag(block_encode(M), prepare_state([1.0, -1.0])) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_cross_matches_dense(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(8, 8))
    phi, psi = rng.normal(size=8), rng.normal(size=8)
    be = block_encode(M)
    u, v = psi / np.linalg.norm(psi), phi / np.linalg.norm(phi)
    p = hadamard_test_cross(be, prepare_state(phi), prepare_state(psi))
    assert p == pytest.approx(0.5 * (1 + v @ M @ u / be.alpha), abs=1e-10)
    # reduces to the diagonal test when both states agree
    assert hadamard_test_cross(be, prepare_state(psi), prepare_state(psi)) == pytest.approx(
        hadamard_test_diag(be, prepare_state(psi)), abs=1e-12
    )


def test_cross_orthogonal_gives_half():
    M = np.diag([1.0, 2.0])
    be = block_encode(M)
    # phi orthogonal to M psi
    assert hadamard_test_cross(be, prepare_state([0.0, 1.0]), prepare_state([1.0, 0.0])) == pytest.approx(0.5)


def test_qubit_mismatch():
    be = block_encode(np.eye(4))
    with pytest.raises(CircuitError):
        hadamard_test_diag(be, prepare_state([1.0, 1.0]))
    with pytest.raises(CircuitError):
        hadamard_test_cross(be, prepare_state([1.0, 1.0]), prepare_state([1.0, 0, 0, 1]))


# -- sampling -----------------------------------------------------------------------


def test_sample_certain_outcome():
    assert sample_p0(1.0, 17, seed=3) == 1.0
    assert sample_p0(0.0, 17, seed=3) == 0.0


def test_sample_concentration():
    hits = [abs(sample_p0(0.5, 10**6, seed=s) - 0.5) <= 5e-3 for s in range(100)]
    assert all(hits)


def test_sample_reproducible_and_errors():
    assert sample_p0(0.3, 1000, seed=42) == sample_p0(0.3, 1000, seed=42)
    with pytest.raises(ValueError):
        sample_p0(0.5, 0, seed=1)
    with pytest.raises(ValueError):
        sample_p0(1.5, 10, seed=1)


# -- OpenQASM export ----------------------------------------------------------------


def test_qasm_export():
    be = block_encode(np.diag([1.0, -1.0]))
    c = hadamard_test_cross_circuit(be, prepare_state([1.0, 2.0]), prepare_state([3.0, -1.0]))
    text = to_qasm(c, measure=(0,))
    lines = text.splitlines()
    assert lines[0] == "OPENQASM 3.0;"
    assert "qubit[4] q;" in lines
    assert lines[-1] == "c[0] = measure q[0];"
    assert any(line.startswith("negctrl @ ry(") for line in lines)
    assert not any("ucry" in line for line in lines)


def test_qasm_plain_gates():
    text = to_qasm(Circuit(2, "bell").h(0).cx(0, 1))
    assert "h q[0];" in text and "cx q[0], q[1];" in text
