import numpy as np
import pytest

from qamr.estimator import EstimatorError, estimate_from_forms
from qamr.quantum.local_estimator import (
    element_terms,
    max_alpha,
    quantum_estimate,
    quantum_local_estimator,
)


def _states(b):
    e = b.e_full.real
    f = b.f_coeffs.real.ravel()
    return e / np.linalg.norm(e), f / np.linalg.norm(f), np.linalg.norm(e), np.linalg.norm(f)


def test_term_count_and_classical_sum(coarse):
    e, f = coarse.e_full.real, coarse.f_coeffs.real
    ref = estimate_from_forms(e, f, coarse.lm)
    for k in range(coarse.mesh.n_triangles):
        terms = element_terms(k, coarse.lm, e, f)
        n_faces = len(coarse.lm.element_faces(k))
        assert len(terms) == 7 + 6 * n_faces
        assert sum(t.classical() for t in terms) == pytest.approx(ref.eta_k_sq[k], rel=1e-12)
    # interior elements carry the full 25 terms
    assert max(len(element_terms(k, coarse.lm, e, f)) for k in range(18)) == 25


def test_exact_mode_matches_forms(coarse, refined):
    for b in (coarse, refined):
        ref = estimate_from_forms(b.e_full, b.f_coeffs, b.lm)
        q = quantum_estimate(b.lm, b.e_full, b.f_coeffs)
        assert np.all(np.abs(q.estimator.eta_k_sq - ref.eta_k_sq) <= 1e-9 * (1 + ref.eta_k_sq))
        assert q.alphas.max() <= max_alpha(b.lm) * (1 + 1e-12)


def test_zero_field_only_source_term(coarse):
    e0 = np.zeros(coarse.dofmap.n_total)
    _, f_state, _, norm_f = _states(coarse)
    r = quantum_local_estimator(3, coarse.lm, e0, f_state, 0.0, norm_f)
    assert [t.term.label for t in r.terms] == ["F.M.F"]
    fK = coarse.f_coeffs.real[3]
    assert r.total == pytest.approx(fK @ coarse.lm.M[3] @ fK, rel=1e-12)


def test_global_embedding_equals_local(coarse):
    e_state, f_state, ne, nf = _states(coarse)
    for k in (0, 7):
        loc = quantum_local_estimator(k, coarse.lm, e_state, f_state, ne, nf)
        glob = quantum_local_estimator(k, coarse.lm, e_state, f_state, ne, nf, embedding="global")
        for a, b in zip(loc.terms, glob.terms):
            assert a.term.label == b.term.label
            assert abs(a.value - b.value) <= 1e-10
        assert max(t.qubits for t in glob.terms) == 1 + 7 + 6  # ancilla, FABLE ancillas, 6 system qubits


def test_global_embedding_cap(refined):
    e_state, f_state, ne, nf = _states(refined)
    with pytest.raises(EstimatorError, match="cap"):
        quantum_local_estimator(0, refined.lm, e_state, f_state, ne, nf, embedding="global")


def test_input_errors(coarse):
    e_state, f_state, ne, nf = _states(coarse)
    with pytest.raises(EstimatorError):
        quantum_local_estimator(0, coarse.lm, e_state, f_state, None, nf)
    with pytest.raises(EstimatorError):
        quantum_local_estimator(0, coarse.lm, e_state * 1j, f_state, ne, nf)
    with pytest.raises(EstimatorError):
        quantum_local_estimator(0, coarse.lm, e_state, f_state, ne, nf, mode="shots", shots=0)


def test_shots_error_shrinks_like_inverse_sqrt(coarse):
    e_state, f_state, ne, nf = _states(coarse)
    exact = quantum_local_estimator(0, coarse.lm, e_state, f_state, ne, nf).total
    rms = []
    for shots in (10**3, 10**5, 10**7):
        vals = [
            quantum_local_estimator(0, coarse.lm, e_state, f_state, ne, nf, "shots", shots, seed=s).total
            for s in range(30)
        ]
        rms.append(np.sqrt(np.mean((np.array(vals) - exact) ** 2)))
    for a, b in zip(rms, rms[1:]):
        assert 10 / 3 <= a / b <= 10 * 3


def test_sampling_reproducible(coarse):
    e_state, f_state, ne, nf = _states(coarse)
    run = lambda: quantum_local_estimator(2, coarse.lm, e_state, f_state, ne, nf, "shots", 500, seed=[1, 2]).total  # noqa: E731
    assert run() == run()
