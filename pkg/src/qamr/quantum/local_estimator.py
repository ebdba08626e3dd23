"""Local error estimators reconstructed from Hadamard-test probabilities.

Every term of the squared estimator is a bilinear form ``x^T M y`` with
``M`` a local estimator matrix. It is read off a Hadamard test as
``alpha ||x|| ||y|| (2 p0 - 1)`` where ``alpha`` is the block-encoding
subnormalisation and ``x``, ``y`` are the vectors whose normalised states
are prepared.

Two embeddings are supported. ``local`` encodes only the dense local block
(3x3 padded to 4x4, or 5x5 padded to 8x8) and prepares the restricted
sub-state of the global vector, scaled by its sub-norm. ``global`` places
the block at its global indices in a ``2^n x 2^n`` zero matrix and prepares
the full normalised states, as a circuit on the whole system would.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..estimator import EstimatorError, LocalEstimator, LocalMatrices
from .blockencoding import block_encode, embed
from .hadamard import hadamard_test_cross, hadamard_test_diag, sample_p0
from .stateprep import n_qubits_for, pad, prepare_state

MODES = ("exact", "shots")
EMBEDDINGS = ("local", "global")


@dataclass(frozen=True, eq=False)
class Term:
    """One bilinear term ``coef * Re(left^T matrix right)`` of family ``family``."""

    family: int  # 1..4
    label: str
    coef: float
    matrix: np.ndarray
    left: np.ndarray
    right: np.ndarray
    left_space: str  # "E" or "F"
    right_space: str
    left_index: np.ndarray  # global indices of the entries of ``left``
    right_index: np.ndarray

    def classical(self) -> float:
        return float(self.coef * (self.left @ self.matrix @ self.right))


@dataclass
class TermResult:
    term: Term
    value: float  # coef times the reconstructed bilinear form
    alpha: float
    p0: float
    qubits: int


@dataclass
class ElementResult:
    element: int
    eta_sq: np.ndarray  # (4,)
    terms: list[TermResult] = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(self.eta_sq.sum())


def _real(v: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(v)
    if np.iscomplexobj(v):
        if np.any(np.abs(v.imag) > 0):
            raise EstimatorError(f"{what} must be real for Ry-based state preparation")
        v = v.real
    return v.astype(float)


def element_terms(k: int, lm: LocalMatrices, e_full: np.ndarray, f_coeffs: np.ndarray) -> list[Term]:
    """The 25 bilinear terms of element ``k`` (6 volume residual, 1 divergence, 9 + 9 face jumps)."""
    dofs = lm.elem_dofs[k]
    fidx = 3 * k + np.arange(3)
    eK = e_full[dofs]
    fK = f_coeffs[k]
    M, S, C, D = lm.M[k], lm.S[k], lm.C[k], lm.D[k]
    terms = [
        Term(1, "F.M.F", 1.0, M, fK, fK, "F", "F", fidx, fidx),
        Term(1, "E.C.E", 1.0, C, eK, eK, "E", "E", dofs, dofs),
        Term(1, "E.M.E", 1.0, M, eK, eK, "E", "E", dofs, dofs),
        Term(1, "F.S.E", -2.0, S, fK, eK, "F", "E", fidx, dofs),
        Term(1, "F.M.E", 2.0, M, fK, eK, "F", "E", fidx, dofs),
        Term(1, "E.S.E", -2.0, S, eK, eK, "E", "E", dofs, dofs),
        Term(2, "E.D.E", 1.0, D, eK, eK, "E", "E", dofs, dofs),
    ]
    for f, _side in lm.element_faces(k):
        fd = lm.face_dofs[f]
        eF = e_full[fd]
        for family, blocks in ((3, (lm.C11, lm.C22, lm.C12)), (4, (lm.M11, lm.M22, lm.M12))):
            for label, coef, B in zip(("11", "22", "12"), (0.5, 0.5, 1.0), blocks):
                terms.append(Term(family, f"face{f}.{label}", coef, B[f], eF, eF, "E", "E", fd, fd))
    return terms


class _GlobalSpace:
    """Zero-padded global vectors and preparations shared by all global-mode terms."""

    def __init__(self, e_state, f_state, n_max: int):
        self.n = max(n_qubits_for(len(e_state)), n_qubits_for(len(f_state)))
        if self.n > n_max:
            raise EstimatorError(
                f"global embedding needs {self.n} qubits, above the cap of {n_max}; use the local embedding"
            )
        self.states = {"E": pad(e_state, self.n), "F": pad(f_state, self.n)}
        self.preps = {s: prepare_state(v, self.n) for s, v in self.states.items()}


def _evaluate(term: Term, norms: dict, space: _GlobalSpace | None):
    """Return (encoding, p0, scale) with ``Re(left^T M right) = scale * (2 p0 - 1)``, or None if the term vanishes."""
    if not np.any(term.matrix):
        return None
    if space is None:
        nl, nr = np.linalg.norm(term.left), np.linalg.norm(term.right)
        if nl == 0.0 or nr == 0.0:
            return None
        be = block_encode(embed(term.matrix))
        left = prepare_state(term.left, be.n)
        same = term.left_space == term.right_space and np.array_equal(term.left_index, term.right_index)
        right = left if same else prepare_state(term.right, be.n)
    else:
        nl, nr = norms[term.left_space], norms[term.right_space]
        G = np.zeros((2**space.n, 2**space.n))
        G[np.ix_(term.left_index, term.right_index)] = term.matrix
        be = block_encode(G)
        left, right = space.preps[term.left_space], space.preps[term.right_space]
        same = term.left_space == term.right_space
    p0 = hadamard_test_diag(be, left) if same else hadamard_test_cross(be, left, right)
    return be, p0, be.alpha * nl * nr


def quantum_local_estimator(
    k: int,
    lm: LocalMatrices,
    e_state,
    f_state,
    norm_e: float | None,
    norm_f: float | None,
    mode: str = "exact",
    shots: int | None = None,
    seed=None,
    embedding: str = "local",
    global_max_qubits: int = 6,
    _space: _GlobalSpace | None = None,
) -> ElementResult:
    """Squared local estimator of element ``k`` from Hadamard-test readouts.

    ``e_state`` is the normalised full DOF vector, ``f_state`` the
    normalised flattened source coefficients (3 per element), and the
    norms rescale them back. In ``shots`` mode each term draws its own
    binomial estimate from a generator seeded with ``(seed..., k, term)``.
    """
    if norm_e is None or norm_f is None:
        raise EstimatorError("the norms of the DOF vector and of the source vector are required")
    if mode not in MODES:
        raise EstimatorError(f"mode must be one of {MODES}")
    if embedding not in EMBEDDINGS:
        raise EstimatorError(f"embedding must be one of {EMBEDDINGS}")
    if mode == "shots" and not shots:
        raise EstimatorError("shots mode needs a positive shot count")
    e_state = _real(e_state, "DOF vector")
    f_state = _real(f_state, "source vector")
    f_coeffs = (norm_f * f_state).reshape(-1, 3)
    terms = element_terms(k, lm, norm_e * e_state, f_coeffs)
    space = None
    if embedding == "global":
        space = _space or _GlobalSpace(e_state, f_state, global_max_qubits)
    norms = {"E": float(norm_e), "F": float(norm_f)}
    base = [] if seed is None else list(np.atleast_1d(seed).astype(int))
    out = ElementResult(k, np.zeros(4))
    for t_id, term in enumerate(terms):
        ev = _evaluate(term, norms, space)
        if ev is None:
            continue
        be, p0, scale = ev
        p = p0
        if mode == "shots":
            p = sample_p0(p0, shots, np.random.default_rng(base + [k, t_id]))
        value = term.coef * scale * (2.0 * p - 1.0)
        out.eta_sq[term.family - 1] += value
        out.terms.append(TermResult(term, value, be.alpha, p0, be.n_qubits + 1))
    return out


@dataclass
class QuantumEstimate:
    estimator: LocalEstimator
    alphas: np.ndarray  # alpha of every evaluated term
    max_qubits: int
    n_tests: int

    def alpha_stats(self) -> dict:
        a = self.alphas
        return {"count": int(a.size), "min": float(a.min()), "max": float(a.max()), "mean": float(a.mean())}


def quantum_estimate(
    lm: LocalMatrices,
    e_full,
    f_coeffs,
    mode: str = "exact",
    shots: int | None = None,
    seed=None,
    embedding: str = "local",
    global_max_qubits: int = 6,
    elements=None,
) -> QuantumEstimate:
    """Run :func:`quantum_local_estimator` over the mesh.

    The DOF and source vectors are normalised here and their norms passed
    on, mirroring how the classical solution is loaded into a state.
    """
    e_full = _real(e_full, "DOF vector")
    f_flat = _real(f_coeffs, "source vector").ravel()
    norm_e, norm_f = float(np.linalg.norm(e_full)), float(np.linalg.norm(f_flat))
    if norm_e == 0.0 or norm_f == 0.0:
        raise EstimatorError("cannot encode a zero DOF or source vector")
    e_state, f_state = e_full / norm_e, f_flat / norm_f
    space = _GlobalSpace(e_state, f_state, global_max_qubits) if embedding == "global" else None
    ks = range(lm.n_elements) if elements is None else elements
    eta = np.zeros((lm.n_elements, 4))
    alphas, qubits, tests = [], 0, 0
    for k in ks:
        r = quantum_local_estimator(
            k, lm, e_state, f_state, norm_e, norm_f, mode, shots, seed, embedding, global_max_qubits, space
        )
        eta[k] = r.eta_sq
        alphas += [t.alpha for t in r.terms]
        qubits = max([qubits] + [t.qubits for t in r.terms])
        tests += len(r.terms)
    est = LocalEstimator(eta[:, 0], eta[:, 1], eta[:, 2], eta[:, 3])
    return QuantumEstimate(est, np.array(alphas), qubits, tests)


def max_alpha(lm: LocalMatrices, embedding: str = "local", n_global: int | None = None) -> float:
    """Largest block-encoding subnormalisation over all nonzero terms, without building circuits."""
    elem = max(np.abs(B).max() for B in (lm.M, lm.S, lm.C, lm.D))
    face = max((np.abs(B).max() for B in (lm.C11, lm.C22, lm.C12, lm.M11, lm.M22, lm.M12) if B.size), default=0.0)
    if embedding == "global":
        if n_global is None:
            raise EstimatorError("global embedding needs the register size")
        return float(2**n_global * max(elem, face))
    return float(max(4 * elem, 8 * face))
