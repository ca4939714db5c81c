"""Repeat-until-success phase gate heralded by a photon-pair measurement.

Each atomic qubit emits a time-bin photon, |0> -> |0, E> and |1> -> |1, L>.
Projecting the photon pair onto a basis state b leaves the atoms in
diag(conj b) applied to their input, so the photon state fixes the atomic
map: a maximally entangled b acts as a controlled phase up to local phases,
a product b as a local operation (or a projection).
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..linalg import MixedState, PureState, partial_trace
from ..trajectory import derive_seed

QUBIT = (2,)
PAIR = (2, 2)
ENTANGLING = "entangling"
LOCAL = "local"
FAILURE = "failure"
ORTHO_TOL = 1e-10
RUS_STREAM = 3


@dataclass(frozen=True)
class RusAttempt:
    """One encode-and-measure round.

    ``outcome_index`` is None when a photon was lost and no detector fired.
    ``post_state`` is the atomic state: pure after a detected pair, the
    reduced (mixed) state after a loss. ``false_herald`` marks a dark count
    that completed the pair on a loss event; then ``herald`` is true although
    ``photons_lost`` > 0, and the outcome is what the detectors reported.
    """

    outcome_index: int | None
    outcome_class: str
    post_state: PureState | MixedState
    herald: bool
    photons_lost: int
    false_herald: bool = False


@dataclass(frozen=True)
class RusGateResult:
    final_state: PureState | MixedState
    attempts_used: int
    success: bool
    class_history: tuple[str, ...]
    attempts: tuple[RusAttempt, ...]


def rus_encode(atoms: PureState) -> PureState:
    """Map each qubit a|0> + b|1> to a|0, E> + b|1, L>.

    A single qubit gives dims (2, 2) ordered (atom, photon); two qubits give
    (2, 2, 2, 2) ordered (atom 1, atom 2, photon 1, photon 2).
    """
    if not atoms.is_normalized():
        raise ValueError("input state must be normalized")
    if atoms.dims == QUBIT:
        out = np.zeros((2, 2), dtype=complex)
        out[0, 0], out[1, 1] = atoms.amplitudes
        return PureState(PAIR, out)
    if atoms.dims == PAIR:
        c = atoms.amplitudes.reshape(2, 2)
        out = np.zeros((2, 2, 2, 2), dtype=complex)
        for i in range(2):
            for j in range(2):
                out[i, j, i, j] = c[i, j]
        return PureState((2, 2, 2, 2), out)
    raise ValueError(f"expected one or two qubits, got dims {atoms.dims}")


def _pair(ee, el, le, ll) -> PureState:
    return PureState(PAIR, np.array([ee, el, le, ll], dtype=complex))


def default_basis() -> tuple[PureState, ...]:
    """(EE + LL)/sqrt2, (EE - LL)/sqrt2, EL, LE."""
    s = 1 / math.sqrt(2)
    return (_pair(s, 0, 0, s), _pair(s, 0, 0, -s), _pair(0, 1, 0, 0), _pair(0, 0, 1, 0))


def deterministic_basis() -> tuple[PureState, ...]:
    """Columns of CZ (H x H): every outcome is an equal superposition of all four bins."""
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    m = np.diag([1, 1, 1, -1]) @ np.kron(h, h)
    return tuple(PureState(PAIR, m[:, k]) for k in range(4))


def check_basis(basis: Sequence[PureState]) -> None:
    if len(basis) != 4 or any(b.dims != PAIR for b in basis):
        raise ValueError("need four two-photon basis states")
    m = np.column_stack([b.amplitudes for b in basis])
    err = np.max(np.abs(m.conj().T @ m - np.eye(4)))
    if err > ORTHO_TOL:
        raise ValueError(f"measurement basis is not orthonormal (|B^dag B - I| = {err:.3e})")


def concurrence(b: PureState) -> float:
    c = b.amplitudes
    return float(2 * abs(c[0] * c[3] - c[1] * c[2]))


def classify(b: PureState, tol: float = 1e-9) -> str:
    """entangling for a maximally entangled pair state, local for a product state."""
    c = concurrence(b)
    if abs(c - 1) < tol:
        return ENTANGLING
    if c < tol:
        return LOCAL
    return FAILURE


def induced_map(b: PureState) -> np.ndarray:
    """Atomic operator left behind by projecting the photons onto b."""
    return np.diag(b.amplitudes.conj())


def local_correction(b: PureState) -> np.ndarray:
    """Diagonal product unitary that removes the local phases phi_01, phi_10 of b.

    Phases are read relative to the first non-zero amplitude. When the |EL>
    and |LE> amplitudes both vanish, the phase of |LL> is put on qubit 1.
    """
    c = b.amplitudes
    ref = c[np.flatnonzero(np.abs(c) > ORTHO_TOL)[0]]
    phi = [np.angle(x / ref) if abs(x) > ORTHO_TOL else None for x in c]
    beta = phi[1]
    alpha = phi[2]
    if alpha is None and beta is None:
        alpha, beta = (phi[3] or 0.0), 0.0
    elif alpha is None:
        alpha = (phi[3] or 0.0) - beta
    elif beta is None:
        beta = (phi[3] or 0.0) - alpha
    return np.kron(np.diag([1, np.exp(1j * alpha)]), np.diag([1, np.exp(1j * beta)]))


def outcome_weights(joint: PureState, basis: Sequence[PureState]) -> np.ndarray:
    """Born weights of the four photon-pair outcomes (no loss)."""
    return np.array([float(np.vdot(v, v).real) for v in _projections(joint, basis)])


def _projections(joint: PureState, basis: Sequence[PureState]) -> list[np.ndarray]:
    if joint.dims != (2, 2, 2, 2):
        raise ValueError(f"expected an encoded two-qubit state, got dims {joint.dims}")
    t = joint.amplitudes.reshape(4, 4)
    return [t @ b.amplitudes.conj() for b in basis]


def rus_measure(
    joint: PureState,
    basis: Sequence[PureState],
    loss_prob: float,
    dark_count_prob: float,
    seed: int,
) -> RusAttempt:
    """Sample photon loss and the photon-pair measurement on an encoded state.

    Each photon is lost independently with ``loss_prob``. A detected pair
    projects onto basis state k with its Born weight and leaves the
    renormalized atomic state.
    """
    check_basis(basis)
    for name, val in (("loss_prob", loss_prob), ("dark_count_prob", dark_count_prob)):
        if not 0 <= val <= 1:
            raise ValueError(f"{name} must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    lost = int(rng.binomial(2, loss_prob))
    if lost:
        atoms = partial_trace(joint.to_mixed(), [0, 1])
        if rng.random() < dark_count_prob:
            k = int(rng.integers(4))
            return RusAttempt(k, classify(basis[k]), atoms, True, lost, True)
        return RusAttempt(None, FAILURE, atoms, False, lost)
    vecs = _projections(joint, basis)
    w = np.array([float(np.vdot(v, v).real) for v in vecs])
    k = int(rng.choice(4, p=w / w.sum()))
    post = PureState(PAIR, vecs[k] / math.sqrt(w[k]))
    return RusAttempt(k, classify(basis[k]), post, True, 0)


def rus_gate(
    atoms: PureState,
    loss_prob: float,
    max_attempts: int,
    seed: int,
    basis: Sequence[PureState] | None = None,
    dark_count_prob: float = 0.0,
) -> RusGateResult:
    """Encode, measure and correct until an entangling herald, a failure, or ``max_attempts``.

    Local outcomes get their phase correction and the (possibly projected)
    atoms are re-encoded. An entangling outcome gets its local correction,
    leaving a controlled-Z form, and ends the gate with success. Attempt i
    draws from the seed derived from (seed, i).
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    if basis is None:
        basis = default_basis()
    check_basis(basis)
    state: PureState | MixedState = atoms
    history, attempts = [], []
    for i in range(max_attempts):
        att = rus_measure(rus_encode(state), basis, loss_prob, dark_count_prob, derive_seed(seed, i, RUS_STREAM))
        attempts.append(att)
        history.append(att.outcome_class)
        state = att.post_state
        if att.outcome_index is not None:
            u = local_correction(basis[att.outcome_index])
            if isinstance(state, PureState):
                state = PureState(PAIR, u @ state.amplitudes)
            else:
                state = MixedState(PAIR, u @ state.data @ u.conj().T)
        if att.outcome_class == ENTANGLING:
            return RusGateResult(state, i + 1, True, tuple(history), tuple(attempts))
        if att.outcome_class == FAILURE or not isinstance(state, PureState):
            return RusGateResult(state, i + 1, False, tuple(history), tuple(attempts))
    return RusGateResult(state, max_attempts, False, tuple(history), tuple(attempts))
