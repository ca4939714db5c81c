import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavityqed.linalg import MixedState, PureState, basis
from cavityqed.protocols.rus import (
    ENTANGLING,
    FAILURE,
    LOCAL,
    classify,
    concurrence,
    default_basis,
    deterministic_basis,
    induced_map,
    local_correction,
    outcome_weights,
    rus_encode,
    rus_gate,
    rus_measure,
)

PLUS = PureState((2,), np.array([1, 1]) / math.sqrt(2))
PLUSPLUS = PureState((2, 2), np.full(4, 0.5))
CZ = np.diag([1, 1, 1, -1])


def random_pair(seed):
    rng = np.random.default_rng(seed)
    return PureState((2, 2), rng.normal(size=4) + 1j * rng.normal(size=4)).normalized()


def test_encode_single_qubit():
    assert np.allclose(rus_encode(basis((2,), 0)).amplitudes, basis((2, 2), 0, 0).amplitudes)
    plus = rus_encode(PLUS)
    expected = (basis((2, 2), 0, 0).amplitudes + basis((2, 2), 1, 1).amplitudes) / math.sqrt(2)
    assert np.allclose(plus.amplitudes, expected)


def test_encode_two_qubits_keeps_amplitudes():
    state = random_pair(0)
    joint = rus_encode(state).amplitudes.reshape(2, 2, 2, 2)
    c = state.amplitudes.reshape(2, 2)
    for i in range(2):
        for j in range(2):
            assert joint[i, j, i, j] == c[i, j]
    assert abs(np.sum(np.abs(joint) ** 2) - 1) < 1e-12
    with pytest.raises(ValueError):
        rus_encode(PureState((2,), [1, 1]))
    with pytest.raises(ValueError):
        rus_encode(basis((3,), 0))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 2**31 - 1))
def test_encode_is_isometry(s1, s2):
    a, b = random_pair(s1), random_pair(s2)
    assert abs(rus_encode(a).inner(rus_encode(b)) - a.inner(b)) < 1e-10


def test_outcomes_on_plus_plus():
    joint = rus_encode(PLUSPLUS)
    w = outcome_weights(joint, default_basis())
    assert np.allclose(w, 0.25)
    seen = {}
    for seed in range(200):
        att = rus_measure(joint, default_basis(), 0.0, 0.0, seed)
        seen.setdefault(att.outcome_index, att)
        if len(seen) == 4:
            break
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert abs(abs(np.vdot(bell, seen[0].post_state.amplitudes)) - 1) < 1e-12
    assert seen[0].outcome_class == ENTANGLING
    assert np.allclose(np.abs(seen[2].post_state.amplitudes), basis((2, 2), 0, 1).amplitudes)
    assert seen[2].outcome_class == LOCAL
    for att in seen.values():
        assert att.herald and att.photons_lost == 0
        assert att.post_state.is_normalized()


@pytest.mark.parametrize("seed", range(5))
def test_weights_sum_to_one(seed):
    joint = rus_encode(random_pair(seed))
    for b in (default_basis(), deterministic_basis()):
        assert abs(outcome_weights(joint, b).sum() - 1) < 1e-10


def test_total_loss_never_heralds():
    joint = rus_encode(PLUSPLUS)
    for seed in range(50):
        att = rus_measure(joint, default_basis(), 1.0, 0.0, seed)
        assert not att.herald and att.photons_lost == 2 and att.outcome_class == FAILURE
        assert isinstance(att.post_state, MixedState)
        assert abs(att.post_state.trace - 1) < 1e-12


def test_dark_count_false_herald():
    joint = rus_encode(PLUSPLUS)
    att = rus_measure(joint, default_basis(), 1.0, 1.0, 0)
    assert att.herald and att.false_herald and att.photons_lost == 2


def test_loss_herald_rate():
    joint = rus_encode(PLUSPLUS)
    n = 10000
    heralds = sum(rus_measure(joint, default_basis(), 0.5, 0.0, s).herald for s in range(n))
    p = 0.25
    assert abs(heralds / n - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_basis_validation():
    bad = list(default_basis())
    bad[3] = bad[2]
    with pytest.raises(ValueError):
        rus_measure(rus_encode(PLUSPLUS), bad, 0.0, 0.0, 0)
    with pytest.raises(ValueError):
        rus_measure(rus_encode(PLUSPLUS), default_basis(), 1.5, 0.0, 0)


def test_classification():
    assert [classify(b) for b in default_basis()] == [ENTANGLING, ENTANGLING, LOCAL, LOCAL]
    assert all(classify(b) == ENTANGLING for b in deterministic_basis())
    partial = PureState((2, 2), np.array([math.cos(0.3), 0, 0, math.sin(0.3)]))
    assert classify(partial) == FAILURE
    assert concurrence(partial) == pytest.approx(math.sin(0.6))


def test_induced_map_is_conjugate_diagonal():
    b = deterministic_basis()[1]
    state = random_pair(7)
    joint = rus_encode(state)
    v = joint.amplitudes.reshape(4, 4) @ b.amplitudes.conj()
    assert np.allclose(v, induced_map(b) @ state.amplitudes)


@pytest.mark.parametrize("seed", range(4))
def test_deterministic_basis_gives_cz_for_every_outcome(seed):
    state = random_pair(seed)
    target = CZ @ state.amplitudes
    joint = rus_encode(state)
    for k, b in enumerate(deterministic_basis()):
        v = induced_map(b) @ state.amplitudes
        v = local_correction(b) @ (v / np.linalg.norm(v))
        assert abs(abs(np.vdot(target, v)) ** 2 - 1) < 1e-10
    assert np.allclose(outcome_weights(joint, deterministic_basis()), 0.25)


def test_gate_on_plus_plus():
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    for seed in range(30):
        r = rus_gate(PLUSPLUS, 0.0, 1, seed)
        assert r.attempts_used == 1
        if r.success:
            assert abs(np.vdot(bell, r.final_state.amplitudes)) ** 2 > 1 - 1e-10


def test_gate_retries_local_outcomes():
    results = [rus_gate(PLUSPLUS, 0.0, 5, seed) for seed in range(100)]
    assert any(r.attempts_used > 1 for r in results)
    for r in results:
        assert len(r.class_history) == r.attempts_used
        if r.success:
            assert r.class_history[-1] == ENTANGLING
            assert all(c == LOCAL for c in r.class_history[:-1])


def test_gate_failure_stops_after_one_attempt():
    r = rus_gate(PLUSPLUS, 1.0, 1, 0)
    assert r.attempts_used == 1 and not r.success
    r = rus_gate(PLUSPLUS, 1.0, 10, 0)
    assert r.attempts_used == 1 and not r.success
    with pytest.raises(ValueError):
        rus_gate(PLUSPLUS, 0.0, 0, 0)


def test_gate_deterministic_basis_is_cz():
    for seed in range(10):
        state = random_pair(100 + seed)
        r = rus_gate(state, 0.0, 1, seed, basis=deterministic_basis())
        assert r.success
        assert abs(abs(np.vdot(CZ @ state.amplitudes, r.final_state.amplitudes)) ** 2 - 1) < 1e-10


def test_gate_is_seeded():
    a = rus_gate(PLUSPLUS, 0.3, 5, 42)
    b = rus_gate(PLUSPLUS, 0.3, 5, 42)
    assert a.class_history == b.class_history
