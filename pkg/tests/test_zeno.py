import math
import warnings

import numpy as np
import pytest

from cavityqed.linalg import PureState, basis
from cavityqed.models import RegimeError, RegimeWarning
from cavityqed.protocols.zeno import (
    check_zeno_regime,
    embed_qubits,
    fig3_params,
    standard_inputs,
    sweep_gate,
    zeno_gate_experiment,
)

INPUTS = standard_inputs()


def test_dark_input_is_untouched():
    out = zeno_gate_experiment(fig3_params(), basis((2, 2), 0, 0))
    assert abs(out.conditional_fidelity - 1) < 1e-6
    assert abs(out.success_prob - 1) < 1e-6


def test_operating_point():
    p = fig3_params()
    f01 = zeno_gate_experiment(p, INPUTS["01"])
    bell = zeno_gate_experiment(p, INPUTS["bell00+11"])
    assert f01.conditional_fidelity > 0.99
    assert bell.success_prob > 0.90
    assert f01.gate_time == pytest.approx(math.pi / 0.004, rel=1e-12)
    assert f01.params_used == p
    for o in (f01, bell):
        assert 0 <= o.conditional_fidelity <= 1 and 0 <= o.success_prob <= 1


def test_rk4_agrees_with_expm():
    p = fig3_params()
    a = zeno_gate_experiment(p, INPUTS["bell00+11"], method="expm")
    b = zeno_gate_experiment(p, INPUTS["bell00+11"], method="rk4")
    assert abs(a.success_prob - b.success_prob) < 1e-6
    assert abs(a.conditional_fidelity - b.conditional_fidelity) < 1e-6
    with pytest.raises(ValueError):
        zeno_gate_experiment(p, INPUTS["01"], method="euler")


def test_halving_omega_quadruples_gate_time():
    p = fig3_params()
    full = zeno_gate_experiment(p, INPUTS["bell00+11"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        half = zeno_gate_experiment(p.replace(omega=p.omega / 2), INPUTS["bell00+11"])
    assert half.gate_time / full.gate_time == pytest.approx(4, rel=0.01)
    assert half.conditional_fidelity > full.conditional_fidelity - 0.01


@pytest.mark.filterwarnings("ignore::cavityqed.models.RegimeWarning")
def test_success_decreases_with_loss():
    p = fig3_params()
    state = INPUTS["bell00+11"]
    for field in ("gamma", "kappa"):
        probs = [zeno_gate_experiment(p.replace(**{field: getattr(p, field) * s}), state).success_prob for s in (1, 3, 10)]
        assert probs[0] > probs[1] > probs[2]


def test_single_point_sweep_matches_experiment():
    p = fig3_params()
    res = sweep_gate(p, [0.1], [1.25])
    for label, state in INPUTS.items():
        row = res.at(0.1, 1.25, label)
        direct = zeno_gate_experiment(p, state, label)
        assert row.conditional_fidelity == direct.conditional_fidelity
        assert row.success_prob == direct.success_prob
    assert (res.best_omega, res.best_delta) == (0.1, 1.25)
    with pytest.raises(KeyError):
        res.at(0.2, 1.25, "01")
    with pytest.raises(ValueError):
        sweep_gate(p, [], [1.0])


def test_sweep_bounds():
    res = sweep_gate(fig3_params(), [0.05, 0.15], [0.5, 1.5])
    assert len(res.rows) == 8
    for r in res.rows:
        assert 0 <= r.conditional_fidelity <= 1
        assert 0 <= r.success_prob <= 1


def test_regime_checks():
    with pytest.raises(RegimeError):
        check_zeno_regime(fig3_params(omega=3.0, delta=1.0))
    with pytest.raises(RegimeError):
        zeno_gate_experiment(fig3_params(delta=0.0), INPUTS["01"])
    with pytest.warns(RegimeWarning):
        check_zeno_regime(fig3_params(omega=0.5, delta=1.0))


def test_input_validation():
    with pytest.raises(ValueError):
        zeno_gate_experiment(fig3_params(), PureState((2, 2), [1, 1, 0, 0]))
    with pytest.raises(ValueError):
        embed_qubits(basis((3,), 0), 2)
    psi = embed_qubits(INPUTS["01"], 2)
    assert psi.dims == (3, 3, 3)
    assert np.allclose(psi.amplitudes, basis((3, 3, 3), 0, 1, 0).amplitudes)
