import numpy as np
import pytest

from cavityqed.models import RampSpec, SystemParams
from cavityqed.protocols.source import default_pulse, photon_source_experiment


def params():
    return SystemParams(g=1.0, kappa=0.05, gamma=0.08)


def test_no_pump_no_photon():
    out = photon_source_experiment(params(), RampSpec(10.0, 0.0), t_end=50.0, dt=1.0)
    assert out.emission_prob == 0.0
    assert out.free_space_prob == 0.0
    assert max(w for _, w in out.waveform) == 0.0


def test_bookkeeping_and_waveform():
    p = params()
    out = photon_source_experiment(p, RampSpec(20.0, 1.0, "linear"), t_end=120.0, dt=0.25)
    assert out.emission_prob + out.free_space_prob + out.residual <= 1 + 1e-6
    assert out.residual >= 0
    t = np.array([x for x, _ in out.waveform])
    w = np.array([y for _, y in out.waveform])
    assert t[0] == 0.0 and t[-1] == pytest.approx(120.0)
    assert np.all(w >= -1e-12)
    # the integrated cavity flux is the emission probability
    integral = float(np.sum(0.5 * (w[1:] + w[:-1]) * np.diff(t)))
    assert integral == pytest.approx(out.emission_prob, abs=2e-3)


def test_faster_ramp_loses_more():
    p = params()
    slow = photon_source_experiment(p, default_pulse(p, 50.0), dt=1.0)
    fast = photon_source_experiment(p, RampSpec(2.0, 2.0), dt=1.0)
    assert slow.emission_prob > 0.9
    assert fast.free_space_prob > slow.free_space_prob
