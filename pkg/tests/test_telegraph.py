import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavityqed.models import CAVITY_OUTPUT, RegimeWarning, telegraph_timescales
from cavityqed.protocols.telegraph import (
    DARK,
    LIGHT,
    c40_params,
    default_threshold,
    segment_periods,
    telegraph_experiment,
)
from cavityqed.trajectory import PhotonRecord


def test_empty_record_is_one_dark_period():
    assert segment_periods([], 5.0, 100.0) == [(DARK, 0.0, 100.0)]


def test_segment_construction():
    per = segment_periods([1, 2, 3, 103, 104], 10.0, 110.0)
    assert [p.kind for p in per] == [LIGHT, DARK, LIGHT]
    assert per[0].end == pytest.approx(13.0)
    assert per[1].start == pytest.approx(13.0) and per[1].end == pytest.approx(103.0)
    assert per[2].start == pytest.approx(103.0) and per[2].end == 110.0


def test_leading_and_trailing_gaps():
    per = segment_periods([50, 51], 10.0, 100.0)
    assert [p.kind for p in per] == [DARK, LIGHT, DARK]
    assert per[0] == (DARK, 0.0, 50.0)
    assert per[2].start == pytest.approx(61.0) and per[2].end == 100.0


def test_records_input_uses_detected_only():
    recs = [PhotonRecord(1.0, "cavity", CAVITY_OUTPUT, True), PhotonRecord(50.0, "cavity", CAVITY_OUTPUT, False)]
    per = segment_periods(recs, 10.0, 100.0)
    assert [p.kind for p in per] == [LIGHT, DARK]


def test_threshold_must_be_positive():
    with pytest.raises(ValueError):
        segment_periods([1.0], 0.0, 10.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1000, allow_nan=False), max_size=60), st.floats(0.1, 200))
def test_periods_partition(clicks, threshold):
    per = segment_periods(clicks, threshold, 1000.0)
    assert per[0].start == 0.0 and per[-1].end == 1000.0
    for a, b in itertools.pairwise(per):
        assert a.end == b.start
        assert a.kind != b.kind
    assert math.isclose(sum(p.duration for p in per), 1000.0)
    assert all(p.duration >= 0 for p in per)


def test_poisson_false_dark_rate():
    rng = np.random.default_rng(0)
    n = 200000
    clicks = np.cumsum(rng.exponential(1.0, n))
    per = segment_periods(clicks, 5.0, float(clicks[-1]))
    rate = sum(p.kind == DARK for p in per) / n
    expected = math.exp(-5)
    assert abs(rate - expected) < 4 * math.sqrt(expected / n)


def test_default_threshold():
    ts = telegraph_timescales(c40_params())
    th = default_threshold(ts.t_cav, ts.t_dark, ts.t_light)
    assert th == pytest.approx(ts.t_cav * math.log(ts.t_light * ts.t_dark / ts.t_cav**2))
    assert th > 5 * ts.t_cav
    assert default_threshold(1.0, 2.0, 2.0) == 5.0


def test_degenerate_without_laser():
    p = c40_params().replace(omega_l=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        ens, an = telegraph_experiment(p, 1e5, 2, master_seed=0)
    assert an.degenerate
    assert all(len(per) == 1 and per[0].kind == DARK for per in an.periods)
    assert all(not tr.records for tr in ens.trajectories)


def test_short_run_flags_low_confidence_and_dark_fidelity():
    p = c40_params()
    ts = telegraph_timescales(p)
    with pytest.warns(UserWarning, match="low-confidence"):
        ens, an = telegraph_experiment(p, 4 * (ts.t_dark + ts.t_light), 2, master_seed=3)
    assert an.low_confidence
    for per in an.periods:
        assert per[0].start == 0.0 and per[-1].end == pytest.approx(ens.t_end)
    assert an.n_dark_samples > 0
    assert an.dark_fidelity > 0.9
    assert an.t_cav_est == pytest.approx(ts.t_cav, rel=0.2)


@pytest.mark.filterwarnings("ignore:only .* periods")
def test_thinned_run_is_deterministic():
    p = c40_params()
    a = telegraph_experiment(p, 3e5, 2, master_seed=4, eta=0.3)[1]
    b = telegraph_experiment(p, 3e5, 2, master_seed=4, eta=0.3)[1]
    assert a.periods == b.periods
