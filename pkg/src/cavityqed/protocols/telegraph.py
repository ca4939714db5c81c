"""Heralded entanglement from macroscopic dark periods in the cavity output."""

from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..linalg import PureState, basis
from ..models import SystemParams, build_telegraph_system, singlet_state, telegraph_timescales
from ..trajectory import Ensemble, PhotonRecord, derive_seed, run_ensemble, thin_records

LIGHT = "light"
DARK = "dark"
MIN_PERIODS = 10


def c40_params(n_max: int = 2) -> SystemParams:
    """Default operating point at cooperativity 40.

    g = kappa = 1, gamma = 1/40. omega_m stays below gamma, and
    omega_l^2 / (4 delta omega_m) = 0.1.
    """
    return SystemParams(g=1.0, kappa=1.0, gamma=1.0 / 40, delta=20.0, omega_l=0.4, omega_m=0.02, n_max=n_max)


class Period(NamedTuple):
    kind: str
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


def _click_times(records) -> np.ndarray:
    if len(records) and isinstance(records[0], PhotonRecord):
        return np.array(sorted(r.time for r in records if r.detected), dtype=float)
    return np.sort(np.asarray(records, dtype=float))


def segment_periods(records: Sequence[PhotonRecord] | Sequence[float], threshold: float, t_end: float) -> list[Period]:
    """Split [0, t_end] into light and dark periods from detected click times.

    A gap between clicks longer than ``threshold`` is dark from
    ``threshold`` after the last click to the next click; the first
    ``threshold`` of the gap still counts as light. A leading gap longer than
    the threshold is dark from 0.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    clicks = _click_times(records)
    clicks = clicks[(clicks >= 0) & (clicks <= t_end)]
    if clicks.size == 0:
        return [Period(DARK, 0.0, float(t_end))]
    periods = []
    if clicks[0] > threshold:
        periods.append(Period(DARK, 0.0, float(clicks[0])))
        light_start = float(clicks[0])
    else:
        light_start = 0.0
    gaps = np.diff(clicks)
    for i in np.flatnonzero(gaps > threshold):
        split = float(clicks[i] + threshold)
        periods.append(Period(LIGHT, light_start, split))
        periods.append(Period(DARK, split, float(clicks[i + 1])))
        light_start = float(clicks[i + 1])
    last = float(clicks[-1])
    if t_end - last > threshold:
        periods.append(Period(LIGHT, light_start, last + threshold))
        periods.append(Period(DARK, last + threshold, float(t_end)))
    else:
        periods.append(Period(LIGHT, light_start, float(t_end)))
    return periods


def default_threshold(t_cav: float, t_dark: float, t_light: float) -> float:
    """Threshold balancing false dark periods inside light periods against missed short dark periods.

    Spurious dark periods per light period scale as (t_light/t_cav) exp(-x/t_cav)
    and missed dark periods as x/t_dark; their sum is minimal at
    x = t_cav ln(t_light t_dark / t_cav^2).
    """
    return t_cav * max(5.0, math.log(t_light * t_dark / t_cav**2))


@dataclass(frozen=True)
class TelegraphAnalysis:
    periods: tuple[tuple[Period, ...], ...]
    t_cav_est: float
    t_dark_est: float
    t_light_est: float
    threshold_used: float
    n_light: int
    n_dark: int
    low_confidence: bool
    degenerate: bool
    dark_fidelity: float | None
    n_dark_samples: int


def analyze_records(
    click_records: Sequence[Sequence[PhotonRecord]],
    threshold: float,
    t_end: float,
) -> tuple[list[list[Period]], float, float, float, int, int]:
    """Segment every trajectory and estimate T_cav, T_dark and T_light.

    Periods cut by the start or the end of a trajectory are left out of the
    duration means. T_cav is the mean click spacing inside light periods.
    """
    all_periods = []
    dark, light, spacings = [], [], []
    for recs in click_records:
        periods = segment_periods(recs, threshold, t_end)
        all_periods.append(periods)
        for per in periods[1:-1]:
            (dark if per.kind == DARK else light).append(per.duration)
        clicks = _click_times(recs)
        for per in periods:
            if per.kind != LIGHT:
                continue
            inside = clicks[(clicks >= per.start) & (clicks <= per.end)]
            if inside.size > 1:
                spacings.extend(np.diff(inside))

    def mean(xs):
        return float(np.mean(xs)) if len(xs) else math.nan

    return all_periods, mean(spacings), mean(dark), mean(light), len(light), len(dark)


def _dark_fidelity(ens: Ensemble, periods, threshold: float, min_length: float):
    target = singlet_state()
    fids = []
    for tr, pers in zip(ens.trajectories, periods):
        long_dark = [p for p in pers if p.kind == DARK and p.duration > min_length]
        if not long_dark:
            continue
        for t, state in tr.snapshots:
            if any(p.start < t < p.end for p in long_dark):
                amps = state.amplitudes.reshape(9, -1)
                overlap = target.amplitudes.conj() @ amps
                fids.append(float(np.vdot(overlap, overlap).real))
    if not fids:
        return None, 0
    return float(np.mean(fids)), len(fids)


def telegraph_experiment(
    p: SystemParams,
    t_end: float,
    n_traj: int,
    master_seed: int,
    threshold: float | None = None,
    eta: float = 1.0,
    psi0: PureState | None = None,
    snapshot_interval: float | None = None,
    dt: float = 1.0,
    workers: int = 1,
) -> tuple[Ensemble, TelegraphAnalysis]:
    """Simulate the fluorescence telegraph signal and analyse its periods.

    Trajectories start in |00> with an empty cavity unless ``psi0`` is given.
    Records are thinned with detector efficiency ``eta`` before segmentation.
    States are sampled every ``snapshot_interval`` (default: twice the
    threshold) to measure the singlet fidelity inside dark periods longer
    than five thresholds.
    """
    model = build_telegraph_system(p)
    if psi0 is None:
        psi0 = basis(model.dims, 0, 0, 0)
    degenerate = p.omega_l == 0
    if threshold is None:
        if degenerate:
            threshold = float(t_end)
        else:
            ts = telegraph_timescales(p)
            threshold = default_threshold(ts.t_cav, ts.t_dark, ts.t_light)
    if snapshot_interval is None:
        snapshot_interval = 2 * threshold
    snaps = list(np.arange(snapshot_interval, t_end, snapshot_interval))
    ens = run_ensemble(model, psi0, n_traj, t_end, dt, master_seed, snapshot_times=snaps, workers=workers, params=p)
    if eta < 1:
        recs = [thin_records(tr.records, eta, derive_seed(master_seed, i, stream=1)) for i, tr in enumerate(ens.trajectories)]
    else:
        recs = [tr.records for tr in ens.trajectories]
    periods, t_cav, t_dark, t_light, n_light, n_dark = analyze_records(recs, threshold, t_end)
    if not any(r.detected for rs in recs for r in rs):
        degenerate = True
    dark_fid, n_samples = _dark_fidelity(ens, periods, threshold, 5 * threshold)
    low = n_light < MIN_PERIODS or n_dark < MIN_PERIODS
    if low and not degenerate:
        warnings.warn(
            f"only {n_light} light and {n_dark} dark periods; timescale estimates are low-confidence",
            stacklevel=2,
        )
    analysis = TelegraphAnalysis(
        tuple(tuple(ps) for ps in periods),
        t_cav,
        t_dark,
        t_light,
        float(threshold),
        n_light,
        n_dark,
        low,
        degenerate,
        dark_fid,
        n_samples,
    )
    return ens, analysis
