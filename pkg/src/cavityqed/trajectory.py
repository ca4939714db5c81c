"""Quantum-jump trajectories, detector thinning and a Lindblad reference solver.

Trajectories follow the waiting-time formulation of the Monte Carlo
wavefunction method: a uniform threshold r is drawn, the un-normalized state
evolves under H - (i/2) sum L^dag L until its squared norm falls to r, and a
jump is applied in channel k with probability proportional to |L_k psi|^2.

For time-independent models the no-jump propagator is exact: matrix
exponentials at dyadic multiples of the step are precomputed once, and the
crossing time is found by binary descent down to dt/128. Time-dependent models
are stepped with RK4 and the crossing is located by bisection to dt/100.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .linalg import RK4_STEP_BOUND, MixedState, PureState, fidelity, partial_trace
from .models import CAVITY_OUTPUT, SystemModel

UNDERFLOW = 1e-14
_DESCENT_LEVELS = 7  # finest step is dt / 2**7


class TrajectoryError(RuntimeError):
    """A trajectory could not be integrated; carries the index and seed."""

    def __init__(self, message: str, index: int | None = None, seed: int | None = None):
        super().__init__(message)
        self.index = index
        self.seed = seed


@dataclass(frozen=True, slots=True)
class PhotonRecord:
    time: float
    channel: str
    detectability: str
    detected: bool


@dataclass(frozen=True)
class TrajectoryResult:
    records: tuple[PhotonRecord, ...]
    final_state: PureState
    seed: int
    snapshots: tuple[tuple[float, PureState], ...] = ()
    t_end: float = 0.0

    def detected_times(self) -> np.ndarray:
        return np.array([r.time for r in self.records if r.detected], dtype=float)


@dataclass(frozen=True)
class Ensemble:
    trajectories: tuple[TrajectoryResult, ...]
    master_seed: int
    params: object = None
    t_end: float = 0.0

    def __len__(self) -> int:
        return len(self.trajectories)

    def average_state(self, time: float | None = None) -> MixedState:
        """Mean of |psi><psi| over all trajectories, at a snapshot time or the end."""
        states = [_state_at(tr, time) for tr in self.trajectories]
        vecs = np.array([s.amplitudes for s in states])
        rho = vecs.T @ vecs.conj() / len(states)
        return MixedState(states[0].dims, rho)


def _state_at(tr: TrajectoryResult, time: float | None) -> PureState:
    if time is None:
        return tr.final_state
    for ts, s in tr.snapshots:
        if math.isclose(ts, time, rel_tol=1e-12, abs_tol=1e-12):
            return s
    raise KeyError(f"no snapshot at t = {time}")


def derive_seed(master_seed: int, index: int, stream: int = 0) -> int:
    """Per-trajectory seed, a pure function of (master_seed, index, stream)."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index), int(stream)))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# no-jump propagation
# ---------------------------------------------------------------------------


class _ExactStepper:
    """Dyadic-step exact propagators exp(-i H_nh tau) for a static model."""

    def __init__(self, h_nh: np.ndarray, dt: float, horizon: float):
        self.h_nh = h_nh
        top = max(0, math.ceil(math.log2(max(horizon, dt) / dt)))
        top = min(top, 40)
        self.taus = [dt * 2.0**j for j in range(top, -_DESCENT_LEVELS - 1, -1)]
        self.props = [scipy.linalg.expm(-1j * h_nh * tau) for tau in self.taus]
        self.resolution = self.taus[-1]

    def exact(self, tau: float) -> np.ndarray:
        return scipy.linalg.expm(-1j * self.h_nh * tau)

    def advance(self, t: float, psi: np.ndarray, r: float, stop: float):
        """Evolve toward ``stop``; return (t, psi, crossed)."""
        eps = 1e-12 * max(1.0, abs(stop))
        for tau, u in zip(self.taus, self.props):
            while stop - t >= tau - eps:
                cand = u @ psi
                if np.vdot(cand, cand).real > r:
                    psi = cand
                    t += tau
                else:
                    break
            else:
                continue
            # crossing lies inside [t, t + tau]: refine at the next level
            if tau == self.resolution:
                return t, psi, True
        left = stop - t
        if left > eps:
            cand = self.exact(left) @ psi
            if np.vdot(cand, cand).real <= r:
                return t, psi, True
            psi = cand
        return stop, psi, False


class _RK4Stepper:
    """Fixed-step RK4 for static or time-dependent models, bisection to dt/100."""

    def __init__(self, model: SystemModel, dt: float):
        self.model = model
        self.dt = dt
        self.decay = model.decay_operator()
        self.bound = model.norm_bound()
        self.static_h = None if model.time_dependent else model.static - 0.5j * self.decay

    def _h(self, t: float) -> np.ndarray:
        if self.static_h is not None:
            return self.static_h
        return self.model.h_matrix(t) - 0.5j * self.decay

    def propagate(self, t: float, psi: np.ndarray, h: float) -> np.ndarray:
        n = max(1, math.ceil(self.bound * h / RK4_STEP_BOUND))
        s = h / n
        for i in range(n):
            t0 = t + i * s
            h0 = self._h(t0)
            hm = self._h(t0 + 0.5 * s)
            h1 = self._h(t0 + s)
            k1 = -1j * (h0 @ psi)
            k2 = -1j * (hm @ (psi + 0.5 * s * k1))
            k3 = -1j * (hm @ (psi + 0.5 * s * k2))
            k4 = -1j * (h1 @ (psi + s * k3))
            psi = psi + s * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        return psi

    def advance(self, t: float, psi: np.ndarray, r: float, stop: float):
        eps = 1e-12 * max(1.0, abs(stop))
        while stop - t > eps:
            h = min(self.dt, stop - t)
            cand = self.propagate(t, psi, h)
            if np.vdot(cand, cand).real > r:
                psi, t = cand, t + h
                continue
            lo, hi = 0.0, h
            while hi - lo > self.dt / 100:
                mid = 0.5 * (lo + hi)
                c = self.propagate(t, psi, mid)
                if np.vdot(c, c).real > r:
                    lo = mid
                else:
                    hi = mid
            return t + hi, self.propagate(t, psi, hi), True
        return stop, psi, False


def _make_stepper(model: SystemModel, dt: float, horizon: float, method: str):
    if method == "auto":
        method = "rk4" if model.time_dependent else "exact"
    if method == "exact":
        if model.time_dependent:
            raise ValueError("exact propagation needs a time-independent model")
        return _ExactStepper(model.h_nonhermitian(), dt, horizon)
    if method == "rk4":
        return _RK4Stepper(model, dt)
    raise ValueError(f"unknown propagation method {method!r}")


def default_dt(model: SystemModel) -> float:
    """Largest step meeting the RK4 bound |H| dt <= 0.04."""
    return RK4_STEP_BOUND / max(model.norm_bound(), 1e-300)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


def _check_initial(model: SystemModel, psi0: PureState):
    if psi0.dims != tuple(model.dims):
        raise ValueError(f"initial state dims {psi0.dims} do not match model dims {model.dims}")
    if not psi0.is_normalized():
        raise ValueError("initial state must be normalized")


def _simulate(model, stepper, psi0: PureState, t_end: float, seed: int, snapshot_times) -> TrajectoryResult:
    rng = np.random.default_rng(seed)
    ops = [ch.operator.data for ch in model.jump_channels]
    chans = model.jump_channels
    psi = np.array(psi0.amplitudes)
    t = 0.0
    r = 1.0 - rng.random()
    records: list[PhotonRecord] = []
    snaps = []
    stops = sorted(float(s) for s in snapshot_times if 0 <= s <= t_end)
    stops.append(float(t_end))
    for i, stop in enumerate(stops):
        while True:
            t, psi, crossed = stepper.advance(t, psi, r, stop)
            n2 = np.vdot(psi, psi).real
            if not crossed:
                break
            if not ops:
                raise TrajectoryError(f"norm crossed the jump threshold at t = {t} without jump channels", seed=seed)
            weights = np.array([np.vdot(v, v).real for v in (L @ psi for L in ops)])
            total = weights.sum()
            if not total > 0 or not np.isfinite(total):
                raise TrajectoryError(f"no jump channel can fire at t = {t}", seed=seed)
            k = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
            k = min(k, len(ops) - 1)
            psi = ops[k] @ psi
            psi = psi / math.sqrt(weights[k])
            ch = chans[k]
            records.append(PhotonRecord(t, ch.label, ch.detectability, ch.detectability == CAVITY_OUTPUT))
            r = 1.0 - rng.random()
        if n2 < UNDERFLOW:
            raise TrajectoryError(f"state norm underflow ({n2:.3e}) at t = {t} without a jump", seed=seed)
        if not np.all(np.isfinite(psi)):
            raise TrajectoryError(f"non-finite state at t = {t}", seed=seed)
        state = PureState(psi0.dims, psi / math.sqrt(n2))
        if i < len(stops) - 1:
            snaps.append((stop, state))
    return TrajectoryResult(tuple(records), state, seed, tuple(snaps), float(t_end))


def run_trajectory(
    model: SystemModel,
    psi0: PureState,
    t_end: float,
    dt: float | None = None,
    seed: int = 0,
    snapshot_times: Sequence[float] = (),
    method: str = "auto",
) -> TrajectoryResult:
    """Simulate one quantum-jump trajectory from ``psi0`` over [0, t_end].

    Every jump is recorded; cavity-output jumps start out marked detected and
    detector efficiency is applied afterwards with ``thin_records``.
    ``method`` is ``"exact"`` (static models), ``"rk4"`` or ``"auto"``.
    """
    _check_initial(model, psi0)
    if dt is None:
        dt = default_dt(model)
    if not (dt > 0 and t_end >= 0):
        raise ValueError("need dt > 0 and t_end >= 0")
    stepper = _make_stepper(model, dt, t_end, method)
    return _simulate(model, stepper, psi0, t_end, seed, snapshot_times)


def _initial_sampler(psi0: PureState | MixedState):
    if isinstance(psi0, PureState):
        return None
    w, v = np.linalg.eigh(0.5 * (psi0.data + psi0.data.conj().T))
    w = np.clip(w, 0.0, None)
    keep = w > 1e-14
    w, v = w[keep], v[:, keep]
    return np.cumsum(w / w.sum()), v


def _sample_initial(psi0, sampler, master_seed: int, index: int) -> PureState:
    if sampler is None:
        return psi0
    cdf, vecs = sampler
    u = np.random.default_rng(derive_seed(master_seed, index, stream=2)).random()
    k = min(int(np.searchsorted(cdf, u, side="right")), vecs.shape[1] - 1)
    return PureState(psi0.dims, vecs[:, k])


def _run_chunk(args):
    model, psi0, t_end, dt, master_seed, indices, snapshot_times, method = args
    stepper = _make_stepper(model, dt, t_end, method)
    sampler = _initial_sampler(psi0)
    out = []
    for i in indices:
        seed = derive_seed(master_seed, i)
        start = _sample_initial(psi0, sampler, master_seed, i)
        try:
            out.append(_simulate(model, stepper, start, t_end, seed, snapshot_times))
        except TrajectoryError as exc:
            raise TrajectoryError(f"trajectory {i} (seed {seed}) failed: {exc}", index=i, seed=seed) from exc
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            raise TrajectoryError(f"trajectory {i} (seed {seed}) failed: {exc}", index=i, seed=seed) from exc
    return out


def run_ensemble(
    model: SystemModel,
    psi0: PureState | MixedState,
    n_traj: int,
    t_end: float,
    dt: float | None = None,
    master_seed: int = 0,
    snapshot_times: Sequence[float] = (),
    method: str = "auto",
    workers: int = 1,
    params=None,
) -> Ensemble:
    """Run ``n_traj`` independent trajectories with seeds derived from ``master_seed``.

    A mixed initial state is unravelled by drawing, per trajectory, one of its
    eigenvectors with probability equal to the eigenvalue. Results are ordered
    by trajectory index whatever the number of ``workers``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if isinstance(psi0, PureState):
        _check_initial(model, psi0)
    elif psi0.dims != tuple(model.dims):
        raise ValueError("initial state dims do not match the model")
    if dt is None:
        dt = default_dt(model)
    snapshot_times = tuple(float(s) for s in snapshot_times)
    if workers <= 1 or n_traj == 1:
        trajs = _run_chunk((model, psi0, t_end, dt, master_seed, range(n_traj), snapshot_times, method))
    else:
        chunks = [list(range(n_traj))[w::workers] for w in range(workers)]
        jobs = [(model, psi0, t_end, dt, master_seed, c, snapshot_times, method) for c in chunks]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
        by_index = {}
        for c, part in zip(chunks, parts):
            by_index.update(zip(c, part))
        trajs = [by_index[i] for i in range(n_traj)]
    return Ensemble(tuple(trajs), int(master_seed), params, float(t_end))


def thin_records(records: Sequence[PhotonRecord], eta: float, seed: int) -> list[PhotonRecord]:
    """Keep each cavity-output record as detected with probability ``eta``.

    Free-space records are never detected. Times and channels are unchanged.
    """
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    rng = np.random.default_rng(seed)
    u = rng.random(len(records))
    return [replace(rec, detected=bool(rec.detectability == CAVITY_OUTPUT and u[i] < eta)) for i, rec in enumerate(records)]


def thin_ensemble(ens: Ensemble, eta: float) -> Ensemble:
    trajs = []
    for i, tr in enumerate(ens.trajectories):
        recs = thin_records(tr.records, eta, derive_seed(ens.master_seed, i, stream=1))
        trajs.append(replace(tr, records=tuple(recs)))
    return replace(ens, trajectories=tuple(trajs))


# ---------------------------------------------------------------------------
# master equation
# ---------------------------------------------------------------------------


def liouvillian(model: SystemModel, t: float = 0.0, cavity_weight: float = 1.0) -> np.ndarray:
    """Superoperator for row-major vec(rho). ``cavity_weight`` scales the
    recycling term of cavity-output channels (1 - eta gives the no-click generator)."""
    h = model.h_matrix(t)
    d = h.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for ch in model.jump_channels:
        L = ch.operator.data
        ldl = L.conj().T @ L
        w = cavity_weight if ch.detectability == CAVITY_OUTPUT else 1.0
        sup += w * np.kron(L, L.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T)
    return sup


def _lindblad_rhs(h_nh: np.ndarray, ops, rho: np.ndarray) -> np.ndarray:
    out = -1j * (h_nh @ rho - rho @ h_nh.conj().T)
    for L in ops:
        out += L @ rho @ L.conj().T
    return out


def master_equation_solve(
    model: SystemModel,
    rho0: MixedState | PureState,
    t_end: float,
    dt: float,
    method: str = "auto",
) -> list[tuple[float, MixedState]]:
    """Integrate the Lindblad equation and sample rho at 0, dt, 2 dt, ..., t_end.

    ``method="expm"`` (default for static models) propagates with the exact
    superoperator exponential; ``"rk4"`` uses fixed-step RK4 with the step
    bound of the linalg core. Hermiticity is restored after every sample.
    """
    if isinstance(rho0, PureState):
        rho0 = rho0.to_mixed()
    if rho0.dims != tuple(model.dims):
        raise ValueError("rho0 dims do not match the model")
    if not (dt > 0 and t_end >= 0):
        raise ValueError("need dt > 0 and t_end >= 0")
    if method == "auto":
        method = "rk4" if model.time_dependent else "expm"
    times = list(np.arange(0.0, t_end, dt))
    if not times or t_end - times[-1] > 1e-12 * max(1.0, t_end):
        times.append(float(t_end))
    times = [float(x) for x in times]
    d = rho0.data.shape[0]
    rho = np.array(rho0.data)
    out = [(0.0, MixedState(rho0.dims, rho))]
    if method == "expm":
        if model.time_dependent:
            raise ValueError("expm method needs a time-independent model")
        sup = liouvillian(model)
        cache: dict[float, np.ndarray] = {}
        for t0, t1 in itertools.pairwise(times):
            h = round(t1 - t0, 12)
            if h not in cache:
                cache[h] = scipy.linalg.expm(sup * (t1 - t0))
            rho = (cache[h] @ rho.reshape(-1)).reshape(d, d)
            rho = 0.5 * (rho + rho.conj().T)
            _check_finite(rho, t1)
            out.append((t1, MixedState(rho0.dims, rho)))
        return out
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")
    ops = [ch.operator.data for ch in model.jump_channels]
    decay = model.decay_operator()
    bound = 2 * model.norm_bound() + sum(np.linalg.norm(L, 2) ** 2 for L in ops)

    def hn(t):
        return model.h_matrix(t) - 0.5j * decay

    for t0, t1 in itertools.pairwise(times):
        span = t1 - t0
        n = max(1, math.ceil(bound * span / RK4_STEP_BOUND))
        s = span / n
        for i in range(n):
            ta = t0 + i * s
            h0, hm, h1 = hn(ta), hn(ta + 0.5 * s), hn(ta + s)
            k1 = _lindblad_rhs(h0, ops, rho)
            k2 = _lindblad_rhs(hm, ops, rho + 0.5 * s * k1)
            k3 = _lindblad_rhs(hm, ops, rho + 0.5 * s * k2)
            k4 = _lindblad_rhs(h1, ops, rho + s * k3)
            rho = rho + s * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
            rho = 0.5 * (rho + rho.conj().T)
        _check_finite(rho, t1)
        out.append((t1, MixedState(rho0.dims, rho)))
    return out


def _check_finite(rho: np.ndarray, t: float):
    if not np.all(np.isfinite(rho)):
        raise FloatingPointError(f"non-finite density matrix at t = {t}")


def steady_state(model: SystemModel) -> MixedState:
    """Stationary state of a static model from the null vector of its Liouvillian."""
    if model.time_dependent:
        raise ValueError("steady state needs a time-independent model")
    sup = liouvillian(model)
    _, _, vh = np.linalg.svd(sup)
    d = model.static.shape[0]
    rho = vh[-1].conj().reshape(d, d)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    return MixedState(model.dims, rho)


# ---------------------------------------------------------------------------
# heralding by absence of clicks
# ---------------------------------------------------------------------------


class NoClickPoint(NamedTuple):
    window: float
    fidelity: float | None
    n_selected: int


def _reduce_to(state_dims, target: PureState):
    if target.dims == tuple(state_dims):
        return None
    k = len(target.dims)
    if tuple(state_dims[:k]) != target.dims:
        raise ValueError(f"target dims {target.dims} are not a leading factor of {state_dims}")
    return list(range(k))


def no_click_fidelity_from_ensemble(
    ens: Ensemble,
    eta: float,
    t_grid: Sequence[float],
    target: PureState,
    t_obs: float | None = None,
) -> list[NoClickPoint]:
    """Fidelity of the state at ``t_obs`` conditioned on no detected click in the trailing window.

    Records are thinned with efficiency ``eta`` using per-trajectory seeds
    derived from the ensemble's master seed. The final states of the selected
    trajectories are averaged; if ``target`` lives on a leading factor of the
    model space (e.g. the atoms), the rest is traced out first.
    """
    if t_obs is None:
        t_obs = ens.t_end
    if not math.isclose(t_obs, ens.t_end, rel_tol=1e-12):
        raise ValueError("observation time must equal the ensemble end time")
    grid = [float(t) for t in t_grid]
    if any(b <= a for a, b in itertools.pairwise(grid)):
        raise ValueError("t_grid must be increasing")
    if grid and (grid[0] < 0 or grid[-1] > t_obs):
        raise ValueError("windows must lie within [0, t_obs]")
    thinned = thin_ensemble(ens, eta)
    last_click = np.array([max((r.time for r in tr.records if r.detected), default=-math.inf) for tr in thinned.trajectories])
    vecs = np.array([tr.final_state.amplitudes for tr in thinned.trajectories])
    dims = thinned.trajectories[0].final_state.dims
    keep = _reduce_to(dims, target)
    out = []
    for t in grid:
        sel = last_click <= t_obs - t if t > 0 else np.ones(len(vecs), dtype=bool)
        n = int(sel.sum())
        if n == 0:
            out.append(NoClickPoint(t, None, 0))
            continue
        v = vecs[sel]
        rho = MixedState(dims, v.T @ v.conj() / n)
        if keep is not None:
            rho = partial_trace(rho, keep)
        out.append(NoClickPoint(t, fidelity(rho, target), n))
    return out


def conditional_no_click_fidelity(
    model: SystemModel,
    psi0: PureState | MixedState,
    eta: float,
    t_grid: Sequence[float],
    n_traj: int,
    master_seed: int,
    target: PureState,
    t_obs: float | None = None,
    dt: float | None = None,
    workers: int = 1,
) -> list[NoClickPoint]:
    """Trajectory estimate of the no-click heralded fidelity for each window length.

    All trajectories run from ``psi0`` to the common observation time
    ``t_obs`` (default: the longest window). Starting from the stationary
    state makes the default equivalent to observing long after switch-on.
    """
    grid = [float(t) for t in t_grid]
    if t_obs is None:
        t_obs = max(grid) if grid else 0.0
    ens = run_ensemble(model, psi0, n_traj, t_obs, dt, master_seed, workers=workers)
    return no_click_fidelity_from_ensemble(ens, eta, grid, target, t_obs)


def no_click_fidelity_exact(
    model: SystemModel,
    rho0: MixedState,
    eta: float,
    t_grid: Sequence[float],
    target: PureState,
) -> list[tuple[float, float, float]]:
    """Deterministic counterpart: evolve under the generator with detected
    recycling removed, return (window, fidelity, no-click probability)."""
    sup = liouvillian(model, cavity_weight=1.0 - eta)
    d = rho0.data.shape[0]
    keep = _reduce_to(rho0.dims, target)
    out = []
    for t in t_grid:
        r = (scipy.linalg.expm(sup * t) @ rho0.data.reshape(-1)).reshape(d, d)
        p = float(np.trace(r).real)
        rho = MixedState(rho0.dims, 0.5 * (r + r.conj().T) / p)
        if keep is not None:
            rho = partial_trace(rho, keep)
        out.append((float(t), fidelity(rho, target), p))
    return out
