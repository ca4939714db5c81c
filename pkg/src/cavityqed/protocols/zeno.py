"""Controlled phase gate heralded by the absence of photon emissions."""

from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..linalg import PureState, basis, fidelity, partial_trace, superpose
from ..models import (
    RegimeError,
    RegimeWarning,
    SystemParams,
    build_zeno_system,
    ideal_phase_gate,
)
from ..trajectory import _RK4Stepper

QUBIT_DIMS = (2, 2)


@dataclass(frozen=True)
class GateOutcome:
    conditional_fidelity: float
    success_prob: float
    params_used: SystemParams
    gate_time: float
    input_label: str = ""


def fig3_params(omega: float = 0.1, delta: float = 1.25, n_max: int = 2) -> SystemParams:
    """kappa = 0.05 g and gamma = 0.08 g, i.e. C = 250."""
    return SystemParams(g=1.0, kappa=0.05, gamma=0.08, omega=omega, delta=delta, n_max=n_max)


def standard_inputs() -> dict[str, PureState]:
    """The two input states of the gate performance figure."""
    return {
        "01": basis(QUBIT_DIMS, 0, 1),
        "bell00+11": superpose((1 / math.sqrt(2), basis(QUBIT_DIMS, 0, 0)), (1 / math.sqrt(2), basis(QUBIT_DIMS, 1, 1))),
    }


def embed_qubits(state: PureState, n_max: int) -> PureState:
    """Place a two-qubit state into the (3, 3, n_max + 1) atom-atom-cavity space, cavity empty."""
    if state.dims != QUBIT_DIMS:
        raise ValueError(f"expected a two-qubit state, got dims {state.dims}")
    amps = np.zeros((3, 3, n_max + 1), dtype=complex)
    amps[:2, :2, 0] = state.amplitudes.reshape(2, 2)
    return PureState((3, 3, n_max + 1), amps)


def qubits_in_atoms(state: PureState) -> PureState:
    """Two-qubit state viewed in the two-atom (3 x 3) space."""
    amps = np.zeros((3, 3), dtype=complex)
    amps[:2, :2] = state.amplitudes.reshape(2, 2)
    return PureState((3, 3), amps)


def check_zeno_regime(p: SystemParams, margin: float = 5.0) -> list[str]:
    """Check |delta| >> |omega|, gamma.

    Raises RegimeError when |omega| >= 2 |delta| (adiabatic elimination of the
    antisymmetric excited state no longer describes the gate); warns when the
    separation is below ``margin``.
    """
    if p.delta == 0 or p.omega == 0:
        raise RegimeError("the Zeno gate needs non-zero omega and delta")
    if abs(p.omega) >= 2 * abs(p.delta):
        raise RegimeError(f"|omega| = {abs(p.omega):g} is not small against |delta| = {abs(p.delta):g}")
    problems = []
    for name, val in (("omega", p.omega), ("gamma", p.gamma)):
        if abs(p.delta) < margin * abs(val):
            problems.append(f"|delta| = {abs(p.delta):g} is not >> {name} = {abs(val):g}")
    for msg in problems:
        warnings.warn(msg, RegimeWarning, stacklevel=3)
    return problems


def zeno_gate_experiment(
    p: SystemParams,
    input_state: PureState,
    label: str = "",
    branching: float = 0.5,
    method: str = "expm",
) -> GateOutcome:
    """Run the full atom-atom-cavity model for T = pi/|delta_eff| without emissions.

    ``success_prob`` is the squared norm of the no-jump state at T. The
    renormalized state is reduced to the atoms and compared with the ideal
    phase gate applied to ``input_state``. ``method="rk4"`` integrates the
    conditional evolution step by step instead of exponentiating.
    """
    check_zeno_regime(p)
    if not input_state.is_normalized():
        raise ValueError("input state must be normalized")
    u_ideal, gate_time = ideal_phase_gate(p.omega, p.delta)
    model = build_zeno_system(p, branching=branching)
    psi0 = embed_qubits(input_state, p.n_max).amplitudes
    h_nh = model.h_nonhermitian()
    if method == "expm":
        psi = scipy.linalg.expm(-1j * h_nh * gate_time) @ psi0
    elif method == "rk4":
        stepper = _RK4Stepper(model, dt=1.0)
        psi = stepper.propagate(0.0, psi0, gate_time)
    else:
        raise ValueError(f"unknown method {method!r}")
    success = float(np.vdot(psi, psi).real)
    state = PureState(model.dims, psi / math.sqrt(success))
    atoms = partial_trace(state.to_mixed(), [0, 1])
    target = qubits_in_atoms(PureState(QUBIT_DIMS, u_ideal.data @ input_state.amplitudes))
    return GateOutcome(fidelity(atoms, target), min(success, 1.0), p, gate_time, label)


@dataclass(frozen=True)
class SweepRow:
    omega: float
    delta: float
    input_label: str
    conditional_fidelity: float
    success_prob: float
    gate_time: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    best_omega: float
    best_delta: float
    best_score: float

    def at(self, omega: float, delta: float, label: str) -> SweepRow:
        for r in self.rows:
            if r.omega == omega and r.delta == delta and r.input_label == label:
                return r
        raise KeyError((omega, delta, label))


def sweep_gate(
    p_base: SystemParams,
    omega_grid: Sequence[float],
    delta_grid: Sequence[float],
    inputs: dict[str, PureState] | None = None,
    branching: float = 0.5,
) -> SweepResult:
    """Evaluate the gate over an (omega, delta) grid for each input state.

    The reported optimum maximizes, over grid points, the worst case across
    inputs of conditional_fidelity * success_prob.
    """
    if not omega_grid or not delta_grid:
        raise ValueError("grids must be non-empty")
    if inputs is None:
        inputs = standard_inputs()
    rows = []
    best = (-math.inf, None, None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        for om in omega_grid:
            for de in delta_grid:
                p = p_base.replace(omega=float(om), delta=float(de))
                scores = []
                for label, state in inputs.items():
                    out = zeno_gate_experiment(p, state, label, branching)
                    rows.append(SweepRow(float(om), float(de), label, out.conditional_fidelity, out.success_prob, out.gate_time))
                    scores.append(out.conditional_fidelity * out.success_prob)
                score = min(scores)
                if score > best[0]:
                    best = (score, float(om), float(de))
    return SweepResult(tuple(rows), best[1], best[2], best[0])


def linspace_grid(lo: float, hi: float, n: int) -> list[float]:
    return [float(x) for x in np.linspace(lo, hi, n)]
