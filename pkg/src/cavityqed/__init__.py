"""Quantum-trajectory and master-equation toolkit for measurement-based entanglement of atoms in optical cavities."""

from .linalg import MixedState, Operator, PureState, basis, fidelity, partial_trace, trace_distance
from .models import (
    CavityGeometry,
    RampSpec,
    SystemModel,
    SystemParams,
    build_photon_source,
    build_telegraph_system,
    build_zeno_system,
)
from .trajectory import master_equation_solve, run_ensemble, run_trajectory

__all__ = [
    "CavityGeometry",
    "MixedState",
    "Operator",
    "PureState",
    "RampSpec",
    "SystemModel",
    "SystemParams",
    "basis",
    "build_photon_source",
    "build_telegraph_system",
    "build_zeno_system",
    "fidelity",
    "master_equation_solve",
    "partial_trace",
    "run_ensemble",
    "run_trajectory",
    "trace_distance",
]
