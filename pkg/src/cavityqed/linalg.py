"""Dense complex linear algebra on small composite Hilbert spaces.

Everything here works in natural units (hbar = 1). States and operators carry
the list of subsystem dimensions so that tensor products and partial traces
can be done without the caller tracking index layouts.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from math import prod

import numpy as np

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10

# RK4 is exact through fourth order for linear equations; the remainder is
# bounded by (|H| h)^5 / 5!, which stays below 1e-9 for |H| h <= 0.04.
RK4_STEP_BOUND = 0.04


class DimensionError(ValueError):
    """Raised when subsystem dimensions of two objects do not agree."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Operator:
    """Square matrix acting on the tensor product of ``dims``."""

    dims: tuple[int, ...]
    data: np.ndarray = field(repr=False)
    hermitian: bool = False

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        data = _frozen(self.data)
        n = prod(dims)
        if data.shape != (n, n):
            raise DimensionError(f"operator of shape {data.shape} does not match dims {dims}")
        if self.hermitian:
            err = np.max(np.abs(data - data.conj().T)) if n else 0.0
            if err >= HERMITIAN_TOL:
                raise ValueError(f"operator flagged Hermitian but |A - A^dag| = {err:.3e}")
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def dag(self) -> Operator:
        return Operator(self.dims, self.data.conj().T, self.hermitian)

    def __matmul__(self, other: Operator) -> Operator:
        if self.dims != other.dims:
            raise DimensionError(f"{self.dims} vs {other.dims}")
        return Operator(self.dims, self.data @ other.data)

    def __add__(self, other: Operator) -> Operator:
        if self.dims != other.dims:
            raise DimensionError(f"{self.dims} vs {other.dims}")
        return Operator(self.dims, self.data + other.data)

    def __sub__(self, other: Operator) -> Operator:
        if self.dims != other.dims:
            raise DimensionError(f"{self.dims} vs {other.dims}")
        return Operator(self.dims, self.data - other.data)

    def __mul__(self, scalar: complex) -> Operator:
        return Operator(self.dims, self.data * scalar)

    __rmul__ = __mul__

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T)) < tol)


@dataclass(frozen=True)
class PureState:
    """State vector over ``dims``. May be un-normalized (conditional states)."""

    dims: tuple[int, ...]
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.shape != (prod(dims),):
            raise DimensionError(f"vector of length {amps.size} does not match dims {dims}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm2 - 1.0) < tol

    def normalized(self) -> PureState:
        n2 = self.norm2
        if n2 <= 0.0:
            raise ValueError("cannot normalize the zero vector")
        return PureState(self.dims, self.amplitudes / np.sqrt(n2))

    def inner(self, other: PureState) -> complex:
        """<self|other>."""
        if self.dims != other.dims:
            raise DimensionError(f"{self.dims} vs {other.dims}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_mixed(self) -> MixedState:
        return MixedState(self.dims, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class MixedState:
    """Density matrix over ``dims``."""

    dims: tuple[int, ...]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        data = _frozen(self.data)
        n = prod(dims)
        if data.shape != (n, n):
            raise DimensionError(f"density matrix of shape {data.shape} does not match dims {dims}")
        object.__setattr__(self, "data", data)

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def is_valid(self, herm_tol: float = 1e-10, trace_tol: float = 1e-8, eig_tol: float = 1e-8) -> bool:
        if np.max(np.abs(self.data - self.data.conj().T)) >= herm_tol:
            return False
        if abs(self.trace - 1.0) >= trace_tol:
            return False
        return bool(np.min(np.linalg.eigvalsh(self.data)) >= -eig_tol)


def basis(dims: Sequence[int], *levels: int) -> PureState:
    """Product basis vector |levels[0], levels[1], ...>."""
    dims = tuple(dims)
    if len(levels) != len(dims):
        raise DimensionError(f"need {len(dims)} levels, got {len(levels)}")
    idx = int(np.ravel_multi_index(levels, dims))
    amps = np.zeros(prod(dims), dtype=complex)
    amps[idx] = 1.0
    return PureState(dims, amps)


def superpose(*terms: tuple[complex, PureState]) -> PureState:
    dims = terms[0][1].dims
    amps = np.zeros(prod(dims), dtype=complex)
    for c, s in terms:
        if s.dims != dims:
            raise DimensionError(f"{s.dims} vs {dims}")
        amps = amps + c * s.amplitudes
    return PureState(dims, amps)


def identity(dims: Sequence[int]) -> Operator:
    dims = tuple(dims)
    return Operator(dims, np.eye(prod(dims)), hermitian=True)


def kron(a: Operator, b: Operator) -> Operator:
    return Operator(a.dims + b.dims, np.kron(a.data, b.data))


def kron_states(a: PureState, b: PureState) -> PureState:
    return PureState(a.dims + b.dims, np.kron(a.amplitudes, b.amplitudes))


def embed(local: np.ndarray, site: int, dims: Sequence[int]) -> np.ndarray:
    """Lift a single-subsystem matrix to the full space as a plain array."""
    out = np.ones((1, 1), dtype=complex)
    for i, d in enumerate(dims):
        out = np.kron(out, local if i == site else np.eye(d))
    return out


def apply(a: Operator, psi: PureState) -> PureState:
    if a.dims != psi.dims:
        raise DimensionError(f"operator dims {a.dims} vs state dims {psi.dims}")
    return PureState(psi.dims, a.data @ psi.amplitudes)


def rk4_substeps(h_norm: float, dt: float) -> int:
    return max(1, int(np.ceil(h_norm * dt / RK4_STEP_BOUND)))


def rk4_propagate(h: np.ndarray, psi: np.ndarray, dt: float, h_norm: float | None = None) -> np.ndarray:
    """Integrate d psi/dt = -i h psi over ``dt`` with fixed-step RK4 on raw arrays."""
    if h_norm is None:
        h_norm = float(np.linalg.norm(h, 2))
    n = rk4_substeps(h_norm, dt)
    step = dt / n
    m = -1j * step * h
    for _ in range(n):
        k1 = m @ psi
        k2 = m @ (psi + 0.5 * k1)
        k3 = m @ (psi + 0.5 * k2)
        k4 = m @ (psi + k3)
        psi = psi + (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return psi


def expm_apply(h_nonhermitian: Operator, psi: PureState, dt: float) -> PureState:
    """Return exp(-i H dt)|psi> for a possibly non-Hermitian generator.

    Uses RK4 with substeps sized so that |H| h <= 0.04, which keeps the
    per-substep truncation error under 1e-9.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if h_nonhermitian.dims != psi.dims:
        raise DimensionError(f"operator dims {h_nonhermitian.dims} vs state dims {psi.dims}")
    h = h_nonhermitian.data
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(psi.amplitudes))):
        raise FloatingPointError("non-finite entries in expm_apply input")
    return PureState(psi.dims, rk4_propagate(h, psi.amplitudes, dt))


def partial_trace(rho: MixedState, keep: Sequence[int]) -> MixedState:
    keep = list(keep)
    n = len(rho.dims)
    if len(set(keep)) != len(keep) or any(k < 0 or k >= n for k in keep):
        raise ValueError(f"invalid subsystem indices {keep} for {n} subsystems")
    keep = sorted(keep)
    traced = [i for i in range(n) if i not in keep]
    t = rho.data.reshape(rho.dims + rho.dims)
    # contract each traced subsystem's row index with its column index
    row = list(range(n))
    col = [i + n for i in range(n)]
    for i in traced:
        col[i] = row[i]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    kept_dims = tuple(rho.dims[i] for i in keep)
    d = prod(kept_dims)
    reduced = np.einsum(t, row + col, out).reshape(d, d)
    return MixedState(kept_dims, reduced)


def fidelity(rho: MixedState, target: PureState) -> float:
    """<target|rho|target>, clipped into [0, 1] against rounding."""
    if rho.dims != target.dims:
        raise DimensionError(f"state dims {rho.dims} vs target dims {target.dims}")
    v = target.amplitudes
    f = float(np.vdot(v, rho.data @ v).real)
    return min(1.0, max(0.0, f))


def trace_distance(a: MixedState, b: MixedState) -> float:
    if a.dims != b.dims:
        raise DimensionError(f"{a.dims} vs {b.dims}")
    diff = a.data - b.data
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
