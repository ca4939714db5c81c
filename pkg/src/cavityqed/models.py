"""Cavity-design formulas and constructors for the atom-cavity models.

The formula helpers work in SI units (rad/s, metres). The model builders work
in units where the atom-cavity coupling sets the scale; pass ``g=1`` to read
all rates and times in units of g and 1/g.

Each builder writes its Hamiltonian in a rotating frame in which every drive
is static:

* Zeno gate: frame of the laser on the 1-2 transition. Level 2 sits at the
  laser detuning, the cavity is resonant with the laser so the photon carries
  no energy term.
* Telegraph: frame in which the 0-e laser, the 1-e cavity coupling and the
  0-1 drive are all on two-photon resonance; only |e> carries the detuning.
* Photon source: frame of the pump laser with the Raman pair (pump, cavity)
  on two-photon resonance; |e> carries the one-photon detuning.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import constants

from .linalg import Operator, PureState, basis, embed, superpose

CAVITY_OUTPUT = "cavity-output"
FREE_SPACE = "free-space"


class RegimeWarning(UserWarning):
    """Parameters sit close to the edge of a scheme's validity regime."""


class RegimeError(ValueError):
    """Parameters are far outside the regime where a scheme is meaningful."""


class CooperativityWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# cavity design formulas (SI)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CavityGeometry:
    """Fabry-Perot cavity and atomic transition data, SI units throughout.

    Either ``reflectivity`` or ``finesse`` must be given for the decay rate.
    ``frequency`` (rad/s) falls back to 2 pi c / wavelength.
    """

    length: float | None = None
    wavelength: float | None = None
    reflectivity: float | None = None
    finesse: float | None = None
    mode_volume: float | None = None
    dipole: float | None = None
    frequency: float | None = None

    def __post_init__(self):
        for name in ("length", "wavelength", "reflectivity", "finesse", "mode_volume", "dipole", "frequency"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.reflectivity is not None and self.reflectivity >= 1:
            raise ValueError("reflectivity must be below 1")
        if self.reflectivity is not None and self.finesse is not None and self.reflectivity > 0.99:
            approx = math.pi / (1 - self.reflectivity)
            if abs(self.finesse - approx) / self.finesse >= 0.01:
                raise ValueError(
                    f"finesse {self.finesse} inconsistent with reflectivity {self.reflectivity} (pi/(1-R) = {approx:.6g})"
                )

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ValueError(f"cavity geometry is missing {', '.join(missing)}")

    @property
    def angular_frequency(self) -> float:
        if self.frequency is not None:
            return self.frequency
        self.require("wavelength")
        return 2 * math.pi * constants.c / self.wavelength

    @property
    def resolved_finesse(self) -> float:
        if self.finesse is not None:
            return self.finesse
        self.require("reflectivity")
        return finesse_from_reflectivity(self.reflectivity)


def coupling_g(geom: CavityGeometry) -> float:
    """Single-atom vacuum coupling sqrt(|mu|^2 omega / (2 hbar eps0 V)) in rad/s."""
    geom.require("dipole", "mode_volume")
    omega = geom.angular_frequency
    return math.sqrt(geom.dipole**2 * omega / (2 * constants.hbar * constants.epsilon_0 * geom.mode_volume))


def kappa_from_finesse(length: float, finesse: float) -> float:
    if not (length > 0 and finesse > 0):
        raise ValueError("length and finesse must be positive")
    return math.pi * constants.c / (2 * length * finesse)


def finesse_from_reflectivity(r: float) -> float:
    """pi / (1 - R); the approximation only holds for R > 0.99."""
    if not 0.99 < r < 1:
        raise ValueError(f"reflectivity {r} outside the validity range 0.99 < R < 1")
    return math.pi / (1 - r)


def kappa_from_q(q: float, wavelength: float) -> float:
    if not (q > 0 and wavelength > 0):
        raise ValueError("Q and wavelength must be positive")
    return math.pi * constants.c / (q * wavelength)


def q_from_finesse(length: float, finesse: float, wavelength: float) -> float:
    return 2 * length * finesse / wavelength


def cooperativity(g: float, kappa: float, gamma: float) -> float:
    if not (g > 0 and kappa > 0 and gamma > 0):
        raise ValueError("g, kappa and gamma must be positive")
    return g * g / (kappa * gamma)


def scattering_count(s: float, eta: float, c: float) -> float:
    """Expected scattering events while detecting one atom: S^2 / (eta C^3).

    Only meaningful for C >> 1; a warning is issued below C = 10.
    """
    if not s > 0:
        raise ValueError("signal-to-noise must be positive")
    if not 0 < eta <= 1:
        raise ValueError(f"detection efficiency must lie in (0, 1], got {eta}")
    if not c > 0:
        raise ValueError("cooperativity must be positive")
    if c < 10:
        warnings.warn(f"scattering_count assumes C >> 1, got C = {c}", CooperativityWarning, stacklevel=2)
    return s * s / (eta * c**3)


# ---------------------------------------------------------------------------
# dynamical models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemParams:
    g: float = 1.0
    kappa: float = 1.0
    gamma: float = 1.0
    omega: float = 0.0
    delta: float = 0.0
    omega_m: float = 0.0
    omega_l: float = 0.0
    eta: float = 1.0
    n_max: int = 2

    def __post_init__(self):
        if not (self.g > 0 and self.kappa > 0 and self.gamma > 0):
            raise ValueError("g, kappa and gamma must be positive")
        if not 0 <= self.eta <= 1:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")

    @property
    def cooperativity(self) -> float:
        return cooperativity(self.g, self.kappa, self.gamma)

    def replace(self, **changes) -> SystemParams:
        return SystemParams(**{**self.__dict__, **changes})


@dataclass(frozen=True)
class JumpChannel:
    operator: Operator
    label: str
    detectability: str

    def __post_init__(self):
        if self.detectability not in (CAVITY_OUTPUT, FREE_SPACE):
            raise ValueError(f"unknown detectability {self.detectability!r}")


@dataclass(frozen=True)
class DriveTerm:
    """Time-dependent Hamiltonian piece envelope(t) * operator (envelope real)."""

    envelope: Callable[[float], float]
    operator: np.ndarray = field(repr=False)
    peak: float


@dataclass(frozen=True)
class SystemModel:
    """Hamiltonian H(t) = static + sum_k f_k(t) H_k plus Lindblad jump channels."""

    dims: tuple[int, ...]
    static: np.ndarray = field(repr=False)
    jump_channels: tuple[JumpChannel, ...]
    basis_labels: tuple[tuple[str, ...], ...]
    drives: tuple[DriveTerm, ...] = ()
    name: str = ""

    def __post_init__(self):
        static = np.array(self.static, dtype=complex)
        static.flags.writeable = False
        object.__setattr__(self, "static", static)
        d = int(np.prod(self.dims))
        for ch in self.jump_channels:
            if ch.operator.dims != tuple(self.dims):
                raise ValueError(f"jump channel {ch.label} has dims {ch.operator.dims}, expected {self.dims}")
        if static.shape != (d, d):
            raise ValueError("static Hamiltonian does not match dims")

    @property
    def time_dependent(self) -> bool:
        return bool(self.drives)

    def h_matrix(self, t: float = 0.0) -> np.ndarray:
        h = self.static
        for term in self.drives:
            h = h + term.envelope(t) * term.operator
        return h

    def hamiltonian(self, t: float = 0.0) -> Operator:
        return Operator(self.dims, self.h_matrix(t), hermitian=True)

    def decay_operator(self) -> np.ndarray:
        """sum_k L_k^dag L_k."""
        d = self.static.shape[0]
        out = np.zeros((d, d), dtype=complex)
        for ch in self.jump_channels:
            L = ch.operator.data
            out += L.conj().T @ L
        return out

    def h_nonhermitian(self, t: float = 0.0) -> np.ndarray:
        return self.h_matrix(t) - 0.5j * self.decay_operator()

    def norm_bound(self) -> float:
        """Upper bound on |H(t) - (i/2) sum L^dag L| over all t."""
        n = np.linalg.norm(self.static - 0.5j * self.decay_operator(), 2)
        for term in self.drives:
            n += abs(term.peak) * np.linalg.norm(term.operator, 2)
        return float(n)

    def channels(self, detectability: str) -> list[int]:
        return [k for k, ch in enumerate(self.jump_channels) if ch.detectability == detectability]


def _proj(dim: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((dim, dim), dtype=complex)
    m[i, j] = 1.0
    return m


def _annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)


def _two_atom_cavity(n_max: int):
    dims = (3, 3, n_max + 1)
    a = embed(_annihilation(n_max), 2, dims)

    def atom(i: int, k: int, l: int) -> np.ndarray:
        return embed(_proj(3, k, l), i, dims)

    return dims, a, atom


def _decay_channels(dims, atom, excited: int, branching: float, names: Sequence[str], gamma: float):
    if not 0 <= branching <= 1:
        raise ValueError("branching must lie in [0, 1]")
    out = []
    for i in range(2):
        for ground, frac in ((0, branching), (1, 1 - branching)):
            if frac == 0:
                continue
            op = np.sqrt(gamma * frac) * atom(i, ground, excited)
            out.append(JumpChannel(Operator(dims, op), f"atom{i + 1}_{names[excited]}to{names[ground]}", FREE_SPACE))
    return out


def build_zeno_system(p: SystemParams, branching: float = 0.5) -> SystemModel:
    """Two three-level atoms (0, 1, 2) in one cavity mode for the Zeno phase gate.

    Atom 1 sees the laser Rabi frequency +omega, atom 2 sees -omega.
    ``branching`` is the fraction of decays from |2> that land in |0>.
    """
    dims, a, atom = _two_atom_cavity(p.n_max)
    adag = a.conj().T
    h = np.zeros_like(a)
    for i, sign in ((0, 1.0), (1, -1.0)):
        h += sign * 0.5 * p.omega * (atom(i, 1, 2) + atom(i, 2, 1))
        h += p.delta * atom(i, 2, 2)
        h += p.g * (adag @ atom(i, 1, 2) + atom(i, 2, 1) @ a)
    channels = [JumpChannel(Operator(dims, np.sqrt(p.kappa) * a), "cavity", CAVITY_OUTPUT)]
    channels += _decay_channels(dims, atom, 2, branching, ("0", "1", "2"), p.gamma)
    labels = (("0", "1", "2"), ("0", "1", "2"), tuple(str(n) for n in range(p.n_max + 1)))
    return SystemModel(dims, h, tuple(channels), labels, name="zeno")


def dark_basis() -> list[PureState]:
    """|00>, |01>, |10>, |11>, |a12> in the two-atom (3 x 3) space."""
    dims = (3, 3)
    a12 = superpose((1 / math.sqrt(2), basis(dims, 1, 2)), (-1 / math.sqrt(2), basis(dims, 2, 1)))
    return [basis(dims, 0, 0), basis(dims, 0, 1), basis(dims, 1, 0), basis(dims, 1, 1), a12]


def dark_projector() -> Operator:
    vecs = np.array([s.amplitudes for s in dark_basis()]).T
    return Operator((3, 3), vecs @ vecs.conj().T, hermitian=True)


def zeno_interaction(p: SystemParams) -> Operator:
    """Laser part of the Zeno Hamiltonian on the two-atom space (no cavity)."""
    dims = (3, 3)
    h = np.zeros((9, 9), dtype=complex)
    for i, sign in ((0, 1.0), (1, -1.0)):
        h += sign * 0.5 * p.omega * (embed(_proj(3, 1, 2), i, dims) + embed(_proj(3, 2, 1), i, dims))
        h += p.delta * embed(_proj(3, 2, 2), i, dims)
    return Operator(dims, h, hermitian=True)


def effective_zeno_hamiltonian(p: SystemParams) -> Operator:
    """Laser Hamiltonian projected onto the dark subspace, 5 x 5.

    Basis order follows ``dark_basis``. With |a12> = (|12> - |21>)/sqrt(2) and
    atom 2 driven at -omega, the |11>-|a12> element is -sqrt(2) omega / 2; its
    sign is a phase convention for |a12> and does not affect the dynamics.
    """
    h = np.zeros((5, 5), dtype=complex)
    c = -math.sqrt(2) * p.omega / 2
    h[3, 4] = h[4, 3] = c
    h[4, 4] = p.delta
    return Operator((5,), h, hermitian=True)


def effective_detuning(omega: float, delta: float) -> float:
    """Light shift of |11> after eliminating |a12>: -omega^2 / (2 delta)."""
    if delta == 0:
        raise ValueError("detuning must be non-zero")
    return -(omega**2) / (2 * delta)


def ideal_phase_gate(omega: float, delta: float) -> tuple[Operator, float]:
    """Ideal two-qubit gate diag(1, 1, 1, exp(i d_eff T)) and its gate time T = pi/|d_eff|."""
    d_eff = effective_detuning(omega, delta)
    if d_eff == 0:
        raise ValueError("omega must be non-zero")
    t = math.pi / abs(d_eff)
    u = np.diag([1, 1, 1, np.exp(1j * d_eff * t)])
    return Operator((2, 2), u), t


def _regime_margin(small: float, large: float) -> float:
    return math.inf if small == 0 else abs(large) / abs(small)


def check_telegraph_regime(p: SystemParams, margin: float = 5.0) -> list[str]:
    """Warn (and return the complaints) when |omega_m| < g, kappa, gamma, |omega_l| << delta fails."""
    problems = []
    for name, val in (("g", p.g), ("kappa", p.kappa), ("gamma", p.gamma), ("omega_l", p.omega_l)):
        if abs(p.omega_m) >= abs(val):
            problems.append(f"|omega_m| = {abs(p.omega_m):g} is not below {name} = {abs(val):g}")
    for name, val in (("g", p.g), ("kappa", p.kappa), ("gamma", p.gamma), ("omega_l", p.omega_l)):
        if _regime_margin(val, p.delta) < margin:
            problems.append(f"delta = {p.delta:g} is not >> {name} = {abs(val):g} (margin {margin:g})")
    for msg in problems:
        warnings.warn(msg, RegimeWarning, stacklevel=3)
    return problems


def build_telegraph_system(p: SystemParams, branching: float = 0.5, check_regime: bool = True) -> SystemModel:
    """Two atoms with levels (0, 1, e) driven for macroscopic light and dark periods.

    The 1-e transition couples to the cavity at detuning delta, omega_l drives
    0-e and omega_m drives 0-1, identically for both atoms. ``branching`` is
    the fraction of decays from |e> into |0>.
    """
    if check_regime:
        check_telegraph_regime(p)
    dims, a, atom = _two_atom_cavity(p.n_max)
    adag = a.conj().T
    h = np.zeros_like(a)
    for i in range(2):
        h += p.delta * atom(i, 2, 2)
        h += 0.5 * p.omega_l * (atom(i, 2, 0) + atom(i, 0, 2))
        h += 0.5 * p.omega_m * (atom(i, 1, 0) + atom(i, 0, 1))
        h += p.g * (adag @ atom(i, 1, 2) + atom(i, 2, 1) @ a)
    channels = [JumpChannel(Operator(dims, np.sqrt(p.kappa) * a), "cavity", CAVITY_OUTPUT)]
    channels += _decay_channels(dims, atom, 2, branching, ("0", "1", "e"), p.gamma)
    labels = (("0", "1", "e"), ("0", "1", "e"), tuple(str(n) for n in range(p.n_max + 1)))
    return SystemModel(dims, h, tuple(channels), labels, name="telegraph")


def singlet_state() -> PureState:
    """(|01> - |10>)/sqrt(2) on the two-atom (3 x 3) space."""
    dims = (3, 3)
    return superpose((1 / math.sqrt(2), basis(dims, 0, 1)), (-1 / math.sqrt(2), basis(dims, 1, 0)))


class TelegraphTimescales(NamedTuple):
    t_cav: float
    t_dark: float
    t_light: float
    validity_ratio: float


def telegraph_timescales(p: SystemParams) -> TelegraphTimescales:
    """Mean inter-photon time in light periods and mean dark/light durations.

    ``validity_ratio`` is omega_l^2 / (4 delta omega_m); the expressions need it << 1.
    """
    if not (p.delta != 0 and p.omega_l != 0):
        raise ValueError("delta and omega_l must be non-zero")
    t_cav = 3 * p.kappa * p.delta**2 / (4 * p.g**2 * p.omega_l**2)
    c = p.cooperativity
    ratio = math.inf if p.omega_m == 0 else p.omega_l**2 / (4 * abs(p.delta) * abs(p.omega_m))
    return TelegraphTimescales(t_cav, 64 / 9 * c * t_cav, 64 / 3 * c * t_cav, ratio)


@dataclass(frozen=True)
class RampSpec:
    """Pump envelope rising from 0 to ``omega_max`` over ``duration``, then held.

    ``shape`` is ``"linear"`` or ``"sin2"``.
    """

    duration: float
    omega_max: float
    shape: str = "sin2"

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("ramp duration must be positive")
        if self.shape not in ("linear", "sin2"):
            raise ValueError(f"unknown ramp shape {self.shape!r}")

    def __call__(self, t: float) -> float:
        x = min(max(t / self.duration, 0.0), 1.0)
        if self.shape == "linear":
            return self.omega_max * x
        return self.omega_max * math.sin(0.5 * math.pi * x) ** 2


def build_photon_source(p: SystemParams, pulse: RampSpec, branching: float = 0.5, sink: bool = False) -> SystemModel:
    """One (g, u, e) atom in a cavity; the pump ramps on g-e, the cavity couples u-e.

    ``p.delta`` is the common one-photon detuning of |e>. ``branching`` is the
    fraction of decays from |e> into |g>. With ``sink=True`` the atom gets a
    fourth level |x> and every free-space decay ends there, so each
    trajectory emits at most one photon in total.
    """
    n_max = p.n_max
    levels = 4 if sink else 3
    dims = (levels, n_max + 1)
    a = embed(_annihilation(n_max), 1, dims)
    adag = a.conj().T

    def atom(k, l):
        return embed(_proj(levels, k, l), 0, dims)

    static = p.delta * atom(2, 2) + p.g * (adag @ atom(1, 2) + atom(2, 1) @ a)
    pump = 0.5 * (atom(2, 0) + atom(0, 2))
    channels = [JumpChannel(Operator(dims, np.sqrt(p.kappa) * a), "cavity", CAVITY_OUTPUT)]
    if sink:
        channels.append(JumpChannel(Operator(dims, np.sqrt(p.gamma) * atom(3, 2)), "etox", FREE_SPACE))
    else:
        for ground, frac, name in ((0, branching, "etog"), (1, 1 - branching, "etou")):
            if frac > 0:
                channels.append(JumpChannel(Operator(dims, np.sqrt(p.gamma * frac) * atom(ground, 2)), name, FREE_SPACE))
    labels = (("g", "u", "e", "x")[:levels], tuple(str(n) for n in range(n_max + 1)))
    drives = (DriveTerm(pulse, pump, pulse.omega_max),)
    return SystemModel(dims, static, tuple(channels), labels, drives=drives, name="photon-source")
