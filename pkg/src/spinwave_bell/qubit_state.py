"""Density-matrix algebra for the signal/idler polarization qubit pair.

Basis order is HH, HV, VH, VV (signal qubit first).  All operations are
pure: they validate their inputs, return new states, and never mutate.

Sign convention (fixed here, used everywhere else in the package):
    correlation_expected(phi_plus, theta_s, theta_i) == cos 2(theta_s - theta_i)
Analyzer angles are the polarization rotation angles themselves, not
waveplate mount angles.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec
from .errors import DegenerateChannelError

HH, HV, VH, VV = 0, 1, 2, 3

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
# Slightly loose floor: repeated channel compositions accumulate rounding.
EIGENVALUE_FLOOR = -1e-10

# Balancing flip applied to both arms within a data set.
FLIP_ANGLE = math.pi / 2


class Arm(enum.Enum):
    SIGNAL = "signal"
    IDLER = "idler"


def _canonical_angle(theta: float) -> float:
    """Map an analyzer angle into [-pi/2, pi/2); rotations have period pi."""
    return (theta + math.pi / 2) % math.pi - math.pi / 2


@dataclass(frozen=True)
class MeasurementSetting:
    """Analyzer rotation angles for the signal and idler arms."""

    theta_s: float
    theta_i: float
    flipped: bool = False

    def __post_init__(self):
        object.__setattr__(self, "theta_s", _canonical_angle(self.theta_s))
        object.__setattr__(self, "theta_i", _canonical_angle(self.theta_i))

    def base_key(self) -> tuple[float, float]:
        """Key identifying the setting irrespective of the flip flag."""
        return (round(self.theta_s, 12), round(self.theta_i, 12))


@dataclass(frozen=True)
class TwoQubitState:
    """4x4 density matrix of the two polarization qubits."""

    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {np.trace(rho).real!r} != 1")
        if np.linalg.eigvalsh(rho).min() < EIGENVALUE_FLOOR:
            raise ValueError("density matrix is not positive semidefinite")
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)

    def partial_trace(self, keep: Arm) -> np.ndarray:
        """Reduced 2x2 density matrix of one arm."""
        r = self.rho.reshape(2, 2, 2, 2)
        if keep is Arm.SIGNAL:
            return np.einsum("ikjk->ij", r)
        return np.einsum("kikj->ij", r)


def make_bell_phi_plus() -> TwoQubitState:
    """The pure state (|HH> + |VV>)/sqrt(2) as a density matrix."""
    psi = np.zeros(4, dtype=complex)
    psi[HH] = psi[VV] = 1.0 / math.sqrt(2.0)
    return TwoQubitState(np.outer(psi, psi.conj()))


def apply_werner(state: TwoQubitState, visibility: float) -> TwoQubitState:
    """Mix the state with the maximally mixed state: V*rho + (1-V)*I/4."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility {visibility} outside [0, 1]")
    rho = visibility * state.rho + (1.0 - visibility) * np.eye(4) / 4.0
    return TwoQubitState(rho)


def _arm_operator(op: np.ndarray, arm: Arm) -> np.ndarray:
    if arm is Arm.SIGNAL:
        return np.kron(op, np.eye(2))
    return np.kron(np.eye(2), op)


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotate_arm(state: TwoQubitState, arm: Arm, theta: float) -> TwoQubitState:
    """Rotate one arm's polarization by theta (real rotation, trace preserving)."""
    full = _arm_operator(_rotation(theta), arm)
    return TwoQubitState(full @ state.rho @ full.T)


def apply_arm_channel(
    state: TwoQubitState, arm: Arm, channel: ChannelSpec
) -> tuple[TwoQubitState, float]:
    """Send one arm through a lossy channel; condition on survival.

    Returns the renormalized conditional state and the survival probability.
    The loss/phase part acts as a single Kraus operator diag(sqrt(tH),
    sqrt(tV) e^{i phi}); depolarization then replaces the arm's qubit by the
    maximally mixed state with probability channel.depol.
    """
    if channel.trans_h <= 0.0 and channel.trans_v <= 0.0:
        raise DegenerateChannelError(f"channel {channel.label!r} blocks both polarizations")
    kraus = np.array(
        [
            [math.sqrt(channel.trans_h), 0.0],
            [0.0, math.sqrt(channel.trans_v) * np.exp(1j * channel.rel_phase)],
        ]
    )
    full = _arm_operator(kraus, arm)
    rho = full @ state.rho @ full.conj().T
    survival = float(np.trace(rho).real)
    if survival <= 0.0:
        raise DegenerateChannelError(f"channel {channel.label!r} has zero survival for this state")
    conditional = TwoQubitState(rho / survival)
    if channel.depol > 0.0:
        other = Arm.IDLER if arm is Arm.SIGNAL else Arm.SIGNAL
        reduced = conditional.partial_trace(other)
        if arm is Arm.SIGNAL:
            mixed = np.kron(np.eye(2) / 2.0, reduced)
        else:
            mixed = np.kron(reduced, np.eye(2) / 2.0)
        conditional = TwoQubitState(
            (1.0 - channel.depol) * conditional.rho + channel.depol * mixed
        )
    return conditional, survival


def click_probabilities(
    state: TwoQubitState, setting: MeasurementSetting
) -> tuple[float, float, float, float]:
    """Per-trial probabilities of the four coincidence outcomes.

    Detectors D1/D2 sit behind the signal-arm polarizing beamsplitter
    (H/V ports), D3/D4 behind the idler one.  Returns (p13, p14, p23, p24);
    the four values sum to 1.
    """
    ts, ti = setting.theta_s, setting.theta_i
    if setting.flipped:
        ts += FLIP_ANGLE
        ti += FLIP_ANGLE
    rotated = rotate_arm(rotate_arm(state, Arm.SIGNAL, ts), Arm.IDLER, ti)
    diag = np.real(np.diag(rotated.rho))
    # (signal H, idler H) -> D1&D3, (H, V) -> D1&D4, etc.
    return (float(diag[HH]), float(diag[HV]), float(diag[VH]), float(diag[VV]))


def correlation_expected(state: TwoQubitState, setting: MeasurementSetting) -> float:
    """E = p13 + p24 - p14 - p23 at the given analyzer setting."""
    p13, p14, p23, p24 = click_probabilities(state, setting)
    return p13 + p24 - p14 - p23
