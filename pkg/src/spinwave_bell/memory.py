"""Spin-wave coherence in the 1-D lattice trap.

Classical thermal atoms oscillate in a harmonic trap; each atom carries the
spin-wave phase grating exp(i dk.r) plus a residual light-shift phase.  The
ensemble average of those phases gives the retrieval coherence factor, the
retrieval efficiency eta(t), and the qubit visibility factor d(t).

Atom motion is treated classically: the spin-wave period (~50 um) is far
longer than the lattice period, and the dephasing axes are the weakly
confined ones.  A per-atom fractional spread of the trap frequencies stands
in for trap anharmonicity and damps the periodic revivals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

KB = constants.k
RB87_MASS = 86.909180527 * constants.u

MAGIC_FIELD_G = 4.2


@dataclass(frozen=True)
class TrapParams:
    """Harmonic trap and thermal-ensemble parameters.

    omega is (x, y, z) angular frequencies in rad/s; x is the lattice axis,
    z the signal axis.  freq_spread is the fractional rms spread of the trap
    frequencies across atoms (anharmonicity proxy).
    """

    omega: tuple[float, float, float]
    temperature: float
    atom_mass: float = RB87_MASS
    depth_u0: float = 56e-6
    n_atoms_sim: int = 100_000
    freq_spread: float = 0.0

    def __post_init__(self):
        if any(w <= 0.0 for w in self.omega):
            raise ValueError(f"trap frequencies must be positive, got {self.omega}")
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.n_atoms_sim < 100:
            raise ValueError(f"n_atoms_sim must be >= 100, got {self.n_atoms_sim}")

    @property
    def sigma_position(self) -> np.ndarray:
        """Per-axis thermal position spread sqrt(kB T / (m omega^2))."""
        w = np.asarray(self.omega)
        return np.sqrt(KB * self.temperature / self.atom_mass) / w

    @property
    def sigma_velocity(self) -> float:
        """Thermal velocity spread sqrt(kB T / m), identical on all axes."""
        return math.sqrt(KB * self.temperature / self.atom_mass)


@dataclass(frozen=True)
class SpinWaveGeometry:
    """Wavevector geometry of the two qubit spin waves."""

    wavelength_write: float
    half_angle: float
    tilt_phi: float
    deltak_1: np.ndarray = field(repr=False)
    deltak_2: np.ndarray = field(repr=False)

    @property
    def deltak_mag(self) -> float:
        return float(np.linalg.norm(self.deltak_1))

    @property
    def period(self) -> float:
        """Spin-wave grating period 2 pi / |dk|."""
        mag = self.deltak_mag
        return math.inf if mag == 0.0 else 2.0 * math.pi / mag

    @property
    def is_degenerate(self) -> bool:
        return not math.isfinite(self.period)


def spinwave_wavevectors(
    wavelength: float, half_angle: float, tilt_phi: float
) -> SpinWaveGeometry:
    """Build the mirrored spin-wave wavevectors from the beam geometry.

    |dk| comes from the exact vector difference of the write and signal
    wavevectors (signal mode at `half_angle` to the write direction); the
    resulting grating vector lies at +/- tilt_phi to the lattice x-axis in
    the x-z plane, one sign per qubit spin wave.
    """
    if wavelength <= 0.0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    if not 0.0 <= half_angle < math.pi / 2:
        raise ValueError(f"half_angle must be in [0, pi/2), got {half_angle}")
    k = 2.0 * math.pi / wavelength
    k_write = k * np.array([0.0, 0.0, 1.0])
    k_signal = k * np.array([math.sin(half_angle), 0.0, math.cos(half_angle)])
    mag = float(np.linalg.norm(k_write - k_signal))
    dk1 = mag * np.array([math.cos(tilt_phi), 0.0, math.sin(tilt_phi)])
    dk2 = mag * np.array([math.cos(tilt_phi), 0.0, -math.sin(tilt_phi)])
    return SpinWaveGeometry(
        wavelength_write=wavelength,
        half_angle=half_angle,
        tilt_phi=tilt_phi,
        deltak_1=dk1,
        deltak_2=dk2,
    )


@dataclass(frozen=True)
class LightShiftModel:
    """Residual differential light shift after magic-field compensation.

    The per-atom dephasing rate is linear in (b_field - b_magic) times the
    atom's relative lattice intensity, plus an optional quadratic residual.
    At b_field == b_magic the linear contribution vanishes identically.
    """

    b_field: float = MAGIC_FIELD_G
    b_magic: float = MAGIC_FIELD_G
    linear_coeff: float = 0.0
    inhomogeneity_scale: float = 0.0
    quad_coeff: float = 0.0

    def rate_hz(self, intensity: np.ndarray) -> np.ndarray:
        """Per-atom frequency offset in Hz for relative intensities `intensity`."""
        db = self.b_field - self.b_magic
        return (self.linear_coeff * db + self.quad_coeff * db * db) * intensity


@dataclass(frozen=True)
class AtomEnsemble:
    """Thermal sample of atoms at t = 0.

    intensity_jitter and freq_jitter are unit-variance normals; the light
    shift and trap-frequency spreads scale them at evaluation time so the
    same sample can serve different model parameters.
    """

    positions0: np.ndarray = field(repr=False)
    velocities0: np.ndarray = field(repr=False)
    intensity_jitter: np.ndarray = field(repr=False)
    freq_jitter: np.ndarray = field(repr=False)

    @property
    def n_atoms(self) -> int:
        return self.positions0.shape[0]

    def translated(self, offset: np.ndarray) -> "AtomEnsemble":
        """Rigidly shift all initial positions (diagnostic helper)."""
        return AtomEnsemble(
            positions0=self.positions0 + np.asarray(offset),
            velocities0=self.velocities0,
            intensity_jitter=self.intensity_jitter,
            freq_jitter=self.freq_jitter,
        )


def sample_ensemble(trap: TrapParams, rng_seed: int) -> AtomEnsemble:
    """Draw a thermal ensemble: Gaussian positions and velocities per axis."""
    rng = np.random.default_rng(rng_seed)
    n = trap.n_atoms_sim
    positions = rng.standard_normal((n, 3)) * trap.sigma_position
    velocities = rng.standard_normal((n, 3)) * trap.sigma_velocity
    intensity_jitter = rng.standard_normal(n)
    freq_jitter = rng.standard_normal(n)
    return AtomEnsemble(positions, velocities, intensity_jitter, freq_jitter)


def _atom_frequencies(ensemble: AtomEnsemble, trap: TrapParams) -> np.ndarray:
    """(n_atoms, 3) per-atom angular frequencies including the spread."""
    scale = 1.0 + trap.freq_spread * ensemble.freq_jitter
    return np.outer(scale, np.asarray(trap.omega))


def evolve_positions(ensemble: AtomEnsemble, trap: TrapParams, t: float) -> np.ndarray:
    """Classical harmonic positions r(t) = r0 cos(wt) + (v0/w) sin(wt)."""
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    w = _atom_frequencies(ensemble, trap)
    return ensemble.positions0 * np.cos(w * t) + ensemble.velocities0 / w * np.sin(w * t)


def coherence_factor(
    ensemble: AtomEnsemble,
    trap: TrapParams,
    deltak: np.ndarray,
    lightshift: LightShiftModel,
    t: float,
) -> complex:
    """Ensemble-averaged spin-wave phase factor at storage time t.

    c(t) = <exp(i dk.(r(t) - r(0))) * exp(i 2 pi nu_mu t)> with nu_mu the
    atom's residual light-shift offset.  |c| <= 1, and c(0) = 1.
    """
    dr = evolve_positions(ensemble, trap, t) - ensemble.positions0
    phase = dr @ np.asarray(deltak, dtype=float)
    intensity = 1.0 + lightshift.inhomogeneity_scale * ensemble.intensity_jitter
    phase = phase + 2.0 * math.pi * lightshift.rate_hz(intensity) * t
    return complex(np.exp(1j * phase).mean())


class MemoryModel:
    """Bundled memory model: trap + geometry + light shift + intrinsic eta0.

    The thermal ensemble is sampled once from `seed` and reused for every
    time evaluation, so curves are smooth in t and runs are reproducible.
    """

    def __init__(
        self,
        trap: TrapParams,
        geometry: SpinWaveGeometry,
        lightshift: LightShiftModel,
        eta0: float = 0.16,
        seed: int = 0,
    ):
        if not 0.0 < eta0 <= 1.0:
            raise ValueError(f"eta0 must be in (0, 1], got {eta0}")
        self.trap = trap
        self.geometry = geometry
        self.lightshift = lightshift
        self.eta0 = eta0
        self.seed = seed
        self.ensemble = sample_ensemble(trap, seed)

    def coherence(self, spinwave: int, t: float) -> complex:
        dk = self.geometry.deltak_1 if spinwave == 1 else self.geometry.deltak_2
        return coherence_factor(self.ensemble, self.trap, dk, self.lightshift, t)

    def retrieval_efficiency(self, t: float) -> float:
        """eta(t) = eta0 * |c(t)|^2 averaged over the two qubit spin waves."""
        c1 = self.coherence(1, t)
        c2 = self.coherence(2, t)
        return self.eta0 * 0.5 * (abs(c1) ** 2 + abs(c2) ** 2)

    def memory_visibility(self, t: float) -> float:
        """Relative coherence d(t) of the two spin waves, d(0) = 1.

        Common-mode phases (the shared dk component and the light shift)
        cancel; only the differential grating dk1 - dk2 dephases the qubit.
        """
        dk_diff = self.geometry.deltak_1 - self.geometry.deltak_2
        dr = evolve_positions(self.ensemble, self.trap, t) - self.ensemble.positions0
        d = abs(complex(np.exp(1j * (dr @ dk_diff)).mean()))
        return min(d, 1.0)

    def characterize(self, times: np.ndarray) -> "CoherenceCurve":
        times = np.asarray(times, dtype=float)
        eff = np.array([self.retrieval_efficiency(t) for t in times])
        vis = np.array([self.memory_visibility(t) for t in times])
        return CoherenceCurve(times=times, efficiency=eff, visibility_factor=vis, eta0=self.eta0)


@dataclass(frozen=True)
class CoherenceCurve:
    """Retrieval efficiency and qubit visibility on a time grid."""

    times: np.ndarray = field(repr=False)
    efficiency: np.ndarray = field(repr=False)
    visibility_factor: np.ndarray = field(repr=False)
    eta0: float = 0.16

    def __post_init__(self):
        if np.any(self.efficiency < 0.0) or np.any(self.efficiency > 1.0):
            raise ValueError("efficiency entries must lie in [0, 1]")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t_s,efficiency,visibility_factor\n")
            for t, eta, d in zip(self.times, self.efficiency, self.visibility_factor):
                fh.write(f"{float(t)!r},{float(eta)!r},{float(d)!r}\n")
