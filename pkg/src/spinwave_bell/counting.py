"""Click-level detection: efficiencies, dark counts, coincidence bookkeeping.

A trial is one heralded retrieval attempt.  The photon-pair outcome is drawn
from the four port probabilities (which may sum to less than one when losses
leave a vacuum component), each detector thins the photon with its
efficiency, dark counts superimpose, and a coincidence is accepted only when
exactly one signal-side and one idler-side detector fire.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import SimulationError
from .qubit_state import MeasurementSetting

# Detector pair labels in count order: C13, C14, C23, C24.
PAIRS = ((1, 3), (1, 4), (2, 3), (2, 4))

CSV_HEADER = ["theta_s", "theta_i", "flipped", "c13", "c14", "c23", "c24", "trials"]


@dataclass(frozen=True)
class DetectorBank:
    """Four detector efficiencies (D1, D2 signal side; D3, D4 idler side)."""

    eff: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    dark_prob: float = 0.0

    def __post_init__(self):
        values = (*self.eff, self.dark_prob)
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError(f"detector parameters must lie in [0, 1], got {values}")


@dataclass
class CountMatrix:
    """Coincidence counts accumulated at one analyzer setting."""

    setting: MeasurementSetting
    counts: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    counts_flipped: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    trials: int = 0

    def combined(self) -> np.ndarray:
        """Flip-balanced counts: a pi/2 flip exchanges ports 1<->2 and 3<->4.

        Flipped C24 therefore measures the same correlation as unflipped
        C13, and summing the exchanged flipped counts cancels first-order
        detector-efficiency imbalance.
        """
        f = self.counts_flipped
        return self.counts + np.array([f[3], f[2], f[1], f[0]])

    @property
    def n_coincidences(self) -> int:
        return int(self.counts.sum() + self.counts_flipped.sum())


def simulate_clicks(
    probabilities, bank: DetectorBank, rng: np.random.Generator
) -> tuple[int, int] | None:
    """One detection trial.  Returns a detector pair (n, m) or None.

    `probabilities` are the four photon-pair port probabilities
    (C13, C14, C23, C24 order); their sum may be < 1 (vacuum remainder).
    """
    p = np.asarray(probabilities, dtype=float)
    if p.min() < -1e-12 or p.sum() > 1.0 + 1e-9:
        raise ValueError(f"invalid port probabilities {probabilities}")
    outcome = _simulate_click_batch(p, bank, rng, 1)[0]
    if outcome < 0:
        return None
    return PAIRS[outcome]


def _simulate_click_batch(
    probabilities: np.ndarray, bank: DetectorBank, rng: np.random.Generator, n: int
) -> np.ndarray:
    """Vectorized trials; returns outcome index 0..3 per trial, -1 otherwise."""
    edges = np.cumsum(probabilities)
    draw = rng.random(n)
    port = np.searchsorted(edges, draw)  # 4 means no photon pair

    # Photon hits: detector indices 0..3 = D1, D2, D3, D4.
    fired = np.zeros((n, 4), dtype=bool)
    has_pair = port < 4
    eff = np.asarray(bank.eff)
    if has_pair.any():
        idx = np.nonzero(has_pair)[0]
        sig_det = port[idx] // 2       # 0 -> D1, 1 -> D2
        idl_det = 2 + port[idx] % 2    # 2 -> D3, 3 -> D4
        fired[idx, sig_det] = rng.random(idx.size) < eff[sig_det]
        fired[idx, idl_det] = rng.random(idx.size) < eff[idl_det]
    if bank.dark_prob > 0.0:
        fired |= rng.random((n, 4)) < bank.dark_prob

    sig_count = fired[:, :2].sum(axis=1)
    idl_count = fired[:, 2:].sum(axis=1)
    ok = (sig_count == 1) & (idl_count == 1)
    outcome = np.full(n, -1, dtype=np.int64)
    if ok.any():
        sig = fired[ok, 1].astype(np.int64)  # 0 if D1 fired, 1 if D2
        idl = fired[ok, 3].astype(np.int64)
        outcome[ok] = sig * 2 + idl
    return outcome


def accumulate(settings, outcomes) -> list[CountMatrix]:
    """Bin tagged outcomes into one CountMatrix per base setting.

    `settings` lists the expected analyzer settings (flip variants of one
    angle pair share a matrix).  `outcomes` yields (setting, outcome)
    pairs where outcome is a detector pair (n, m) or None; a setting not in
    the schedule raises SimulationError.
    """
    matrices: dict[tuple[float, float], CountMatrix] = {}
    for setting in settings:
        key = setting.base_key()
        if key not in matrices:
            base = MeasurementSetting(setting.theta_s, setting.theta_i, flipped=False)
            matrices[key] = CountMatrix(setting=base)
    for setting, outcome in outcomes:
        key = setting.base_key()
        if key not in matrices:
            raise SimulationError(f"outcome at unknown setting {setting}")
        matrix = matrices[key]
        matrix.trials += 1
        if outcome is None:
            continue
        n, m = outcome
        index = (n - 1) * 2 + (m - 3)
        if setting.flipped:
            matrix.counts_flipped[index] += 1
        else:
            matrix.counts[index] += 1
    return list(matrices.values())


def write_counts_csv(matrices, path) -> None:
    """One row per (setting, flip flag), frozen column layout."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for matrix in matrices:
            s = matrix.setting
            for flipped, counts in ((False, matrix.counts), (True, matrix.counts_flipped)):
                writer.writerow(
                    [repr(s.theta_s), repr(s.theta_i), int(flipped), *counts.tolist(),
                     matrix.trials]
                )


def read_counts_csv(path) -> list[CountMatrix]:
    matrices: dict[tuple[float, float], CountMatrix] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise SimulationError(f"unexpected counts CSV header {reader.fieldnames}")
        for row in reader:
            setting = MeasurementSetting(float(row["theta_s"]), float(row["theta_i"]))
            key = setting.base_key()
            if key not in matrices:
                matrices[key] = CountMatrix(setting=setting)
            matrix = matrices[key]
            counts = np.array([int(row[c]) for c in ("c13", "c14", "c23", "c24")])
            if int(row["flipped"]):
                matrix.counts_flipped += counts
            else:
                matrix.counts += counts
            matrix.trials = int(row["trials"])
    return list(matrices.values())
