"""Experiment orchestration: heralded write loop, storage, detection, datasets.

run_experiment composes the per-herald conditional state as a Werner state
whose visibility is the product source * memory * channel, draws clicks
until the event quota per analyzer setting is met, and returns a Dataset.

Reproducibility contract: every (setting, flip, chunk) slice of the quota
has its own deterministic seed derived from the master seed, and the quota
is always partitioned into the same fixed number of chunks, so results are
bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import CANONICAL_SETTINGS, BellResult, bell_result
from .channel import ChannelSpec, ConversionChain, chain_to_channel
from .counting import CountMatrix, DetectorBank, _simulate_click_batch
from .errors import ProgressError
from .memory import (
    CoherenceCurve,
    LightShiftModel,
    MemoryModel,
    TrapParams,
    spinwave_wavevectors,
)
from .qubit_state import Arm, MeasurementSetting, apply_arm_channel, apply_werner, \
    click_probabilities, make_bell_phi_plus

N_CHUNKS = 16


def canonical_schedule() -> tuple[MeasurementSetting, ...]:
    """The four CHSH settings, each with its pi/2-flipped partner."""
    schedule = []
    for ts, ti in CANONICAL_SETTINGS:
        for flipped in (False, True):
            schedule.append(MeasurementSetting(ts, ti, flipped=flipped))
    return tuple(schedule)


@dataclass(frozen=True)
class MemoryParams:
    """Inputs needed to build a MemoryModel."""

    trap: TrapParams
    wavelength_write: float = 795e-9
    half_angle: float = math.radians(0.9)
    tilt_phi: float = math.radians(0.5)
    lightshift: LightShiftModel = field(default_factory=LightShiftModel)
    eta0: float = 0.16
    ensemble_seed: int = 12345

    def build(self) -> MemoryModel:
        geometry = spinwave_wavevectors(self.wavelength_write, self.half_angle, self.tilt_phi)
        return MemoryModel(
            trap=self.trap,
            geometry=geometry,
            lightshift=self.lightshift,
            eta0=self.eta0,
            seed=self.ensemble_seed,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    memory: MemoryParams
    p_herald: float = 3e-4
    storage_time: float = 1e-3
    source_visibility: float = 0.99
    chain_enabled: bool = False
    chain: ConversionChain = field(default_factory=ConversionChain)
    detectors: DetectorBank = field(default_factory=DetectorBank)
    settings_schedule: tuple[MeasurementSetting, ...] = field(default_factory=canonical_schedule)
    target_events: int = 1000
    master_seed: int = 1
    idler_passive_trans: float = 0.25
    max_attempts: int = 10**12

    def __post_init__(self):
        if not 1e-5 <= self.p_herald <= 1e-1:
            raise ValueError(f"p_herald {self.p_herald} outside [1e-5, 1e-1]")
        if self.target_events < 1:
            raise ValueError(f"target_events must be >= 1, got {self.target_events}")
        if not 0.0 <= self.source_visibility <= 1.0:
            raise ValueError(f"source_visibility {self.source_visibility} outside [0, 1]")
        if self.storage_time < 0.0:
            raise ValueError(f"storage_time must be >= 0, got {self.storage_time}")

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)


@dataclass
class Dataset:
    """Counts plus protocol bookkeeping for one simulated run."""

    count_matrices: list[CountMatrix]
    heralds: int
    attempts: int
    config_echo: ExperimentConfig
    seed: int

    @property
    def coincidences(self) -> int:
        return sum(m.n_coincidences for m in self.count_matrices)

    def bell_result(self) -> BellResult:
        return bell_result(self.count_matrices)


def _conditional_state(config: ExperimentConfig, memory: MemoryModel):
    """Werner state seen by the detectors plus the per-herald pair probability."""
    d = memory.memory_visibility(config.storage_time)
    state = apply_werner(make_bell_phi_plus(), config.source_visibility * d)
    survival = 1.0
    if config.chain_enabled:
        state, survival = apply_arm_channel(state, Arm.SIGNAL, chain_to_channel(config.chain))
    eta = memory.retrieval_efficiency(config.storage_time)
    p_pair = eta * config.idler_passive_trans * survival
    return state, p_pair


def _split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _run_chunk(probs, p_herald, bank, quota, seed_key, max_heralds):
    """Simulate heralds until `quota` coincidences; deterministic per seed_key."""
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))
    counts = np.zeros(4, dtype=np.int64)
    heralds = 0
    attempts = 0
    remaining = quota
    p_guess = max(float(np.sum(probs)), 1e-9)
    while remaining > 0:
        batch = min(int(remaining / p_guess * 1.3) + 64, 2_000_000)
        outcomes = _simulate_click_batch(probs, bank, rng, batch)
        hits = np.nonzero(outcomes >= 0)[0]
        if hits.size >= remaining:
            used = int(hits[remaining - 1]) + 1
            accepted = outcomes[:used]
            remaining = 0
        else:
            used = batch
            accepted = outcomes
            remaining -= hits.size
        counts += np.bincount(accepted[accepted >= 0], minlength=4)
        heralds += used
        attempts += int(rng.geometric(p_herald, size=used).sum())
        if remaining > 0 and heralds > max_heralds:
            raise ProgressError(
                "event target unreachable: "
                f"{heralds} heralds produced too few coincidences (quota {quota})"
            )
    return counts, heralds, attempts


def run_experiment(config: ExperimentConfig, workers: int = 1) -> Dataset:
    memory = config.memory.build()
    state, p_pair = _conditional_state(config, memory)

    base_settings: list[MeasurementSetting] = []
    flips: dict[tuple[float, float], list[MeasurementSetting]] = {}
    for setting in config.settings_schedule:
        key = setting.base_key()
        if key not in flips:
            flips[key] = []
            base_settings.append(MeasurementSetting(setting.theta_s, setting.theta_i))
        flips[key].append(setting)

    per_setting = _split(config.target_events, len(base_settings))
    max_heralds = max(int(config.max_attempts * config.p_herald) // N_CHUNKS, 10_000)

    tasks = []  # (base_idx, flipped, chunk_idx, quota, probs)
    for base_idx, base in enumerate(base_settings):
        variants = flips[base.base_key()]
        per_variant = _split(per_setting[base_idx], len(variants))
        for var_idx, variant in enumerate(variants):
            probs = np.array(click_probabilities(state, variant)) * p_pair
            for chunk_idx, quota in enumerate(_split(per_variant[var_idx], N_CHUNKS)):
                if quota == 0:
                    continue
                seed_key = (config.master_seed, base_idx, int(variant.flipped), chunk_idx)
                tasks.append((base_idx, variant.flipped, quota, seed_key, probs))

    def execute(task):
        base_idx, flipped, quota, seed_key, probs = task
        counts, heralds, attempts = _run_chunk(
            probs, config.p_herald, config.detectors, quota, seed_key, max_heralds
        )
        return base_idx, flipped, counts, heralds, attempts

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(execute, tasks))
    else:
        results = [execute(t) for t in tasks]

    matrices = [CountMatrix(setting=base) for base in base_settings]
    total_heralds = 0
    total_attempts = 0
    for base_idx, flipped, counts, heralds, attempts in results:
        if flipped:
            matrices[base_idx].counts_flipped += counts
        else:
            matrices[base_idx].counts += counts
        matrices[base_idx].trials += heralds
        total_heralds += heralds
        total_attempts += attempts
    return Dataset(
        count_matrices=matrices,
        heralds=total_heralds,
        attempts=total_attempts,
        config_echo=config,
        seed=config.master_seed,
    )


def characterize_memory(config: ExperimentConfig, time_grid) -> CoherenceCurve:
    """Evaluate eta(t) and d(t) on a grid at the configured ensemble seed."""
    times = np.asarray(time_grid, dtype=float)
    if times.size == 0:
        raise ValueError("time grid must be nonempty")
    if times.size > 1 and np.any(np.diff(times) <= 0.0):
        raise ValueError("time grid must be strictly increasing")
    if times[0] < 0.0:
        raise ValueError("time grid must be nonnegative")
    return config.memory.build().characterize(times)


@dataclass(frozen=True)
class TableReference:
    """Published correlation values a reproduction run is compared against."""

    storage_time: float
    events: int
    s_value: float
    sigma_s: float
    e_rows: tuple[tuple[float, float, float, float], ...]  # theta_s, theta_i, E, sigma


TABLE_REFERENCES = {
    "table1_1ms": TableReference(
        storage_time=1e-3, events=582, s_value=2.90, sigma_s=0.12,
        e_rows=(
            (math.pi / 4, -math.pi / 8, -0.78, 0.05),
            (math.pi / 4, math.pi / 8, 0.71, 0.07),
            (0.0, -math.pi / 8, 0.75, 0.05),
            (0.0, math.pi / 8, 0.66, 0.06),
        ),
    ),
    "table1_100ms": TableReference(
        storage_time=0.1, events=1001, s_value=2.66, sigma_s=0.09,
        e_rows=(
            (math.pi / 4, -math.pi / 8, -0.65, 0.05),
            (math.pi / 4, math.pi / 8, 0.67, 0.05),
            (0.0, -math.pi / 8, 0.66, 0.05),
            (0.0, math.pi / 8, 0.68, 0.05),
        ),
    ),
    "table2_1us": TableReference(
        storage_time=1e-6, events=986, s_value=2.55, sigma_s=0.10,
        e_rows=(
            (math.pi / 4, -math.pi / 8, -0.54, 0.05),
            (math.pi / 4, math.pi / 8, 0.65, 0.05),
            (0.0, -math.pi / 8, 0.78, 0.04),
            (0.0, math.pi / 8, 0.58, 0.05),
        ),
    ),
    "table2_10ms": TableReference(
        storage_time=10e-3, events=667, s_value=2.64, sigma_s=0.12,
        e_rows=(
            (math.pi / 4, -math.pi / 8, -0.61, 0.06),
            (math.pi / 4, math.pi / 8, 0.72, 0.06),
            (0.0, -math.pi / 8, 0.75, 0.05),
            (0.0, math.pi / 8, 0.56, 0.07),
        ),
    ),
}


@dataclass(frozen=True)
class TableComparison:
    table_id: str
    result: BellResult
    reference: TableReference

    @property
    def combined_sigma_s(self) -> float:
        return math.hypot(self.result.sigma_s, self.reference.sigma_s)

    def s_consistent(self, k_sigma: float = 2.0) -> bool:
        return abs(self.result.s_value - self.reference.s_value) \
            <= k_sigma * self.combined_sigma_s

    def to_dict(self) -> dict:
        return {
            "table_id": self.table_id,
            "simulated": self.result.to_dict(),
            "published": {
                "S": self.reference.s_value,
                "sigma_S": self.reference.sigma_s,
                "events": self.reference.events,
            },
            "combined_sigma_S": self.combined_sigma_s,
            "consistent_2sigma": self.s_consistent(2.0),
        }


def reproduce_table(table_id: str, seed: int = 1, workers: int = 1) -> TableComparison:
    """Run the shipped calibration for one published data set and compare."""
    from .config import table_config  # deferred: config builds on engine types

    if table_id not in TABLE_REFERENCES:
        raise KeyError(f"unknown table id {table_id!r}; options: {sorted(TABLE_REFERENCES)}")
    reference = TABLE_REFERENCES[table_id]
    config = table_config(table_id).with_overrides(
        master_seed=seed, target_events=reference.events
    )
    dataset = run_experiment(config, workers=workers)
    return TableComparison(table_id=table_id, result=dataset.bell_result(), reference=reference)
