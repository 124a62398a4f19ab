"""Configuration schema, parsing, and the run manifest.

Config files are INI-style key/value sections (source, memory, chain,
detectors, protocol).  Numeric keys carry explicit units in their names.
Unknown keys are rejected by name; every value not present in the file is
filled from the defaults below and marked with "default" provenance.

Fitted calibration values (they are not published numbers):
  * memory temperature, trap-frequency spread, and the residual field
    offset b_field - b_magic are fitted jointly so that the default memory
    curve matches the published efficiency ratio and decay/revival shape;
  * chain residual_factor lifts the stated per-element transmission
    product (~4.67%) to the measured 7.5% total;
  * chain extra_depol (the table2_* shipped calibrations) covers conversion decoherence
    beyond what the classical 100:1 contrast accounts for;
  * source visibility is fitted once against the 1 ms data set.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
from dataclasses import dataclass
from importlib import resources

from .channel import ConversionChain
from .counting import DetectorBank
from .engine import ExperimentConfig, MemoryParams
from .errors import ConfigError
from .memory import RB87_MASS, LightShiftModel, TrapParams
from scipy import constants

ARTIFACT_VERSION = "0.1.0"

# section -> key -> (parser, default, validator or None)
_POSITIVE = ("must be > 0", lambda v: v > 0)
_UNIT = ("must lie in [0, 1]", lambda v: 0.0 <= v <= 1.0)


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA = {
    "source": {
        "visibility": (float, 0.99, _UNIT),
    },
    "memory": {
        "temperature_uk": (float, 5.2, _POSITIVE),
        "omega_x_hz": (float, 8100.0, _POSITIVE),
        "omega_y_hz": (float, 116.0, _POSITIVE),
        "omega_z_hz": (float, 10.0, _POSITIVE),
        "trap_depth_uk": (float, 56.0, _POSITIVE),
        "atom_mass_amu": (float, RB87_MASS / constants.u, _POSITIVE),
        "n_atoms": (int, 100_000, ("must be >= 100", lambda v: v >= 100)),
        "freq_spread": (float, 0.067, ("must lie in [0, 0.5]", lambda v: 0.0 <= v <= 0.5)),
        "wavelength_write_nm": (float, 795.0, _POSITIVE),
        "half_angle_deg": (float, 0.9, ("must lie in [0, 90)", lambda v: 0.0 <= v < 90.0)),
        "tilt_phi_deg": (float, 0.5, None),
        "b_field_g": (float, 4.25, _POSITIVE),
        "b_magic_g": (float, 4.2, _POSITIVE),
        "linear_coeff_hz_per_g": (float, 95.0, None),
        "inhomogeneity_scale": (float, 0.30, ("must be >= 0", lambda v: v >= 0.0)),
        "quad_coeff_hz_per_g2": (float, 0.0, None),
        "eta0": (float, 0.16, ("must lie in (0, 1]", lambda v: 0.0 < v <= 1.0)),
        "ensemble_seed": (int, 12345, None),
    },
    "chain": {
        "enabled": (_bool, False, None),
        "passive_trans": (float, 0.25, _UNIT),
        "fiber_coupling_telecom": (float, 0.8, _UNIT),
        "fiber_coupling_nir": (float, 0.8, _UNIT),
        "eff_down": (float, 0.54, _UNIT),
        "eff_up": (float, 0.54, _UNIT),
        "v_delay_ns": (float, 235.0, ("must be >= 0", lambda v: v >= 0.0)),
        "contrast": (float, 100.0, ("must be >= 1", lambda v: v >= 1.0)),
        "residual_factor": (float, 1.6075, _POSITIVE),
        "extra_depol": (float, 0.0, _UNIT),
        "telecom_fiber_length_m": (float, 100.0, ("must be >= 0", lambda v: v >= 0.0)),
        "fiber_atten_db_per_km": (float, 0.0, ("must be >= 0", lambda v: v >= 0.0)),
    },
    "detectors": {
        "eff_d1": (float, 1.0, _UNIT),
        "eff_d2": (float, 1.0, _UNIT),
        "eff_d3": (float, 1.0, _UNIT),
        "eff_d4": (float, 1.0, _UNIT),
        "dark_prob": (float, 0.0, _UNIT),
    },
    "protocol": {
        "p_herald": (float, 3e-4, ("must lie in [1e-5, 1e-1]", lambda v: 1e-5 <= v <= 1e-1)),
        "storage_time_ms": (float, 1.0, ("must be >= 0", lambda v: v >= 0.0)),
        "target_events": (int, 1000, ("must be >= 1", lambda v: v >= 1)),
        "master_seed": (int, 1, None),
        "idler_passive_trans": (float, 0.25, _UNIT),
    },
}

TABLE_CONFIG_FILES = {
    "table1_1ms": "table1_1ms.cfg",
    "table1_100ms": "table1_100ms.cfg",
    "table2_1us": "table2_1us.cfg",
    "table2_10ms": "table2_10ms.cfg",
}


@dataclass(frozen=True)
class ResolvedConfig:
    """Fully resolved config values plus per-key provenance."""

    values: dict  # section -> key -> value
    provenance: dict  # "section.key" -> "file" | "default"

    def hash(self) -> str:
        """Stable over semantically identical configs (canonical JSON)."""
        canon = json.dumps(self.values, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def build(self) -> ExperimentConfig:
        v = self.values
        mem = v["memory"]
        trap = TrapParams(
            omega=tuple(2.0 * math.pi * mem[k] for k in ("omega_x_hz", "omega_y_hz", "omega_z_hz")),
            temperature=mem["temperature_uk"] * 1e-6,
            atom_mass=mem["atom_mass_amu"] * constants.u,
            depth_u0=mem["trap_depth_uk"] * 1e-6,
            n_atoms_sim=mem["n_atoms"],
            freq_spread=mem["freq_spread"],
        )
        lightshift = LightShiftModel(
            b_field=mem["b_field_g"],
            b_magic=mem["b_magic_g"],
            linear_coeff=mem["linear_coeff_hz_per_g"],
            inhomogeneity_scale=mem["inhomogeneity_scale"],
            quad_coeff=mem["quad_coeff_hz_per_g2"],
        )
        memory = MemoryParams(
            trap=trap,
            wavelength_write=mem["wavelength_write_nm"] * 1e-9,
            half_angle=math.radians(mem["half_angle_deg"]),
            tilt_phi=math.radians(mem["tilt_phi_deg"]),
            lightshift=lightshift,
            eta0=mem["eta0"],
            ensemble_seed=mem["ensemble_seed"],
        )
        ch = v["chain"]
        chain = ConversionChain(
            passive_trans=ch["passive_trans"],
            fiber_coupling_telecom=ch["fiber_coupling_telecom"],
            fiber_coupling_nir=ch["fiber_coupling_nir"],
            eff_down=ch["eff_down"],
            eff_up=ch["eff_up"],
            v_delay=ch["v_delay_ns"] * 1e-9,
            contrast=ch["contrast"],
            residual_factor=ch["residual_factor"],
            extra_depol=ch["extra_depol"],
            telecom_fiber_length=ch["telecom_fiber_length_m"],
            fiber_atten_db_per_km=ch["fiber_atten_db_per_km"],
        )
        det = v["detectors"]
        detectors = DetectorBank(
            eff=(det["eff_d1"], det["eff_d2"], det["eff_d3"], det["eff_d4"]),
            dark_prob=det["dark_prob"],
        )
        proto = v["protocol"]
        try:
            return ExperimentConfig(
                memory=memory,
                p_herald=proto["p_herald"],
                storage_time=proto["storage_time_ms"] * 1e-3,
                source_visibility=v["source"]["visibility"],
                chain_enabled=ch["enabled"],
                chain=chain,
                detectors=detectors,
                target_events=proto["target_events"],
                master_seed=proto["master_seed"],
                idler_passive_trans=proto["idler_passive_trans"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _resolve(parser: configparser.ConfigParser) -> ResolvedConfig:
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
    values: dict = {}
    provenance: dict = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (cast, default, check) in keys.items():
            if parser.has_option(section, key):
                raw = parser.get(section, key)
                try:
                    value = cast(raw)
                except ValueError as exc:
                    raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from exc
                provenance[f"{section}.{key}"] = "file"
            else:
                value = default
                provenance[f"{section}.{key}"] = "default"
            if check is not None:
                message, ok = check
                if not ok(value):
                    raise ConfigError(f"{section}.{key} = {value}: {message}")
            values[section][key] = value
    return ResolvedConfig(values=values, provenance=provenance)


def parse_config_text(text: str) -> ResolvedConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return _resolve(parser)


def parse_config(path) -> ResolvedConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def emit_config(resolved: ResolvedConfig) -> str:
    """Serialize a resolved config; parse_config_text(emit_config(c)) == c."""
    parser = configparser.ConfigParser(interpolation=None)
    for section, keys in resolved.values.items():
        parser[section] = {key: repr(value) if not isinstance(value, bool) else str(value).lower()
                           for key, value in keys.items()}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def default_config() -> ResolvedConfig:
    return parse_config_text("")


def table_config(table_id: str) -> ExperimentConfig:
    """Shipped calibration for one published data set."""
    if table_id not in TABLE_CONFIG_FILES:
        raise KeyError(f"unknown table id {table_id!r}")
    text = resources.files("spinwave_bell.configs").joinpath(
        TABLE_CONFIG_FILES[table_id]
    ).read_text()
    return parse_config_text(text).build()


def resolved_table_config(table_id: str) -> ResolvedConfig:
    text = resources.files("spinwave_bell.configs").joinpath(
        TABLE_CONFIG_FILES[table_id]
    ).read_text()
    return parse_config_text(text)


@dataclass
class RunManifest:
    """Reproducibility record written next to every output file."""

    artifact_version: str
    config_hash: str
    master_seed: int
    command: str
    outputs: list[str]
    wall_time: float
    extra: dict | None = None

    def to_dict(self) -> dict:
        data = {
            "artifact_version": self.artifact_version,
            "config_hash": self.config_hash,
            "master_seed": self.master_seed,
            "command": self.command,
            "outputs": self.outputs,
            "wall_time_s": self.wall_time,
        }
        if self.extra:
            data.update(self.extra)
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
