"""Command-line front end.

Commands: simulate, fringe, memory, reproduce-table, validate-config.
Every command that writes outputs also writes a RunManifest naming them;
re-running with the same config and seed reproduces the CSV/JSON outputs
byte-identically for any worker count.
"""

from __future__ import annotations

import argparse
import copy
import math
import shlex
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import correlation_E, fit_fringe
from .channel import chain_to_channel
from .config import (
    ResolvedConfig,
    RunManifest,
    default_config,
    emit_config,
    parse_config,
    resolved_table_config,
)
from .counting import write_counts_csv
from .engine import (
    TABLE_REFERENCES,
    canonical_schedule,
    characterize_memory,
    run_experiment,
)
from .errors import SimulationError
from .qubit_state import MeasurementSetting


def _load_resolved(args) -> ResolvedConfig:
    if getattr(args, "config", None):
        return parse_config(args.config)
    return default_config()


def _apply_overrides(resolved: ResolvedConfig, args) -> ResolvedConfig:
    values = copy.deepcopy(resolved.values)
    if getattr(args, "seed", None) is not None:
        values["protocol"]["master_seed"] = args.seed
    if getattr(args, "events", None) is not None:
        values["protocol"]["target_events"] = args.events
    provenance = dict(resolved.provenance)
    return ResolvedConfig(values=values, provenance=provenance)


def _chain_manifest(config) -> dict:
    chain = config.chain
    spec = chain_to_channel(chain)
    return {
        "enabled": config.chain_enabled,
        "passive_trans": chain.passive_trans,
        "fiber_coupling_telecom": chain.fiber_coupling_telecom,
        "fiber_coupling_nir": chain.fiber_coupling_nir,
        "eff_down": chain.eff_down,
        "eff_up": chain.eff_up,
        "v_delay_ns": chain.v_delay * 1e9,
        "contrast": chain.contrast,
        "residual_factor": chain.residual_factor,
        "extra_depol": chain.extra_depol,
        "raw_product": chain.raw_product,
        "total_transmission": chain.total_transmission,
        "channel": {
            "trans_h": spec.trans_h,
            "trans_v": spec.trans_v,
            "depol": spec.depol,
            "rel_phase": spec.rel_phase,
        },
    }


def _write_manifest(out_dir: Path, resolved, config, outputs, started, extra=None) -> Path:
    manifest = RunManifest(
        artifact_version=__version__,
        config_hash=resolved.hash(),
        master_seed=config.master_seed,
        command=shlex.join(sys.argv),
        outputs=[str(p) for p in outputs],
        wall_time=time.monotonic() - started,
        extra={"chain": _chain_manifest(config), "config_echo": resolved.values,
               **(extra or {})},
    )
    path = out_dir / "manifest.json"
    path.write_text(manifest.to_json() + "\n")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    started = time.monotonic()
    resolved = _apply_overrides(_load_resolved(args), args)
    config = resolved.build()
    dataset = run_experiment(config, workers=args.workers)
    result = dataset.bell_result()

    out = _out_dir(args)
    counts_path = out / "counts.csv"
    write_counts_csv(dataset.count_matrices, counts_path)
    result_path = out / "bell_result.json"
    result_path.write_text(result.to_json() + "\n")
    stats = {
        "statistics": {
            "attempts": dataset.attempts,
            "heralds": dataset.heralds,
            "coincidences": dataset.coincidences,
            "coincidences_per_herald": dataset.coincidences / max(dataset.heralds, 1),
        }
    }
    _write_manifest(out, resolved, config, [counts_path, result_path], started, stats)
    print(f"S = {result.s_value:.4f} +/- {result.sigma_s:.4f} "
          f"({result.total_events} events) -> {out}")
    return 0


def cmd_fringe(args) -> int:
    started = time.monotonic()
    resolved = _apply_overrides(_load_resolved(args), args)
    if args.points < 4:
        raise SimulationError("fringe needs a grid of >= 4 angles")
    theta_s = _parse_angle(args.theta_s)
    grid = np.linspace(-math.pi / 2, math.pi / 2, args.points, endpoint=False)

    points = []
    for idx, theta_i in enumerate(grid):
        values = copy.deepcopy(resolved.values)
        # decorrelate the points without losing determinism
        values["protocol"]["master_seed"] = values["protocol"]["master_seed"] * 1000 + idx
        values["protocol"]["target_events"] = args.events_per_point
        point_cfg = ResolvedConfig(values, resolved.provenance).build()
        schedule = (
            MeasurementSetting(theta_s, theta_i, flipped=False),
            MeasurementSetting(theta_s, theta_i, flipped=True),
        )
        dataset = run_experiment(
            point_cfg.with_overrides(settings_schedule=schedule), workers=args.workers
        )
        e, sigma, _ = correlation_E(dataset.count_matrices[0])
        points.append((float(theta_i), e, sigma))

    fit = fit_fringe(points, fit_frequency=args.free_frequency)
    out = _out_dir(args)
    fringe_path = out / "fringe.csv"
    with open(fringe_path, "w", newline="") as fh:
        fh.write("theta_i,E,sigma,fit_value\n")
        for theta_i, e, sigma in points:
            fh.write(f"{theta_i!r},{e!r},{sigma!r},{float(fit.evaluate(theta_i))!r}\n")
    config = resolved.build()
    extra = {
        "fringe_fit": {
            "theta_s": theta_s,
            "amplitude": fit.amplitude,
            "phase": fit.phase,
            "offset": fit.offset,
            "frequency": fit.frequency,
            "residual_rms": fit.residual_rms,
            "param_sigma": list(fit.param_sigma),
        }
    }
    _write_manifest(out, resolved, config, [fringe_path], started, extra)
    print(f"fringe amplitude = {fit.amplitude:.4f} +/- {fit.param_sigma[0]:.4f}, "
          f"phase = {fit.phase:.4f} -> {fringe_path}")
    return 0


def cmd_memory(args) -> int:
    started = time.monotonic()
    resolved = _apply_overrides(_load_resolved(args), args)
    config = resolved.build()
    if args.t_max_ms <= 0.0:
        raise SimulationError("t-max-ms must be > 0")
    if args.points < 2:
        raise SimulationError("points must be >= 2")
    grid = np.linspace(0.0, args.t_max_ms * 1e-3, args.points)
    curve = characterize_memory(config, grid)
    out = _out_dir(args)
    curve_path = out / "memory_curve.csv"
    curve.write_csv(curve_path)
    _write_manifest(out, resolved, config, [curve_path], started,
                    {"eta0": curve.eta0})
    print(f"memory curve ({args.points} points to {args.t_max_ms} ms) -> {curve_path}")
    return 0


def cmd_reproduce_table(args) -> int:
    started = time.monotonic()
    resolved = resolved_table_config(args.table)
    values = copy.deepcopy(resolved.values)
    if args.seed is not None:
        values["protocol"]["master_seed"] = args.seed
    resolved = ResolvedConfig(values, resolved.provenance)
    config = resolved.build()
    from .engine import TableComparison, run_experiment as _run

    reference = TABLE_REFERENCES[args.table]
    dataset = _run(config, workers=args.workers)
    comparison = TableComparison(args.table, dataset.bell_result(), reference)

    out = _out_dir(args)
    counts_path = out / "counts.csv"
    write_counts_csv(dataset.count_matrices, counts_path)
    result_path = out / "table_comparison.json"
    import json

    result_path.write_text(json.dumps(comparison.to_dict(), indent=2, sort_keys=True) + "\n")
    _write_manifest(out, resolved, config, [counts_path, result_path], started)
    ref = comparison.reference
    print(
        f"{args.table}: simulated S = {comparison.result.s_value:.3f} "
        f"+/- {comparison.result.sigma_s:.3f}, published {ref.s_value} +/- {ref.sigma_s}, "
        f"consistent(2 sigma) = {comparison.s_consistent()}"
    )
    return 0


def cmd_validate_config(args) -> int:
    resolved = _load_resolved(args)
    resolved.build()  # raises on invariant violations
    defaulted = sorted(k for k, v in resolved.provenance.items() if v == "default")
    print(f"config OK (hash {resolved.hash()[:16]})")
    if args.verbose:
        print(emit_config(resolved), end="")
        print(f"# defaulted keys: {', '.join(defaulted) if defaulted else 'none'}")
    return 0


def _parse_angle(text: str) -> float:
    t = text.strip().lower().replace(" ", "")
    if t in ("pi/4", "pi4"):
        return math.pi / 4
    return float(t)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinwave-bell",
        description="Monte Carlo simulator of heralded spin-wave qubit storage, "
                    "telecom conversion, and CHSH Bell-test statistics.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, events=True):
        p.add_argument("--config", help="config file (defaults apply if omitted)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker count")
        if events:
            p.add_argument("--events", type=int, default=None, help="target event count")

    p = sub.add_parser("simulate", help="run a full Bell-test simulation")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fringe", help="scan E vs theta_i and fit the fringe")
    common(p, events=False)
    p.add_argument("--theta-s", default="0", help="signal angle in rad ('0' or 'pi/4')")
    p.add_argument("--points", type=int, default=8, help="number of theta_i angles")
    p.add_argument("--events-per-point", type=int, default=400)
    p.add_argument("--free-frequency", action="store_true",
                   help="fit the angular frequency too (diagnostic)")
    p.set_defaults(func=cmd_fringe)

    p = sub.add_parser("memory", help="export the retrieval-efficiency curve")
    common(p, events=False)
    p.add_argument("--t-max-ms", type=float, default=200.0)
    p.add_argument("--points", type=int, default=101)
    p.set_defaults(func=cmd_memory)

    p = sub.add_parser("reproduce-table", help="rerun a published data set")
    p.add_argument("table", choices=sorted(TABLE_REFERENCES))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_reproduce_table)

    p = sub.add_parser("validate-config", help="check a config file")
    p.add_argument("--config", help="config file (defaults apply if omitted)")
    p.add_argument("--verbose", action="store_true", help="echo the resolved config")
    p.set_defaults(func=cmd_validate_config)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SimulationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
