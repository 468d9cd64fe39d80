"""Command-line harness writing plot-ready CSV data.

Every CSV starts with ``#`` manifest comments followed by one header line.
Data rows depend only on the resolved configuration and flags, so two runs
with identical inputs produce identical bodies.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .correlations import MAX_CORRELATION_CHARGERS, correlation_trace
from .metrics import AnalysisError, advantage_report
from .protocols import (
    FitError,
    asymptotic_charge,
    charge_sweep,
    charging_grid,
    parallel_baseline,
    qcbl_run,
    storage_decay,
)
from .spin_core import ConfigError, DimensionError, SystemConfig, parse_config_text

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
PRESET_SYSTEMS = (3, 9, 12, 18, 36)


class UsageError(ValueError):
    pass


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    options: dict
    outputs: list = field(default_factory=list)
    version: str = __version__
    timestamp: str = ""
    deterministic: bool = True


# ---------------------------------------------------------------------------
# configuration resolution
# ---------------------------------------------------------------------------


def preset_names() -> list[str]:
    root = resources.files("starbattery") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def _load_sections(args) -> dict[str, dict[str, str]]:
    if args.config and args.preset:
        raise UsageError("use either --config or --preset, not both")
    if args.preset:
        path = resources.files("starbattery") / "presets" / f"{args.preset}.cfg"
        if not path.is_file():
            raise UsageError(f"unknown preset {args.preset!r}; choose from {preset_names()}")
        return parse_config_text(path.read_text())
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        return parse_config_text(text)
    return {"system": {}}


def resolve(args) -> tuple[SystemConfig, dict[str, dict[str, str]]]:
    """Config file (or preset) values overridden by command-line flags."""
    sections = _load_sections(args)
    system = {k: v for k, v in sections["system"].items() if v.strip()}
    system.setdefault("n_chargers", "9")
    system.setdefault("epsilon", "1e-5")
    overrides = {
        "n_chargers": args.n,
        "epsilon": args.epsilon,
        "gamma": args.gamma,
        "coupling_j_hz": getattr(args, "coupling_j", None),
        "coupling_j_bl_hz": getattr(args, "coupling_j_bl", None),
        "t1_battery_s": getattr(args, "t1_battery", None),
        "t1_charger_s": getattr(args, "t1_charger", None),
    }
    for key, value in overrides.items():
        if value is not None:
            system[key] = str(value)
    if args.pure:
        system["epsilon"] = "1.0"
        system["gamma"] = "1.0"
    return SystemConfig.from_mapping(system), sections


def _section_value(sections, section, key, default, cast=float):
    raw = sections.get(section, {}).get(key, "")
    return cast(raw) if raw.strip() else default


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: Path, header: list[str], rows, manifest: RunManifest) -> None:
    manifest.outputs.append(path.name)
    with path.open("w", newline="") as fh:
        fh.write(f"# starbattery {manifest.version} {manifest.subcommand}\n")
        fh.write(f"# manifest: manifest_{manifest.subcommand}.json\n")
        fh.write(f"# timestamp: {manifest.timestamp}\n")
        for key, value in manifest.config.items():
            fh.write(f"# config {key} = {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_manifest(out: Path, manifest: RunManifest) -> None:
    path = out / f"manifest_{manifest.subcommand}.json"
    path.write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")


def _pool_map(func, items, workers: int):
    """Ordered map, optionally across processes; output order never changes."""
    if workers <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _grid(args, sections, section) -> int:
    grid = args.grid if args.grid is not None else _section_value(sections, section, "grid", 200, int)
    if grid < 3:
        raise UsageError("--grid must be at least 3 points per period")
    return grid


def _charge_one(job):
    config, grid = job
    return charge_sweep(config, charging_grid(config.n_chargers, grid))


def cmd_charge(args, manifest: RunManifest, out: Path) -> int:
    config, sections = resolve(args)
    grid = _grid(args, sections, "charge")
    manifest.config = config.to_mapping()
    if not args.advantage:
        trace = _charge_one((config, grid))
        write_csv(out / f"charge_N{config.n_chargers}.csv", ["theta", "tau_normalized", "e_b"],
                  zip(trace.theta, trace.tau_normalized, trace.e_b), manifest)
        return EXIT_OK
    ns = sorted(set(args.n_list or PRESET_SYSTEMS) | {config.n_chargers})
    configs = [config.replace(n_chargers=n) for n in ns]
    traces = _pool_map(_charge_one, [(c, grid) for c in configs], args.workers)
    # parallel baseline spans enough of its longer period to contain the peak
    base = parallel_baseline(config, charging_grid(1, grid))
    rows = []
    for c, trace in zip(configs, traces):
        write_csv(out / f"charge_N{c.n_chargers}.csv", ["theta", "tau_normalized", "e_b"],
                  zip(trace.theta, trace.tau_normalized, trace.e_b), manifest)
        rep = advantage_report(c, trace, base)
        rows.append((c.n_chargers, rep.gamma_advantage, np.sqrt(c.n_chargers), rep.cluster_size_estimate))
    write_csv(out / "gamma_vs_n.csv", ["n", "gamma_measured", "gamma_sqrt_n", "cluster_size_estimate"],
              rows, manifest)
    return EXIT_OK


def cmd_ergotropy(args, manifest: RunManifest, out: Path) -> int:
    config, sections = resolve(args)
    grid = _grid(args, sections, "ergotropy")
    manifest.config = config.to_mapping()
    ns = args.n_list or [config.n_chargers]
    configs = [config.replace(n_chargers=n) for n in ns]
    traces = _pool_map(_charge_one, [(c, grid) for c in configs], args.workers)
    for c, trace in zip(configs, traces):
        _, e_max = trace.peak()
        # plotted normalization: ergotropy / (eps * hbar omega_B * e_max)
        scaled = trace.ergotropy / (abs(c.epsilon) * e_max)
        write_csv(out / f"ergotropy_N{c.n_chargers}.csv",
                  ["theta", "tau_normalized", "e_b", "ergotropy", "ergotropy_ratio", "ergotropy_scaled"],
                  zip(trace.theta, trace.tau_normalized, trace.e_b, trace.ergotropy,
                      trace.ergotropy_ratio, scaled), manifest)
    return EXIT_OK


def cmd_correlations(args, manifest: RunManifest, out: Path) -> int:
    config, sections = resolve(args)
    if config.n_chargers > MAX_CORRELATION_CHARGERS:
        raise DimensionError(
            f"correlations need the full two-spin reduction: N <= {MAX_CORRELATION_CHARGERS}, "
            f"got N = {config.n_chargers}"
        )
    grid = _grid(args, sections, "correlations")
    manifest.config = config.to_mapping()
    theta = charging_grid(config.n_chargers, grid)
    trace = correlation_trace(config, theta, units=args.units)
    write_csv(out / f"correlations_N{config.n_chargers}.csv",
              ["theta", "tau_normalized", "e_b_pure", "e_b_mixed", f"entropy_{args.units}",
               "discord_peak_normalized", "discord_raw_bits"],
              zip(trace.theta, trace.tau_normalized, trace.e_b_pure, trace.e_b_mixed,
                  trace.entropy, trace.discord_normalized, trace.discord), manifest)
    return EXIT_OK


def _asym_one(job):
    config, delta, iterations = job
    return asymptotic_charge(config, delta, iterations)


def cmd_asymptotic(args, manifest: RunManifest, out: Path) -> int:
    config, sections = resolve(args)
    if config.t1_battery is None or config.t1_charger is None:
        raise ConfigError("asymptotic charging needs t1_battery_s and t1_charger_s")
    manifest.config = config.to_mapping()
    iterations = args.iterations or _section_value(sections, "asymptotic", "iterations", 20, int)
    if args.deltas:
        deltas = [float(d) for d in args.deltas]
    else:
        lo = _section_value(sections, "asymptotic", "delta_min", 0.5)
        hi = _section_value(sections, "asymptotic", "delta_max", 30.0)
        count = _section_value(sections, "asymptotic", "delta_count", 25, int)
        deltas = list(np.linspace(lo, hi, count))
    if iterations < 1 or any(d < 0 for d in deltas):
        raise UsageError("iterations must be >= 1 and delays non-negative")
    runs = _pool_map(_asym_one, [(config, d, iterations) for d in deltas], args.workers)
    trace_rows, summary_rows = [], []
    for run in runs:
        for k, (t, e) in enumerate(zip(run.times, run.e_b_per_iteration), start=1):
            trace_rows.append((run.delta, k, t, e))
        amp = run.fit.amplitude
        rms_frac = run.fit.residual_rms / abs(amp) if run.fit.converged and amp else float("nan")
        summary_rows.append((run.delta, run.saturation, run.saturation / run.unitary_max,
                             amp, run.fit.time_constant, rms_frac, run.fit.converged))
    write_csv(out / "asymptotic_trace.csv", ["delta_s", "iteration", "time_s", "e_b"], trace_rows, manifest)
    write_csv(out / "asymptotic_summary.csv",
              ["delta_s", "saturation", "saturation_fraction", "fit_amplitude",
               "fit_time_constant_s", "fit_rms_fraction", "fit_converged"],
              summary_rows, manifest)
    return EXIT_OK


def cmd_qcbl(args, manifest: RunManifest, out: Path) -> int:
    config, sections = resolve(args)
    if config.coupling_j_bl is None:
        raise ConfigError("QCBL needs coupling_j_bl_hz")
    if config.t1_battery is None:
        raise ConfigError("QCBL storage needs t1_battery_s")
    manifest.config = config.to_mapping()
    points = args.grid or _section_value(sections, "qcbl", "grid", 100, int)
    if points < 3:
        raise UsageError("--grid must be at least 3")
    x = np.linspace(0.0, 1.0, points + 1)
    trace = qcbl_run(config, x, 0.0)
    write_csv(out / "qcbl_discharge.csv", ["jbl_tau", "tau_prime_s", "e_b", "e_l"],
              zip(trace.jbl_tau, trace.tau_prime, trace.e_b, trace.e_l), manifest)
    tau_max = args.tau_s_max or _section_value(sections, "qcbl", "tau_s_max", 120.0)
    tau_pts = args.tau_s_points or _section_value(sections, "qcbl", "tau_s_points", 25, int)
    tau_s, e_l, fit = storage_decay(config, np.linspace(0.0, tau_max, tau_pts))
    if not fit.converged:
        raise FitError("storage-decay fit did not converge")
    write_csv(out / "qcbl_storage.csv", ["tau_s", "e_l"], zip(tau_s, e_l), manifest)
    write_csv(out / "qcbl_fit.csv", ["parameter", "value"],
              [("amplitude", fit.amplitude), ("time_constant_s", fit.time_constant),
               ("offset", fit.offset), ("residual_rms", fit.residual_rms)], manifest)
    return EXIT_OK


COMMANDS = {
    "charge": cmd_charge,
    "ergotropy": cmd_ergotropy,
    "correlations": cmd_correlations,
    "asymptotic": cmd_asymptotic,
    "qcbl": cmd_qcbl,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key-value config file")
    common.add_argument("--preset", help="packaged system preset (e.g. ttss, star_n9)")
    common.add_argument("--n", type=int, help="number of charger spins")
    common.add_argument("--epsilon", type=float, help="battery purity factor")
    common.add_argument("--gamma", type=float, help="relative gyromagnetic ratio")
    common.add_argument("--pure", action="store_true", help="set epsilon = gamma = 1")
    common.add_argument("--grid", type=int, help="samples per pure-state charging period")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--units", choices=["bits", "nats"], default="bits",
                        help="entropy units (discord is always in bits)")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--coupling-j", type=float, help="battery-charger J in Hz")

    parser = argparse.ArgumentParser(prog="starbattery", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("charge", parents=[common], help="energy versus charging phase")
    p.add_argument("--advantage", action="store_true", help="also write gamma_vs_n.csv")
    p.add_argument("--n-list", type=int, nargs="+", help="charger counts for --advantage")

    p = sub.add_parser("ergotropy", parents=[common], help="ergotropy traces")
    p.add_argument("--n-list", type=int, nargs="+", help="one trace per charger count")

    sub.add_parser("correlations", parents=[common], help="entropy and discord traces")

    p = sub.add_parser("asymptotic", parents=[common], help="iterative charging with T1 relaxation")
    p.add_argument("--deltas", type=float, nargs="+", help="delays in seconds")
    p.add_argument("--iterations", type=int, help="iterations per delay (default 20)")
    p.add_argument("--t1-battery", type=float)
    p.add_argument("--t1-charger", type=float)

    p = sub.add_parser("qcbl", parents=[common], help="charger-battery-load circuit")
    p.add_argument("--coupling-j-bl", type=float, help="battery-load J in Hz")
    p.add_argument("--t1-battery", type=float)
    p.add_argument("--tau-s-max", type=float, help="longest storage time in seconds")
    p.add_argument("--tau-s-points", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    manifest = RunManifest(
        subcommand=args.command,
        config={},
        options={k: v for k, v in vars(args).items() if k not in ("command", "out", "workers")},
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    try:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](args, manifest, out)
    except (ConfigError, DimensionError, UsageError, OSError) as exc:
        print(f"starbattery {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AnalysisError, FitError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"starbattery {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _write_manifest(out, manifest)
    return code


if __name__ == "__main__":
    sys.exit(main())
