"""Command-line front end.

    hbtms run          --config FILE | --preset NAME  --out DIR
    hbtms sweep        --config FILE | --preset NAME  --out DIR [--jobs N]
    hbtms convergence  --config FILE | --preset NAME  --out DIR [--dts 4,2,1,0.5]
    hbtms validate-props [--out DIR]

Exit codes: 0 ok, 1 other failure, 2 config error, 3 solver divergence.
Set HBTMS_LOG=DEBUG|INFO|WARNING for log verbosity.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import (PRESET_ALIASES, PRESETS, ConfigError, ParsedConfig, effective_config_text, load_config,
                     parse_config, preset)
from .materials import (COOLANT_TABLE, PARAFFIN_RT35, RT35_T_L, RT35_T_S, SOLID_TABLE, CatalogError,
                        DomainError, nanofluid_consistency_checks)
from .metrics import SweepRow, SweepTable, kpi_csv_text, kpi_text, summarize, sweep, sweep_notes
from .network import GeometryError
from .solver import DivergenceError, simulate, time_step_convergence

log = logging.getLogger("hbtms")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3
CONFIG_ERRORS = (ConfigError, CatalogError, DomainError, GeometryError)


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load(args) -> ParsedConfig:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("", "give exactly one of --config or --preset")
    try:
        parsed = load_config(args.config) if args.config else preset(args.preset)
    except FileNotFoundError:
        raise ConfigError("--config", f"no such file: {args.config}") from None
    if args.dt_override is not None:
        if not args.dt_override > 0:
            raise ConfigError("--dt-override", "must be positive")
        raw = dict(parsed.raw)
        raw["solver"] = dict(raw.get("solver") or {}, dt=args.dt_override)
        parsed = parse_config(raw)
    return parsed


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    parsed = _load(args)
    out = _out_dir(args)
    scenario = parsed.base
    if len(parsed.grid) > 1:
        log.warning("config defines a sweep; 'run' uses the base scenario only")
    _write(out / "effective_config.yaml", effective_config_text(parsed))
    net = scenario.network()
    net.write_csv(out / "nodes.csv", out / "edges.csv")
    try:
        result = simulate(scenario, net)
    except DivergenceError as exc:
        if exc.partial is not None:
            exc.partial.to_csv(out / "series.csv")
            exc.partial.write_audit(out / "audit.txt")
        _write(out / "FAILED", f"{exc}\n")
        print(f"error: solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    result.to_csv(out / "series.csv")
    result.write_audit(out / "audit.txt")
    table = SweepTable((), (SweepRow(0, scenario.name, {}, summarize(result), result.audit.relative_closure),))
    _write(out / "kpi.csv", kpi_csv_text(table))
    _write(out / "kpi.txt", kpi_text(table))
    print(kpi_text(table), end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    parsed = _load(args)
    if args.jobs < 1:
        raise ConfigError("--jobs", "must be >= 1")
    out = _out_dir(args)
    _write(out / "effective_config.yaml", effective_config_text(parsed))
    table = sweep(parsed.grid, jobs=args.jobs, baseline=parsed.baseline)
    runs = out / "runs"
    runs.mkdir(exist_ok=True)
    for row in table.rows:
        if row.series_csv:
            _write(runs / f"{row.index:03d}.csv", row.series_csv)
    _write(out / "kpi.csv", kpi_csv_text(table))
    _write(out / "kpi.txt", kpi_text(table))
    notes = sweep_notes(table)
    _write(out / "notes.txt", "".join(n + "\n" for n in notes))
    print(kpi_text(table), end="")
    failed = [r for r in table.rows if not r.ok]
    if failed:
        _write(out / "FAILED", "".join(f"row {r.index} ({r.name}): {r.error}\n" for r in failed))
        return EXIT_DIVERGED if any(r.diverged for r in failed) else EXIT_FAIL
    return EXIT_OK


def cmd_convergence(args) -> int:
    parsed = _load(args)
    try:
        dts = [float(x) for x in args.dts.split(",")]
    except ValueError:
        raise ConfigError("--dts", f"expected a comma-separated list of numbers, got {args.dts!r}") from None
    out = _out_dir(args)
    _write(out / "effective_config.yaml", effective_config_text(parsed))
    try:
        report = time_step_convergence(parsed.base, dts)
    except ValueError as exc:
        raise ConfigError("--dts", str(exc)) from None
    except DivergenceError as exc:
        _write(out / "FAILED", f"{exc}\n")
        print(f"error: solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    _write(out / "convergence.txt", report.to_text())
    print(report.to_text(), end="")
    return EXIT_OK


def props_report() -> tuple[str, bool]:
    lines = ["coolants (rho kg/m3, c J/kg/K, k W/m/K, mu Pa s):"]
    for name, row in COOLANT_TABLE.items():
        lines.append(f"  {name:<9} " + "  ".join(f"{v!r:>9}" for v in row))
    lines.append("solids (rho, c, k):")
    for name, row in SOLID_TABLE.items():
        lines.append(f"  {name:<9} " + "  ".join(f"{v!r:>9}" for v in row))
    lines.append(f"RT35: {PARAFFIN_RT35}, T_S={RT35_T_S}, T_L={RT35_T_L}, latent heat: required input")
    lines.append("nanofluid mixing-rule checks:")
    checks = nanofluid_consistency_checks()
    for c in checks:
        lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    ok = all(c.passed for c in checks)
    lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
    return "\n".join(lines) + "\n", ok


def cmd_validate_props(args) -> int:
    text, ok = props_report()
    print(text, end="")
    if args.out:
        _write(_out_dir(args) / "props.txt", text)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hbtms", description="Hybrid battery thermal management simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        src = p.add_argument_group("scenario source")
        src.add_argument("--config", help="scenario YAML file")
        src.add_argument("--preset", help=f"bundled scenario: {', '.join([*PRESETS, *PRESET_ALIASES])}")
        p.add_argument("--out", required=needs_out, help="output directory")
        p.add_argument("--dt-override", type=float, default=None, help="replace the configured time step (s)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")

    common(sub.add_parser("run", help="simulate one scenario"))
    common(sub.add_parser("sweep", help="simulate a scenario grid"))
    p = sub.add_parser("convergence", help="time-step convergence study")
    common(p)
    p.add_argument("--dts", default="4,2,1,0.5", help="descending comma-separated time steps (s)")
    p = sub.add_parser("validate-props", help="print property catalogs and mixing-rule checks")
    p.add_argument("--out", default=None)
    return parser


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "convergence": cmd_convergence, "validate-props": cmd_validate_props}


def main(argv=None) -> int:
    level = getattr(logging, os.environ.get("HBTMS_LOG", "WARNING").upper(), None)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
