"""Run every bundled parametric study and print its KPI table.

    python3 scripts/run_studies.py [--jobs N] [--out DIR] [--flow G_PER_S] [study ...]

``--flow`` replaces the baseline mass flow of every row, e.g. ``--flow 0.6``
reruns the 6 g/s studies at the enhanced-cooling baseline flow.
"""
import argparse
import dataclasses
import time
from pathlib import Path

from hbtms.config import PRESETS, preset
from hbtms.metrics import kpi_csv_text, kpi_text, sweep

STUDIES = [name for name in PRESETS if name != "default-3c"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("studies", nargs="*", metavar="study", help=f"any of {', '.join(STUDIES)} (default: all)")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None, help="also write <study>.csv files here")
    ap.add_argument("--flow", type=float, default=None, help="override baseline mass flow, g/s")
    args = ap.parse_args()
    unknown = sorted(set(args.studies) - set(STUDIES))
    if unknown:
        ap.error(f"unknown study: {', '.join(unknown)}")
    for name in args.studies or STUDIES:
        parsed = preset(name)
        t0 = time.perf_counter()
        grid = parsed.grid
        if args.flow is not None:
            grid = [dataclasses.replace(s, schedule=dataclasses.replace(s.schedule, v_m=args.flow * 1e-3))
                    for s in grid]
        table = sweep(grid, jobs=args.jobs, baseline=parsed.baseline)
        suffix = "" if args.flow is None else f", flow override {args.flow:g} g/s"
        print(f"== {name} ({len(table)} rows{suffix}, {time.perf_counter() - t0:.1f} s)")
        print(kpi_text(table))
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{name}.csv").write_text(kpi_csv_text(table))


if __name__ == "__main__":
    main()
