"""Command-line surface: inspect / record / curve / analyze / export / simulate.

Exit codes, used consistently by every subcommand:

    0  success
    1  usage, parse or I/O error
    2  inspect found warnings, or the analysis is degenerate

Data goes to stdout; diagnostics and progress go to stderr, so pipelines
stay machine-clean.  Every subcommand takes --json for machine-readable
output (a single JSON document).
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading

from . import __version__
from .analyzer import (
    attribute,
    export_csv,
    rate_to_power,
    write_result_csv,
)
from .errors import DegenerateSystem, SemoError, TooFewSamples
from .inspector import InspectorConfig, describe, evaluate
from .recorder import RecorderConfig, curve_series, load_log, run_loop, write_log
from .simulator import load_scenario, simulate
from .sources import FileTreeSource, read_battery_sample, resolve_source_root

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_WARNINGS = 2

log = logging.getLogger("semo")


def _sample_dict(sample) -> dict:
    return {
        "ts_ms": sample.ts_ms,
        "level_pct": sample.level_pct,
        "voltage_mv": sample.voltage_mv,
        "temp_dc": sample.temp_dc,
        "charge_uah": sample.charge_uah,
        "status": sample.status.value,
        "health": sample.health.value,
    }


def cmd_inspect(args) -> int:
    sample = read_battery_sample(resolve_source_root(args.source_root))
    warnings = evaluate(sample, InspectorConfig())
    if args.json:
        payload = {
            "sample": _sample_dict(sample),
            "warnings": [
                {"kind": w.kind.value, "message": w.message, "threshold": w.threshold}
                for w in warnings
            ],
        }
        print(json.dumps(payload))
    else:
        print(describe(sample))
        for w in warnings:
            print(f"warning {w.kind.value}: {w.message}")
    return EXIT_WARNINGS if warnings else EXIT_OK


def cmd_record(args) -> int:
    config = RecorderConfig(out_path=args.out, interval_s=args.interval)
    source = FileTreeSource(args.source_root)
    stop = threading.Event()

    def _handle(signum, frame):
        stop.set()

    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            signal.signal(sig, _handle)
        except ValueError:  # not on the main thread (tests drive run_loop directly)
            pass

    log.info("recording to %s every %d s; stop with SIGINT", args.out, args.interval)
    written = run_loop(config, source, stop=stop)
    if args.json:
        print(json.dumps({"records_written": written, "log": str(args.out)}))
    else:
        log.info("wrote %d records", written)
    return EXIT_OK


def cmd_curve(args) -> int:
    records = load_log(args.log)
    series = curve_series(records, tail=args.tail)
    if args.json:
        print(json.dumps({"series": [[ts, level] for ts, level in series]}))
    else:
        print("ts_ms,level_pct")
        for ts, level in series:
            print(f"{ts},{level}")
    return EXIT_OK


def _print_result_table(result, capacity_mah, voltage_mv) -> None:
    with_power = capacity_mah is not None and voltage_mv is not None
    labels = [g.label for g in result.ranking]
    width = max([len("group"), *map(len, labels)]) if labels else len("group")
    header = f"{'rank':>4}  {'group':<{width}}  {'rate_pct_per_h':>14}"
    if with_power:
        header += f"  {'power_mw':>10}"
    header += "  flags"
    print(header)
    for rank, group in enumerate(result.ranking, start=1):
        row = f"{rank:>4}  {group.label:<{width}}  {group.rate_pct_per_h:>14.4f}"
        if with_power:
            power = rate_to_power(group.rate_pct_per_h, capacity_mah, voltage_mv)
            row += f"  {power:>10.1f}"
        row += f"  {' '.join(group.flags)}"
        print(row.rstrip())
    baseline = f"baseline: {result.baseline_pct_per_h:.4f} pct/h"
    if with_power:
        baseline += f" ({rate_to_power(result.baseline_pct_per_h, capacity_mah, voltage_mv):.1f} mW)"
    print(baseline)
    print(f"residual rms: {result.residual_rms:.6f} pct/h")
    if result.unobserved:
        print(f"unobserved: {', '.join(result.unobserved)}")


def cmd_analyze(args) -> int:
    records = load_log(args.log)
    try:
        result = attribute(records, use_charge_counter=args.use_charge_counter)
    except (TooFewSamples, DegenerateSystem) as exc:
        print(f"error: analysis degenerate: {exc}", file=sys.stderr)
        return EXIT_WARNINGS

    fmt = "json" if args.json else args.format
    if fmt == "json":
        payload = result.to_dict()
        if args.capacity_mah is not None and args.voltage_mv is not None:
            for entry in payload["groups"] + payload["ranking"]:
                entry["power_mw"] = rate_to_power(entry["rate_pct_per_h"], args.capacity_mah, args.voltage_mv)
            payload["baseline_power_mw"] = rate_to_power(
                result.baseline_pct_per_h, args.capacity_mah, args.voltage_mv
            )
        print(json.dumps(payload))
    elif fmt == "csv":
        write_result_csv(sys.stdout, result, args.capacity_mah, args.voltage_mv)
    else:
        _print_result_table(result, args.capacity_mah, args.voltage_mv)
    return EXIT_OK


def cmd_export(args) -> int:
    records = load_log(args.log)
    export_csv(records, args.csv)
    if args.json:
        print(json.dumps({"rows": len(records), "csv": str(args.csv)}))
    else:
        log.info("exported %d records to %s", len(records), args.csv)
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    records = simulate(scenario)
    write_log(args.out, records)
    if args.json:
        print(json.dumps({"records_written": len(records), "log": str(args.out)}))
    else:
        log.info("simulated %d records to %s", len(records), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semo",
        description="Battery monitoring and per-application energy attribution.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="print the battery report and any warnings")
    p.add_argument("--source-root", default=None, help="battery source directory (default: $SEMO_SOURCE_ROOT)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("record", help="sample battery and apps periodically into a JSONL log")
    p.add_argument("--out", required=True, help="log file to append to")
    p.add_argument("--interval", type=int, default=60, help="seconds between samples (default 60)")
    p.add_argument("--source-root", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_record)

    p = sub.add_parser("curve", help="emit the battery-level curve as ts_ms,level_pct rows")
    p.add_argument("log")
    p.add_argument("--tail", type=int, default=None, help="only the last N points (real-time view)")
    p.add_argument("--format", choices=["csv"], default="csv")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("analyze", help="rank applications by estimated drain rate")
    p.add_argument("log")
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")
    p.add_argument("--capacity-mah", type=float, default=None, help="battery capacity for mW conversion")
    p.add_argument("--voltage-mv", type=float, default=None, help="nominal voltage for mW conversion")
    p.add_argument("--use-charge-counter", choices=["auto", "on", "off"], default="auto")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("export", help="export a log to CSV for external analysis")
    p.add_argument("log")
    p.add_argument("--csv", required=True, help="destination CSV path")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("simulate", help="generate a synthetic log from a scenario file")
    p.add_argument("scenario", help="scenario JSON document")
    p.add_argument("--out", required=True, help="log file to write")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; remap
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except (SemoError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
