"""Command line entry point: ``twoweight <command> --config <path>``."""
from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

from .commands import COMMANDS, run
from .config import ConfigError, load_config

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("thread count must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twoweight",
                                description="Two-weight inequality constants and verification suites.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--seed", type=_u64, help="override the config seed")
    p.add_argument("--threads", type=_positive, default=1, help="worker threads for suites")
    p.add_argument("--timing", action="store_true",
                   help="include wall-clock timing (makes the report non-reproducible)")
    return p


def write_csv_tables(report, out: Path) -> list[Path]:
    """Side files <out>.<table>.csv for every table that is a list of flat rows."""
    written = []
    for name, rows in sorted(report.to_json()["tables"].items()):
        if not (isinstance(rows, list) and rows and all(isinstance(r, dict) for r in rows)):
            continue
        keys = sorted({k for r in rows for k, v in r.items() if not isinstance(v, (dict, list))})
        path = out.with_name(f"{out.stem}.{name}.csv")
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys, extrasaction="ignore", lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        written.append(path)
    return written


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"twoweight: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        report = run(args.command, cfg, args.threads)
    except ValueError as exc:
        print(f"twoweight: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    suites = report.extra.pop("suite_seconds", None)
    if args.timing:
        report.timing = {"seconds": time.perf_counter() - t0, "threads": args.threads}
        if suites:
            report.timing["suites"] = suites
    text = report.dumps()
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        write_csv_tables(report, out)
    else:
        sys.stdout.write(text)
    summary = report.to_json()["summary"]
    print(f"twoweight {args.command}: {summary['checks']} checks, {summary['failed']} failed",
          file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
