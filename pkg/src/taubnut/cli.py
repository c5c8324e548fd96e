"""Command-line front end: taubnut <suite> [flags].

Exit codes: 0 when every record passes, 1 when some record fails, 2 for
configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import io
import json
import logging
import sys
from pathlib import Path

from .suites import SUITES, ConfigError, ExperimentConfig, ReportRecord, SuiteResult, run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

CONFIG_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"suite"}


def _ints(s: str) -> tuple:
    try:
        return tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {s!r}") from exc


def _floats(s: str) -> tuple:
    try:
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {s!r}") from exc


def _int(s: str) -> int:
    try:
        v = float(s)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {s!r}") from exc
    if v != int(v):
        raise ConfigError(f"expected an integer, got {s!r}")
    return int(v)


def _float(s: str) -> float:
    try:
        return float(s)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {s!r}") from exc


PARSERS = {
    "n": _int, "weights": _ints, "a": _float, "c": _float, "alpha": _float, "samples": _int,
    "radii": _floats, "lambdas": _floats, "seed": _int, "tol_scale": _float, "case": str.lower,
    "starts": _int, "out": str,
}


def parse_config_text(text: str) -> dict:
    """Flat key = value lines; '#' starts a comment; unknown keys are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = PARSERS[key](val) if val else None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="taubnut", description="Numerical experiments on deformed hyperkaehler cones.")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="suite", required=True)
    for name in SUITES:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat key = value file; flags override it")
        s.add_argument("--n")
        s.add_argument("--weights")
        s.add_argument("--a")
        s.add_argument("--c")
        s.add_argument("--alpha")
        s.add_argument("--samples")
        s.add_argument("--radii")
        s.add_argument("--lambdas")
        s.add_argument("--seed")
        s.add_argument("--tol-scale", dest="tol_scale")
        s.add_argument("--case")
        s.add_argument("--starts")
        s.add_argument("--out", help="write <out>.csv and <out>.json")
        s.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    return p


def config_from_args(args) -> ExperimentConfig:
    values = {}
    if args.config:
        try:
            values.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    for key in CONFIG_KEYS:
        raw = getattr(args, key, None)
        if raw is not None:
            values[key] = PARSERS[key](raw)
    return ExperimentConfig(suite=args.suite, **values).resolved()


def csv_text(result: SuiteResult, timestamp: str) -> str:
    buf = io.StringIO()
    buf.write(f"# generated {timestamp} wall_time={result.wall_time:.3f}s\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ReportRecord.CSV_COLUMNS)
    for r in result.records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def json_summary(result: SuiteResult, timestamp: str) -> dict:
    return {
        "suite": result.config.suite,
        "passed": result.passed,
        "failed": result.failed,
        "generated": timestamp,
        "wall_time": result.wall_time,
        "config": dict(result.config.items()),
        "records": [r.as_dict() for r in result.records],
    }


def format_table(result: SuiteResult) -> str:
    lines = []
    for r in result.records:
        mark = "PASS" if r.passed else "FAIL"
        if r.comparison == "info":
            mark = "info"
        bound = ""
        if r.comparison == "le":
            bound = f"<= {r.tolerance:.3g}"
        elif r.comparison == "abs_le":
            bound = f"= {r.target} +- {r.tolerance:.3g}"
        elif r.comparison == "gt":
            bound = f"> {r.target}"
        elif r.comparison == "eq":
            bound = f"== {r.target}"
        val = f"{r.value:.6g}" if isinstance(r.value, float) else str(r.value)
        lines.append(f"{mark:4}  {r.case:28}  {r.quantity:40}  {val:>14}  {bound}")
    lines.append(f"{result.config.suite}: {result.passed} passed, {result.failed} failed, "
                 f"{result.wall_time:.1f}s")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        # the output is itself a valid config file for the same suite
        for k, v in cfg.items():
            print(f"# {k} = {v}" if k == "suite" else f"{k} = {v}")
        return EXIT_OK
    try:
        result = run_suite(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    print(format_table(result))
    if cfg.out:
        out = Path(cfg.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{out}.csv").write_text(csv_text(result, stamp), encoding="utf-8")
        Path(f"{out}.json").write_text(json.dumps(json_summary(result, stamp), indent=2) + "\n",
                                            encoding="utf-8")
    return EXIT_OK if result.ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
