"""Command line entry point.

::

    skewswitch [--config PATH] [--out DIR] [--seed N] [--suite NAME] [--threads N] [COMMAND]

Commands: ``construct``, ``verify-cones``, ``verify-splitting``,
``lyapunov``, ``witness-incoherence``, ``profiles dump`` and ``report``
(the default, which runs every suite).  ``--suite`` restricts ``report``
to one suite and may be repeated.

Exit status: 0 when every suite that ran passed, 1 on a verification
failure, 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import ConfigInvalid, SkewSwitchError
from .suites import COMMAND_SUITES, SUITES, build_context, profiles_dump, run_suites

COMMANDS = ("construct", "verify-cones", "verify-splitting", "lyapunov", "witness-incoherence", "profiles",
            "report")


def to_json(obj):
    """Recursively convert numpy and non-finite values for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def write_json(path, obj):
    path.write_text(json.dumps(to_json(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _options(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON run configuration")
    parser.add_argument("--out", default=default, help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, default=default, help="RNG seed (unsigned 64-bit)")
    parser.add_argument("--suite", action="append", choices=SUITES, default=default,
                        help="restrict 'report' to this suite; may be repeated")
    parser.add_argument("--threads", type=int, default=default, help="worker processes for independent suites")


def make_parser():
    parser = argparse.ArgumentParser(prog="skewswitch", description="Bundle-switching skew product verifier.")
    _options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command")
    common = argparse.ArgumentParser(add_help=False)
    _options(common, suppress=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "profiles":
            p.add_argument("action", choices=["dump"])
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    command = args.command or "report"
    threads = 1 if args.threads is None else args.threads
    try:
        if args.seed is not None and not (0 <= args.seed < 2**64):
            raise ConfigInvalid([("seed", "must be an unsigned 64-bit integer")])
        if threads < 1:
            raise ConfigInvalid([("threads", "must be >= 1")])
        cfg = load_config(args.config, seed=args.seed, output=args.out)
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        if command == "profiles":
            ctx = build_context(cfg)
            for name, (header, rows) in profiles_dump(ctx).items():
                write_csv(out / name, header, rows)
            print(f"wrote {out / 'profiles.csv'}")
            return 0
        names = COMMAND_SUITES[command]
        if command == "report" and args.suite:
            names = tuple(s for s in SUITES if s in args.suite)
        report, exports, timings = run_suites(cfg, names, threads, extra_exports=command == "report")
    except ConfigInvalid as exc:
        print("configuration error:", file=sys.stderr)
        for fld, msg in exc.problems:
            print(f"  {fld}: {msg}", file=sys.stderr)
        return 2
    except SkewSwitchError as exc:
        # numeric constraints of the base or profiles that only show at construction
        print(f"configuration error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    write_json(out / "report.json", report)
    write_json(out / "timings.json", timings)
    for name, (header, rows) in exports.items():
        write_csv(out / name, header, rows)
    for name, sec in report["suites"].items():
        print(f"{name:12s} {sec['status']}")
    print(f"verdict      {report['verdict']}  ({out / 'report.json'})")
    return 0 if report["verdict"] == "pass" else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
