"""Command-line entry point: ``sepdmrg run | oracle | verify``."""
from __future__ import annotations

import argparse
import logging
import sys

from .ed_oracle import OracleConvergenceError, OracleSizeError
from .experiment import ConfigError, format_oracle_report, oracle_compare, parse_config, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_MISMATCH = 0, 1, 2, 3


def _load(path):
    with open(path) as fh:
        return parse_config(fh.read())


def _cmd_run(args) -> int:
    cfg = _load(args.config)
    out = args.out or cfg.output
    if not out:
        raise ConfigError("no output path: pass --out or set [output] path")
    records = run_experiment(cfg, out=out, threads=args.threads)
    bad = [r for r in records if not r.converged]
    print(f"wrote {len(records)} records to {out}")
    if bad:
        for r in bad:
            print(f"not converged: {r.param_name}={r.param_value:g} {r.partition_label}",
                  file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _cmd_oracle(args) -> int:
    cfg = _load(args.config)
    rows = oracle_compare(cfg)
    print(format_oracle_report(rows, args.tol))
    return EXIT_MISMATCH if any(r.delta > args.tol for r in rows) else EXIT_OK


def _cmd_verify(args) -> int:
    from .acceptance import run_all

    results = run_all(include_full_run=args.full)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sepdmrg",
                                 description="Minimal energies of partially separable spin-chain states.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a parameter scan and write CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.add_argument("--threads", type=int, default=None)
    run.set_defaults(func=_cmd_run)

    orc = sub.add_parser("oracle", help="compare DMRG against exact references")
    orc.add_argument("--config", required=True)
    orc.add_argument("--tol", type=float, default=1e-8)
    orc.set_defaults(func=_cmd_oracle)

    ver = sub.add_parser("verify", help="run the built-in acceptance suite")
    ver.add_argument("--full", action="store_true", help="include the full n=24 scan")
    ver.set_defaults(func=_cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, OSError, OracleSizeError, OracleConvergenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
