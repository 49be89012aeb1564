"""Command-line entry point: ``ratealloc <subcommand> --config FILE``.

Exit status: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .experiments import run_invariant_cost_sweep, run_rate_profile, run_time_variant
from .validation import run_validation, write_report

log = logging.getLogger("ratealloc")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

RUNNERS = {
    "cost-sweep": run_invariant_cost_sweep,
    "rate-profile": run_rate_profile,
    "time-variant": run_time_variant,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ratealloc",
        description="Rate allocation for rate-limited scalar LQR control loops.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*RUNNERS, "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--replications", type=int, help="MC replications (overrides config)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def write_manifest(out: Path, command: str, cfg) -> None:
    lines = [
        f"command={command}",
        f"config_sha256={cfg.source_hash}",
        f"master_seed={cfg.mc.master_seed}",
        f"replications={cfg.mc.replications}",
        f"ratealloc={__version__}",
        f"numpy={np.__version__}",
        f"python={platform.python_version()}",
    ]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        cfg = load_config(args.config).with_overrides(args.seed, args.replications)
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out if args.out is not None else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{args.command}.csv"
    threads = max(1, args.threads)

    try:
        if args.command == "validate":
            report = run_validation(cfg, threads=threads)
            write_report(report, target)
            for c in report.checks:
                log.info("%s %s measured=%g tol=%g %s", "PASS" if c.passed else "FAIL",
                         c.name, c.measured, c.tolerance, c.detail)
            ok = report.passed
            for c in report.failures():
                print(f"FAIL {c.name}: measured={c.measured!r} tolerance={c.tolerance!r} "
                      f"{c.detail}", file=sys.stderr)
        else:
            table = RUNNERS[args.command](cfg, threads=threads, out=target)
            ok = table.ok
            log.info("wrote %d rows to %s", len(table.rows), target)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_manifest(out, args.command, cfg)
    return EXIT_OK if ok else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
