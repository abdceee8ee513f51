"""``simulate`` command line entry point.

Exit codes: 0 ok, 1 usage/configuration error, 2 verification or invariant
failure, 3 resource limit.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import (
    DegenerateGroundStateError,
    IntegrationError,
    InvalidParameterError,
    PreconditionError,
    ResourceError,
    SizeError,
)
from .experiments import ConfigError, execute, load_config, override, preset_names

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_RESOURCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"simulate: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="simulate",
        description="Run a stock preset or a configuration file and write CSV output.",
        epilog="presets: " + ", ".join(preset_names()),
    )
    p.add_argument("target", help="preset name or path to a configuration file")
    p.add_argument("--out", type=Path, help="output directory (default: [output] path, else ./<name>)")
    p.add_argument("--verify", action="store_true", help="compare against the dense oracle when N <= 8")
    p.add_argument("--dt", type=float, help="integration step in units of 1/g")
    p.add_argument("--gt-max", type=float, help="final time gt")
    p.add_argument("--threads", type=int, help="worker threads for sectors and sweep points")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.target)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = override(cfg, dt=args.dt, gt_max=args.gt_max, threads=args.threads, verify=args.verify or None)
        out = args.out or Path(cfg.output or cfg.name)
        outcome = execute(cfg, out)
    except (ConfigError, InvalidParameterError, SizeError, DegenerateGroundStateError, PreconditionError) as exc:
        print(f"simulate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceError as exc:
        extra = f" (estimate {exc.estimate_bytes} bytes)" if exc.estimate_bytes else ""
        print(f"simulate: resource limit: {exc}{extra}", file=sys.stderr)
        return EXIT_RESOURCE
    except IntegrationError as exc:
        print(f"simulate: integration failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    for path in outcome.files:
        print(path)
    if not outcome.ok:
        for line in outcome.failures:
            print(f"simulate: {line}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
