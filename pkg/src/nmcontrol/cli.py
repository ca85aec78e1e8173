"""Command-line entry point.

    nmcontrol grid --out grid.csv
    nmcontrol nm-family --config family.json --format json --out family.json
    nmcontrol matched-nm --set nm_samples=4000
    nmcontrol single --set n=5 --set coupling=0.1466 --seed 3

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .sweep import (
    EXPERIMENTS,
    FORMATS,
    BracketError,
    ConfigError,
    SweepFailure,
    SweepSpec,
    emit_results,
    run,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2

log = logging.getLogger("nmcontrol")


def _parse_override(text: str) -> tuple[list[str], object]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects KEY=VALUE, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def build_spec(args: argparse.Namespace) -> SweepSpec:
    experiment = args.command.replace("-", "_")
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    base = SweepSpec.defaults_for(experiment).to_dict()
    base.update(data)
    base["experiment"] = experiment
    for text in args.set or []:
        path, value = _parse_override(text)
        node = base
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot set {text!r}")
        node[path[-1]] = value
    for name in ("output", "format", "parallelism", "seed"):
        value = getattr(args, name)
        if value is not None:
            base[name] = value
    return SweepSpec.from_dict(base)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmcontrol", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        cmd = sub.add_parser(name.replace("_", "-"))
        cmd.add_argument("--config", help="JSON sweep specification")
        cmd.add_argument("--out", dest="output", help="output file (default: stdout, CSV only)")
        cmd.add_argument("--format", choices=FORMATS)
        cmd.add_argument("--parallelism", type=int)
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override a spec field, e.g. optimization.restarts=2")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = build_spec(args)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    status = EXIT_OK
    try:
        records = run(spec)
    except SweepFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        records, status = exc.records, EXIT_NUMERICAL
    except (BracketError, ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    if not records:
        return status
    if spec.output:
        try:
            emit_results(records, spec.output, spec.format, spec)
        except OSError as exc:
            print(f"cannot write {spec.output}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / f"out.{spec.format}"
            emit_results(records, path, spec.format, spec)
            sys.stdout.write(path.read_text())
    return status


if __name__ == "__main__":
    sys.exit(main())
