"""Command line entry point: ``rnfgeo <subcommand> --config PATH``."""

from __future__ import annotations

import argparse
import datetime
import logging
import os
import sys

from . import experiments
from .config import EXPERIMENTS, load_config, with_overrides
from .errors import ConfigError, DomainError, NumericError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("rnfgeo")


def build_parser():
    parser = argparse.ArgumentParser(prog="rnfgeo", description="Random neural field kernels and level-set geometry.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value experiment file")
        p.add_argument("--out", help="output CSV (default: the config's output, else stdout)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, default=experiments.default_workers(),
                       help="worker processes for replica loops (default: logical cores)")
        p.add_argument("--deterministic", action="store_true", help="omit the timestamp header line")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def header(deterministic):
    lines = [f"# schema={experiments.SCHEMA}"]
    if not deterministic:
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        lines.append(f"# generated={stamp}")
    return "\n".join(lines) + "\n"


def _write(path, text):
    if not path or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _suffixed(path, suffix):
    root, ext = os.path.splitext(path)
    return f"{root}{suffix}{ext}"


def run(args):
    cfg = load_config(args.config)
    if cfg.experiment and cfg.experiment != args.command:
        raise ConfigError(f"config is for {cfg.experiment!r}, not {args.command!r}", "experiment")
    cfg = with_overrides(cfg, experiment=args.command)
    cfg = with_overrides(cfg, seed=args.seed, output=args.out)
    if args.workers < 1:
        raise ConfigError("must be positive", "workers")
    cfg.validate()
    result = experiments.render(cfg, args.workers)
    head = header(args.deterministic)
    _write(cfg.output, head + result.body)
    for suffix, text in result.extra.items():
        _write(_suffixed(cfg.samples_output, suffix), head + text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except (ConfigError, DomainError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except NumericError as exc:
        log.error("numeric error: %s", exc)
        return EXIT_NUMERIC
    except BrokenPipeError:
        # reader went away (e.g. piped into head); not an error of ours
        sys.stderr.close()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
