"""``ptp`` command line: ``ptp {train-offline,train-online,process} --config ...``."""

from __future__ import annotations

import argparse
import sys

from ptp.config import ConfigurationError, parse_override
from ptp.workers import EXIT_CONFIG, WORKERS


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _override(text: str) -> str:
    try:
        parse_override(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ptp", description="Run configuration-defined pipelines.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {"train-offline": "train with a full validation pass after every epoch",
             "train-online": "train by episodes, validating one batch every interval",
             "process": "single pass over the test task"}
    for command, help_text in helps.items():
        p = sub.add_parser(command, help=help_text)
        p.add_argument("--config", required=True,
                       help="comma-separated YAML files, merged left to right")
        p.add_argument("--expdir", default="./experiments",
                       help="root directory for experiment outputs (default: %(default)s)")
        p.add_argument("--seed", type=int, default=None, help="experiment seed (default: 1337)")
        p.add_argument("--log-level", default="info",
                       choices=["debug", "info", "warning", "error"])
        p.add_argument("--set", dest="overrides", action="append", default=[], type=_override,
                       metavar="KEY.PATH=VALUE", help="override a configuration value; repeatable")
        p.add_argument("--prefetch", type=int, default=0,
                       help="number of batches prepared ahead in a background thread")
    return parser


def parse_cli(argv=None) -> dict:
    args = make_parser().parse_args(argv)
    return {
        "command": args.command,
        "configs": [c.strip() for c in args.config.split(",") if c.strip()],
        "exp_dir": args.expdir,
        "seed": args.seed,
        "log_level": args.log_level,
        "overrides": list(args.overrides),
        "prefetch": args.prefetch,
    }


def main(argv=None) -> int:
    opts = parse_cli(argv)
    worker = WORKERS[opts["command"]](
        opts["configs"], opts["overrides"], expdir=opts["exp_dir"], seed=opts["seed"],
        log_level=opts["log_level"], prefetch=opts["prefetch"])
    return worker.run()


if __name__ == "__main__":
    sys.exit(main())
