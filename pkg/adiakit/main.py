"""Main command-line entry point."""

import argparse
import logging
import sys
from typing import Optional, Sequence

from adiakit import __version__
from adiakit.commands import bound, spectrum, sweep, verify
from adiakit.config import get_settings
from adiakit.exceptions import AdiakitError, ConfigError

logger = logging.getLogger("adiakit")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adiakit",
        description="Adiabatic-theorem experiments for open quantum systems.",
    )
    parser.add_argument("--version", action="version", version=f"adiakit {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Register subcommands
    spectrum.register(subparsers)
    sweep.register(subparsers)
    verify.register(subparsers)
    bound.register(subparsers)
    return parser


def configure_logging(level: Optional[str] = None) -> None:
    level = (level or get_settings().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except AdiakitError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
