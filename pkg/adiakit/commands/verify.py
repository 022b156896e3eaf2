"""`verify` subcommand: run the invariant suites and write a JSON report."""

import argparse
import logging

from adiakit.commands.common import add_common_arguments, load_config, output_dir, stem
from adiakit.services.verification_service import get_verification_service
from adiakit.utils.reporting import write_json

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "verify",
        help="Run the invariant checks; exit status 1 when any check fails.",
    )
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    report = get_verification_service().run(config)
    write_json(output_dir(args, config) / f"{stem(args)}_verify.json", report)
    failed = [check.name for check in report.checks if not check.passed]
    if failed:
        logger.error("failed checks: %s", ", ".join(failed))
        return 1
    return 0
