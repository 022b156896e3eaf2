"""`bound` subcommand: the constant C and the row-wise check error <= safety * C / T."""

import argparse
import logging

from adiakit.commands.common import add_common_arguments, load_config, output_dir, stem
from adiakit.services.experiment_service import get_experiment_service
from adiakit.utils.reporting import BOUND_COLUMNS, provenance, write_bound_csv, write_json

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "bound",
        help="Evaluate C(s) and compare C/T with the measured errors.",
        epilog=f"CSV columns: {BOUND_COLUMNS}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    report, rows = get_experiment_service().run_bound(config, workers=args.workers)
    out = output_dir(args, config)
    name = stem(args)
    write_bound_csv(out / f"{name}_bound.csv", report, rows, provenance(config))
    write_json(out / f"{name}_bound.json", report)
    violations = [row.T for row in rows if not row.holds]
    logger.info("C = %.6g (certified: %s)", report.C, report.norm_estimator_certified)
    if violations:
        logger.warning("bound violated at T = %s", ", ".join(f"{T:.4g}" for T in violations))
        return 1
    return 0
