"""`sweep` subcommand: adiabatic error over a T ladder with a power-law fit."""

import argparse
import logging

from adiakit.commands.common import add_common_arguments, load_config, output_dir, stem
from adiakit.services.experiment_service import family_from_spec, get_experiment_service
from adiakit.services.propagate import error_points
from adiakit.utils.reporting import SWEEP_COLUMNS, write_json, write_plot_script, write_sweep_csv

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "sweep",
        help="Propagate over the T ladder, fit error ~ c / T^eta, write CSV, JSON and a plot script.",
        epilog=f"CSV columns: {SWEEP_COLUMNS}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    result = get_experiment_service().run_sweep(config, workers=args.workers)
    out = output_dir(args, config)
    name = stem(args)
    csv_path = write_sweep_csv(out / f"{name}_sweep.csv", result, error_points(config.error_grid)[:-1])
    write_json(out / f"{name}_sweep.json", result)

    family = family_from_spec(config.family)
    write_plot_script(
        out / f"{name}_sweep_plot.py",
        csv_path.name,
        title=f"{family.name}: adiabatic error",
        fit=result.fit,
        theoretical_exponent=family.theoretical_exponent,
    )
    flagged = sum(row.flagged for row in result.rows)
    if flagged:
        logger.warning("%d of %d rows flagged and excluded from the fit", flagged, len(result.rows))
    return 0
