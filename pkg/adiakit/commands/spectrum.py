"""`spectrum` subcommand: eigenvalue moduli along the path."""

import argparse
import logging

from adiakit.commands.common import add_common_arguments, load_config, output_dir, stem
from adiakit.services.experiment_service import get_experiment_service
from adiakit.utils.reporting import SPECTRUM_COLUMNS, provenance, write_spectrum_csv, write_spectrum_plot_script

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "spectrum",
        help="Scan |lambda_j(s)| on a grid and write a CSV with a plot script.",
        epilog=f"CSV columns: {SPECTRUM_COLUMNS}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed)
    rows = get_experiment_service().run_spectrum(config)
    closed = [row.s for row in rows if row.gap == 0.0]
    if closed:
        logger.info("gap closes at s = %s", ", ".join(f"{s:.4g}" for s in closed))
    out = output_dir(args, config)
    csv_path = write_spectrum_csv(out / f"{stem(args)}_spectrum.csv", rows, provenance(config))
    write_spectrum_plot_script(
        out / f"{stem(args)}_spectrum_plot.py", csv_path.name, f"{config.family.name}: Liouvillian spectrum"
    )
    return 0
