"""Utilities package."""

from .reporting import (
    provenance,
    write_bound_csv,
    write_json,
    write_plot_script,
    write_spectrum_csv,
    write_spectrum_plot_script,
    write_sweep_csv,
)

__all__ = [
    "provenance",
    "write_bound_csv",
    "write_json",
    "write_plot_script",
    "write_spectrum_csv",
    "write_spectrum_plot_script",
    "write_sweep_csv",
]
