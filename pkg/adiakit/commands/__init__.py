"""CLI subcommands."""

from . import bound, spectrum, sweep, verify

__all__ = ["bound", "spectrum", "sweep", "verify"]
