"""Shared argument handling for the adiakit subcommands."""

import argparse
import json
import logging
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from adiakit.exceptions import ConfigError
from adiakit.models.schemas import ExperimentConfig

logger = logging.getLogger(__name__)


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, type=Path, help="Experiment config (JSON).")
    parser.add_argument("--out", type=Path, default=None, help="Output directory (default: the config's 'outputs').")
    parser.add_argument("--seed", type=int, default=None, help="Override the config seed.")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes for sweep rows.")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR.")


def load_config(path: Path, seed: Optional[int] = None) -> ExperimentConfig:
    """Parse and validate a JSON config, reporting line/column or the field path on failure."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", location=str(path)) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, location=f"{path}: line {exc.lineno} column {exc.colno}") from exc
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ConfigError(f"{first['msg']} ({exc.error_count()} error(s))", location=f"{path}: {field}") from exc
    if seed is not None:
        config = config.model_copy(update={"seed": seed})
    logger.debug("loaded %s for family %s", path, config.family.name)
    return config


def output_dir(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    out = Path(args.out) if args.out is not None else Path(config.outputs)
    out.mkdir(parents=True, exist_ok=True)
    return out


def stem(args: argparse.Namespace) -> str:
    return Path(args.config).stem
