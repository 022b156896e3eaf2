"""Configuration management for adiakit numerical tolerances and defaults."""

from contextlib import contextmanager
from functools import lru_cache
from typing import Iterator, Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables (prefix ADIAKIT_)."""

    # Operator validation
    hermitian_tol: float = 1e-12
    density_tol: float = 1e-10

    # Spectral analysis
    zero_tol: float = 1e-10  # relative to the spectral radius
    cluster_tol: float = 1e-8
    reconstruction_tol: float = 1e-8
    gap_threshold: float = 1e-9  # relative to the spectral radius
    singular_shift_cond: float = 1e13
    fd_step: float = 1e-5
    x_base_step: float = 1e-4
    max_order: int = 3

    # Induced trace norm estimator
    norm_restarts: int = 6
    norm_iterations: int = 200
    norm_samples: int = 256
    norm_certify_tol: float = 1e-4

    # Propagation
    max_step_norm: float = 5.0  # h * T * ||L|| per substep
    richardson_tol: float = 1e-8
    richardson_t_scale: float = 1e-4
    max_substeps: int = 2**24
    chunk_size: int = 2**14
    ode_tol: float = 1e-10
    euler_steps: int = 4096

    # Davies generators
    bohr_tol: float = 1e-9
    pv_tolerance: float = 1e-8
    pv_cutoff_multiple: float = 10.0
    lamb_table_points: int = 801

    # Bounds and scans
    sup_grid_points: int = 101
    crossing_ratio: float = 1e-3
    fit_window_fraction: float = 0.4
    bound_safety: float = 2.0
    expansion_nodes: int = 401

    # Runtime
    workers: int = 4
    log_level: str = "INFO"
    seed: int = 0

    class Config:
        env_prefix = "ADIAKIT_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        extra = "ignore"


_active: Optional[Settings] = None


@lru_cache()
def _load_settings() -> Settings:
    return Settings()


def get_settings() -> Settings:
    """Get the active settings instance (cached, or the current override)."""
    if _active is not None:
        return _active
    return _load_settings()


@contextmanager
def settings_override(**changes) -> Iterator[Settings]:
    """Temporarily replace selected settings, e.g. per-experiment tolerances."""
    global _active
    previous = _active
    updates = {key: value for key, value in changes.items() if value is not None}
    _active = get_settings().model_copy(update=updates)
    try:
        yield _active
    finally:
        _active = previous
