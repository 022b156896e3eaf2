"""Services package: numerical modules and experiment orchestration."""

__all__ = [
    "superop",
    "spectral",
    "propagate",
    "davies",
    "bounds",
    "experiment_service",
    "verification_service",
]
