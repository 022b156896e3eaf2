"""Models package for configuration schemas, result records and Liouvillian families."""

from .records import (
    BohrDecomposition,
    ErrorSample,
    EvolutionRecord,
    SpectralData,
    WitnessRecord,
)
from .schemas import (
    BathSpec,
    BoundReport,
    CrossingReport,
    ExperimentConfig,
    FamilySpec,
    GapReport,
    PowerLawFit,
    PropagatorConfig,
    SweepResult,
    SyntheticCrossingSpec,
    VerificationReport,
)

__all__ = [
    "BohrDecomposition",
    "ErrorSample",
    "EvolutionRecord",
    "SpectralData",
    "WitnessRecord",
    "BathSpec",
    "BoundReport",
    "CrossingReport",
    "ExperimentConfig",
    "FamilySpec",
    "GapReport",
    "PowerLawFit",
    "PropagatorConfig",
    "SweepResult",
    "SyntheticCrossingSpec",
    "VerificationReport",
]
