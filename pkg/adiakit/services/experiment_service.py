"""Experiment service running spectrum scans, T-sweeps and bound comparisons."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Optional, Sequence

import numpy as np

from adiakit.config import get_settings, settings_override
from adiakit.exceptions import InsufficientDataError, NonConvergenceError
from adiakit.models.families import LiouvillianFamily, build_family
from adiakit.models.schemas import (
    BoundReport,
    BoundRow,
    ExperimentConfig,
    FamilySpec,
    LadderSpec,
    PropagatorConfig,
    SpectrumRow,
    SweepResult,
    SweepRow,
)
from adiakit.services.bounds import constant_C, fit_power_law
from adiakit.services.propagate import error_points, ideal_states, initial_state, measure_error
from adiakit.services.spectral import semisimplicity_defect, split_zero_cluster, track_eigenvalues, zero_projector
from adiakit.utils.reporting import provenance

logger = logging.getLogger(__name__)

# Per-process cache so sweep workers build each family (and its Lamb-shift table) once
_family_cache: dict[str, LiouvillianFamily] = {}


def family_from_spec(spec: FamilySpec) -> LiouvillianFamily:
    key = spec.model_dump_json()
    if key not in _family_cache:
        _family_cache[key] = build_family(spec)
    return _family_cache[key]


def _sweep_task(
    family_json: str,
    T: float,
    propagator_json: str,
    overrides: dict,
    points: list[float],
    ideals: np.ndarray,
    rho0: np.ndarray,
) -> SweepRow:
    """One propagation of a sweep; runs inside a worker process."""
    with settings_override(**overrides):
        family = family_from_spec(FamilySpec.model_validate_json(family_json))
        config = PropagatorConfig.model_validate_json(propagator_json)
        try:
            sample = measure_error(family, T, config, points=points, ideals=ideals, rho0=rho0)
        except NonConvergenceError as exc:
            logger.warning("T=%.4g flagged: %s", T, exc)
            return SweepRow(
                T=T,
                error=math.nan,
                substeps=0,
                richardson_discrepancy=exc.discrepancy,
                flagged=True,
                message=str(exc),
            )
    return SweepRow(
        T=T,
        error=sample.error,
        substeps=sample.substeps,
        richardson_discrepancy=sample.richardson_discrepancy,
        grid_errors=sample.grid_errors,
    )


class ExperimentService:
    """Config-driven experiments over a Liouvillian family."""

    def __init__(self):
        self.settings = get_settings()

    @staticmethod
    def overrides(config: ExperimentConfig) -> dict:
        return {**config.tolerances.active(), "seed": config.seed}

    def run_spectrum(self, config: ExperimentConfig) -> list[SpectrumRow]:
        """Eigenvalue moduli on a grid, ordered along continuous tracks."""
        with settings_override(**self.overrides(config)):
            family = family_from_spec(config.family)
            spec = config.spectrum
            grid = np.linspace(spec.s_min, spec.s_max, spec.points)
            generators = family.liouvillian_batch(grid)
            tracks = track_eigenvalues(np.linalg.eigvals(generators))
            rows = []
            for s, L, eigenvalues in zip(grid, generators, tracks):
                k, gap, _ = split_zero_cluster(eigenvalues)
                rows.append(
                    SpectrumRow(
                        s=float(s),
                        moduli=[float(x) for x in np.abs(eigenvalues)],
                        gap=gap if math.isfinite(gap) else 0.0,
                        zero_multiplicity=k,
                        semisimple_defect=semisimplicity_defect(L, zero_projector(L)),
                    )
                )
        logger.info("spectrum of %s on %d points", family.name, len(rows))
        return rows

    def sweep_rows(
        self,
        config: ExperimentConfig,
        ladder: LadderSpec,
        points: Sequence[float],
        workers: Optional[int] = None,
    ) -> list[SweepRow]:
        """Adiabatic errors for every T of the ladder, sorted by T."""
        overrides = self.overrides(config)
        with settings_override(**overrides):
            family = family_from_spec(config.family)
            rho0 = initial_state(family)
            ideals = ideal_states(family, points, rho0=rho0)
        args = (config.family.model_dump_json(), config.propagator.model_dump_json(), overrides)
        T_values = ladder.values()
        workers = self.settings.workers if workers is None else workers

        rows: list[SweepRow] = []
        if workers <= 1:
            for T in T_values:
                rows.append(_sweep_task(args[0], T, args[1], args[2], list(points), ideals, rho0))
                logger.info("T=%.4g: error %.6e", T, rows[-1].error)
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                futures = {
                    executor.submit(_sweep_task, args[0], T, args[1], args[2], list(points), ideals, rho0): T
                    for T in T_values
                }
                for future in as_completed(futures):
                    rows.append(future.result())
                    logger.info("T=%.4g: error %.6e", futures[future], rows[-1].error)
        return sorted(rows, key=lambda row: row.T)

    def run_sweep(self, config: ExperimentConfig, workers: Optional[int] = None) -> SweepResult:
        """Errors over the T ladder plus a power-law fit."""
        points = error_points(config.error_grid)
        rows = self.sweep_rows(config, config.sweep, points, workers)
        with settings_override(**self.overrides(config)):
            try:
                fit = fit_power_law(rows, config.fit_window)
                logger.info("fit: %.4g / T^%.4f (%d points)", fit.prefactor, fit.exponent, fit.points)
            except InsufficientDataError as exc:
                logger.warning("no power-law fit: %s", exc)
                fit = None
            prov = provenance(config)
        return SweepResult(rows=rows, fit=fit, provenance=prov)

    def run_bound(
        self,
        config: ExperimentConfig,
        ladder: Optional[LadderSpec] = None,
        workers: Optional[int] = None,
    ) -> tuple[BoundReport, list[BoundRow]]:
        """C at bound.s and the row-wise comparison error <= safety * C / T."""
        s = config.bound.s
        with settings_override(**self.overrides(config)):
            family = family_from_spec(config.family)
            report = constant_C(family, s, config.bound.grid_points, seed=config.seed)
            safety = get_settings().bound_safety
        points = error_points([s])
        rows = self.sweep_rows(config, ladder or config.sweep, points, workers)
        comparison = []
        for row in rows:
            error = row.error if s == 1.0 else (row.grid_errors or [math.nan])[0]
            bound = report.C / row.T
            comparison.append(BoundRow(T=row.T, error=error, bound=bound, holds=bool(error <= safety * bound + 1e-12)))
        return report, comparison


# Singleton
_experiment_service: Optional[ExperimentService] = None


def get_experiment_service() -> ExperimentService:
    """Get the experiment service singleton."""
    global _experiment_service
    if _experiment_service is None:
        _experiment_service = ExperimentService()
    return _experiment_service
