"""Tests for the experiment and verification services."""

import math

import numpy as np
import pytest
from scipy import linalg

from adiakit.exceptions import ConfigError
from adiakit.models.families import ConstantFamily
from adiakit.models.schemas import ExperimentConfig
from adiakit.services.experiment_service import ExperimentService, get_experiment_service
from adiakit.services.verification_service import VerificationService, get_verification_service


def _config(family: dict, **extra) -> ExperimentConfig:
    return ExperimentConfig.model_validate({"family": family, **extra})


CONSTANT = {"name": "constant", "parameters": {"field": [0.3, 0.0, 0.5], "gamma": 0.5}}
EXAMPLE1 = {"name": "example1"}


def test_singletons():
    assert get_experiment_service() is get_experiment_service()
    assert get_verification_service() is get_verification_service()


def test_spectrum_of_constant_family_is_flat():
    rows = ExperimentService().run_spectrum(_config(CONSTANT, spectrum={"points": 6}))
    assert len(rows) == 6
    for row in rows[1:]:
        np.testing.assert_allclose(row.moduli, rows[0].moduli, atol=1e-12)
        assert row.gap == pytest.approx(rows[0].gap)
        assert row.zero_multiplicity == 1


def test_sweep_rows_are_sorted_and_fitted():
    config = _config(
        EXAMPLE1,
        sweep={"T_min": 100.0, "T_max": 1000.0, "count": 4},
        propagator={"method": "magnus4"},
        fit_window=[100.0, 1000.0],
        error_grid=[0.5],
    )
    result = ExperimentService().run_sweep(config, workers=1)
    assert [row.T for row in result.rows] == sorted(row.T for row in result.rows)
    assert all(len(row.grid_errors) == 1 for row in result.rows)
    assert result.rows[-1].error < result.rows[0].error
    assert result.fit is not None and result.fit.points == 4
    assert len(result.provenance.config_hash) == 64


def test_parallel_sweep_matches_sequential():
    config = _config(EXAMPLE1, sweep={"T_min": 50.0, "T_max": 200.0, "count": 3})
    service = ExperimentService()
    sequential = service.run_sweep(config, workers=1)
    parallel = service.run_sweep(config, workers=2)
    assert [r.error for r in parallel.rows] == pytest.approx([r.error for r in sequential.rows], rel=1e-12)


def test_unconverged_rows_are_flagged():
    config = _config(
        EXAMPLE1,
        sweep={"T_min": 100.0, "T_max": 1000.0, "count": 4},
        propagator={"steps": 8, "tolerance": 1e-15, "max_substeps": 200},
    )
    result = ExperimentService().run_sweep(config, workers=1)
    assert all(row.flagged and math.isnan(row.error) for row in result.rows)
    assert result.fit is None


def test_bound_on_constant_family():
    config = _config(CONSTANT, sweep={"T_min": 10.0, "T_max": 1000.0, "count": 3}, bound={"grid_points": 5})
    report, rows = ExperimentService().run_bound(config, workers=1)
    assert report.C == pytest.approx(0.0, abs=1e-12)
    assert all(row.holds and row.error <= 1e-9 for row in rows)


def test_verification_subset_passes_on_example1():
    checks = ["trace_annihilation", "semigroup_cptp", "semisimplicity", "resolvent_identities", "iss_closed_form", "v_witness"]
    report = VerificationService().run(_config(EXAMPLE1, verify={"checks": checks}))
    assert [c.name for c in report.checks] == checks
    failed = [c for c in report.checks if not c.passed]
    assert failed == []


def test_semigroup_check_samples_fixed_steps(monkeypatch):
    seen = []
    expm = linalg.expm

    def recording_expm(M):
        seen.append(M)
        return expm(M)

    monkeypatch.setattr("adiakit.services.verification_service.linalg.expm", recording_expm)
    family = ConstantFamily(field=(0.3, 0.0, 0.5), gamma=0.5)
    outcome = VerificationService().check_semigroup_cptp(family, _config(CONSTANT))
    L = family.liouvillian(0.0)
    for h in (1e-3, 1e-2, 1e-1):
        assert any(np.allclose(M, h * L, rtol=1e-12, atol=1e-15) for M in seen)
    assert outcome.passed
    assert "0.001" in outcome.detail


def test_family_specific_checks_without_builtins():
    config = _config(EXAMPLE1, verify={"checks": ["kms_symmetry", "unitary_identities"], "include_builtin": False})
    report = VerificationService().run(config)
    assert all(c.passed and "not applicable" in c.detail for c in report.checks)


def test_v_witness_on_constant_family_passes_with_detail():
    report = VerificationService().run(_config(CONSTANT, verify={"checks": ["v_witness"]}))
    assert report.checks[0].passed
    assert "does not move" in report.checks[0].detail


def test_kms_violation_is_reported():
    family = {
        "name": "example2",
        "parameters": {
            "bath": {
                "kind": "tabulated",
                "points": [[-8.0, 0.5], [-1.0, 1.5], [0.0, 1.0], [1.0, 1.5], [8.0, 0.5]],
                "enforce_kms": False,
                "lamb_shift_enabled": False,
            }
        },
    }
    report = VerificationService().run(_config(family, verify={"checks": ["kms_symmetry"]}))
    outcome = report.checks[0]
    assert not outcome.passed
    assert outcome.measured > 0.5


def test_unknown_check_is_a_config_error():
    with pytest.raises(ConfigError):
        VerificationService().run(_config(EXAMPLE1, verify={"checks": ["nonsense"]}))


@pytest.mark.slow
def test_default_verification_is_green():
    report = VerificationService().run(_config(EXAMPLE1, propagator={"method": "magnus4"}))
    failed = [(c.name, c.measured, c.detail) for c in report.checks if not c.passed]
    assert failed == []
