"""Tests for the adiabatic constant, expansion terms, thermal estimates, crossings and fits."""

import math

import numpy as np
import pytest

from adiakit.exceptions import InsufficientDataError, OrderTooHighError, UnsupportedFamilyError
from adiakit.models.families import Example2Family, SyntheticCrossingFamily
from adiakit.models.schemas import (
    BathSpec,
    CouplingAxis,
    PropagationMethod,
    PropagatorConfig,
    SweepRow,
    SyntheticCrossingSpec,
)
from adiakit.services.bounds import (
    adiabatic_time_estimate,
    constant_C,
    crossing_scan,
    default_fit_window,
    expansion_residual,
    expansion_terms,
    fit_power_law,
    gibbs_pprime_profile,
    kms_pprime_bound,
)
from adiakit.services.davies import gibbs_state
from adiakit.services.propagate import adiabatic_error
from adiakit.services.superop import SIGMA_X, SIGMA_Z


def _rows(T_values, prefactor=7.88, exponent=1.0):
    return [SweepRow(T=T, error=prefactor / T**exponent, substeps=1) for T in T_values]


def test_constant_family_has_zero_constant(constant):
    report = constant_C(constant, grid_points=5)
    assert report.C == pytest.approx(0.0, abs=1e-12)
    assert len(report.contributions) == 3


@pytest.mark.slow
def test_bound_dominates_measured_error(example1):
    report = constant_C(example1)
    assert report.C > 0
    config = PropagatorConfig(method=PropagationMethod.MAGNUS4)
    for T in (1e2, 1e3, 1e4):
        assert adiabatic_error(example1, T, config) <= 2.0 * report.C / T


def test_expansion_term_vanishes_for_constant_family(constant):
    (omega,) = expansion_terms(constant, 1.0, 50.0)
    assert np.linalg.norm(omega) < 1e-10


def test_expansion_order_limit(example1):
    with pytest.raises(OrderTooHighError):
        expansion_terms(example1, 1.0, 100.0, m=4)


@pytest.mark.slow
def test_expansion_residual_is_second_order(example1):
    config = PropagatorConfig(method=PropagationMethod.MAGNUS4, tolerance=1e-12)
    T_values = np.array([1e3, 1e4, 1e5])
    residuals = [expansion_residual(example1, 1.0, T, config=config) for T in T_values]
    slope = np.polyfit(np.log(T_values), np.log(residuals), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.1)


def test_kms_pprime_bound():
    rho = gibbs_state(SIGMA_Z, 1.0)
    assert kms_pprime_bound(SIGMA_X, rho, 1.0) == pytest.approx(2.0)
    assert kms_pprime_bound(SIGMA_X, np.eye(2) / 2, 0.0) == 0.0


def test_thermal_profile_dominates(example2_bare):
    samples = gibbs_pprime_profile(example2_bare)
    assert len(samples) == 20
    assert all(sample.holds for sample in samples)


def test_thermal_estimates_need_a_temperature(example1):
    with pytest.raises(UnsupportedFamilyError):
        gibbs_pprime_profile(example1)


def test_adiabatic_time_estimate(example2_bare):
    estimate = adiabatic_time_estimate(example2_bare, s_grid=np.linspace(0.0, 1.0, 11), epsilon=1e-2)
    assert estimate.T > 0
    tighter = adiabatic_time_estimate(example2_bare, s_grid=np.linspace(0.0, 1.0, 11), epsilon=1e-3)
    assert tighter.T == pytest.approx(10 * estimate.T)


@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_crossing_scan_recovers_the_exponent(alpha):
    family = SyntheticCrossingFamily(SyntheticCrossingSpec(alpha=alpha, s_star=0.5))
    report = crossing_scan(family)
    assert len(report.crossings) == 1
    crossing = report.crossings[0]
    assert crossing.s_star == pytest.approx(0.5, abs=1e-6)
    assert crossing.alpha == pytest.approx(alpha, abs=0.05)
    assert crossing.eta == pytest.approx(1.0 / (1.0 + alpha), abs=0.02)


def test_gapped_family_has_no_crossing(example1):
    report = crossing_scan(example1)
    assert report.crossings == []
    assert report.generic_multiplicity == 1


def test_sigma_z_coupling_crosses_at_the_end_point():
    family = Example2Family(coupling_axis=CouplingAxis.Z, bath=BathSpec(lamb_shift_enabled=False))
    report = crossing_scan(family)
    assert report.generic_multiplicity == 1
    assert len(report.crossings) == 1
    crossing = report.crossings[0]
    assert crossing.s_star == 1.0
    assert crossing.alpha == pytest.approx(2.0, abs=0.05)
    assert crossing.eta == pytest.approx(1.0 / 3.0, abs=0.02)


def test_sigma_y_coupling_stays_gapped(example2_bare):
    assert crossing_scan(example2_bare).crossings == []


def test_power_law_fit():
    T_values = np.logspace(2, 6, 13)
    fit = fit_power_law(_rows(T_values))
    assert fit.exponent == pytest.approx(1.0)
    assert fit.prefactor == pytest.approx(7.88)
    assert fit.points == 5
    assert fit.residual < 1e-10


def test_fit_window_and_flagged_rows():
    T_values = np.logspace(2, 6, 13)
    rows = _rows(T_values, prefactor=1.91, exponent=0.324)
    rows[-1] = SweepRow(T=rows[-1].T, error=math.nan, substeps=0, flagged=True)
    fit = fit_power_law(rows, window=(1e3, 1e6))
    assert fit.exponent == pytest.approx(0.324)
    assert fit.points == 9
    low, high = default_fit_window(T_values)
    assert math.log10(low) == pytest.approx(4.4)
    assert high == pytest.approx(1e6)


def test_fit_needs_enough_points():
    with pytest.raises(InsufficientDataError):
        fit_power_law(_rows([1e2, 1e3, 1e4]))
    with pytest.raises(InsufficientDataError):
        fit_power_law(_rows(np.logspace(2, 6, 13)), window=(2e5, 1e6))
