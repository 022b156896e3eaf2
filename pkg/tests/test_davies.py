"""Tests for bath rates, the Lamb shift, Davies generators and Gibbs certificates."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, linalg

from adiakit.exceptions import DegenerateHamiltonianError, SingularGibbsError
from adiakit.models.families import Example2Family
from adiakit.models.schemas import BathKind, BathSpec, CouplingAxis
from adiakit.services.davies import (
    FlatBath,
    OhmicBath,
    bohr_decompose,
    build_bath,
    davies_generator,
    davies_generator_batch,
    davies_parts,
    detailed_balance_certificate,
    example2_spectrum_closed_form,
    gibbs_state,
    kms_violation,
    lamb_shift_coefficient,
)
from adiakit.services.superop import SIGMA_X, SIGMA_Y, SIGMA_Z, pauli_vector


def _match(closed, numeric):
    """Max relative distance after pairing each closed-form eigenvalue with its nearest numeric one."""
    radius = float(np.max(np.abs(numeric)))
    worst = 0.0
    remaining = list(numeric)
    for lam in closed:
        j = int(np.argmin([abs(lam - mu) for mu in remaining]))
        scale = abs(lam) if abs(lam) > 0 else radius
        worst = max(worst, abs(lam - remaining.pop(j)) / scale)
    return worst


def test_ohmic_rates():
    bath = OhmicBath(beta=1.0)
    expected = 2 * math.pi * math.exp(-1 / (8 * math.pi)) / (1 - math.exp(-1))
    assert float(bath.gamma(1.0)) == pytest.approx(expected, rel=1e-14)
    assert float(bath.gamma(0.0)) == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("bath", [OhmicBath(beta=1.0), OhmicBath(beta=3.0, eta=0.2), FlatBath(beta=0.7)])
def test_builtin_baths_satisfy_kms(bath):
    assert kms_violation(bath, np.linspace(0.01, 10.0, 200)) <= 1e-10


def test_tabulated_bath_kms_extension():
    points = [(-4.0, 1.0), (-1.0, 1.5), (0.0, 1.0), (1.0, 1.5), (4.0, 1.0)]
    symmetric = build_bath(BathSpec(kind=BathKind.TABULATED, points=points, enforce_kms=False))
    extended = build_bath(BathSpec(kind=BathKind.TABULATED, points=points, enforce_kms=True))
    omegas = np.linspace(0.1, 3.5, 30)
    assert kms_violation(symmetric, omegas) > 0.5
    assert kms_violation(extended, omegas) <= 1e-12


def test_lamb_shift_against_cauchy_weight_quadrature():
    bath = OhmicBath(beta=1.0)
    omega = 1.0
    value, _ = lamb_shift_coefficient(bath, omega)
    near, _ = integrate.quad(lambda w: float(bath.gamma(w)), -60.0, 60.0, weight="cauchy", wvar=omega, limit=500)
    far, _ = integrate.quad(lambda w: float(bath.gamma(w)) / (omega - w), 60.0, 4000.0, limit=500)
    assert value == pytest.approx(-near + far, rel=1e-6)


def test_principal_value_radius_sets_the_inner_interval(monkeypatch):
    limits = []
    quad = integrate.quad

    def recording_quad(fn, a, b, **kwargs):
        limits.append((a, b))
        return quad(fn, a, b, **kwargs)

    monkeypatch.setattr("adiakit.services.davies.integrate.quad", recording_quad)
    default = build_bath(BathSpec())
    narrow = build_bath(BathSpec(pv_radius=40.0))
    assert narrow.pv_radius == 40.0

    value_default, _ = lamb_shift_coefficient(default, 1.0)
    assert limits[0] == (0.0, pytest.approx(1.0 + 10.0 * 8 * math.pi))
    limits.clear()
    value_narrow, _ = lamb_shift_coefficient(narrow, 1.0)
    assert limits == [(0.0, 40.0), (40.0, np.inf)]
    assert value_narrow == pytest.approx(value_default, rel=1e-8)


def test_bohr_components_are_covariant():
    H = SIGMA_Z
    bohr = bohr_decompose(H, SIGMA_X)
    assert_allclose(sorted(bohr.frequencies), [-2.0, 2.0])
    assert_allclose(sum(bohr.components), SIGMA_X)
    t = 0.37
    U = linalg.expm(1j * t * H)
    for omega, A_w in zip(bohr.frequencies, bohr.components):
        assert_allclose(U @ A_w @ U.conj().T, np.exp(-1j * omega * t) * A_w, atol=1e-12)
    # the positive frequency lowers the energy
    lowering = bohr.component(2.0)
    assert_allclose(lowering, np.array([[0, 0], [1, 0]]))


def test_davies_generator_is_secular():
    bath = OhmicBath(beta=1.0)
    K, K_LS, D = davies_parts(pauli_vector([0.3, 0.0, -0.6]), 0.1 * SIGMA_Y, bath, lamb_shift=lambda w: 0.05 * np.asarray(w))
    assert np.linalg.norm(K @ D - D @ K) < 1e-12
    assert np.linalg.norm(K_LS @ D - D @ K_LS) < 1e-12


def test_gibbs_state_is_stationary_and_generator_normal(example2_bare):
    for s in (0.1, 0.5, 0.9):
        L = example2_bare.liouvillian(s)
        report = detailed_balance_certificate(L, gibbs_state(example2_bare.hamiltonian(s), 1.0))
        assert report.stationarity < 1e-12
        assert report.normality_defect < 1e-10


def test_batch_matches_single_generators():
    bath = OhmicBath(beta=1.0)
    fields = np.array([[0.4, 0.0, -0.1], [-0.2, 0.3, 0.5], [0.0, 0.0, 1.0]])
    def shift(w):
        return 0.02 * np.asarray(w) ** 2

    batch = davies_generator_batch(pauli_vector(fields), 0.1 * SIGMA_Y, bath, lamb_shift=shift)
    for m, L in zip(fields, batch):
        assert_allclose(L, davies_generator(pauli_vector(m), 0.1 * SIGMA_Y, bath, lamb_shift=shift), atol=1e-12)


@pytest.mark.parametrize("axis", [CouplingAxis.Y, CouplingAxis.Z])
def test_closed_form_spectrum_without_lamb_shift(axis):
    family = Example2Family(coupling_axis=axis, bath=BathSpec(lamb_shift_enabled=False))
    for s in np.linspace(0.05, 0.95, 19):
        closed = example2_spectrum_closed_form(
            family.hamiltonian(s), family.coupling, family.bath, lamb_shift_enabled=False
        )
        assert _match(closed, np.linalg.eigvals(family.liouvillian(s))) <= 1e-8


@pytest.mark.slow
@pytest.mark.parametrize("fixture", ["example2_y", "example2_z"])
def test_closed_form_spectrum_with_lamb_shift(fixture, request):
    family = request.getfixturevalue(fixture)
    for s in np.linspace(0.05, 0.95, 19):
        closed = example2_spectrum_closed_form(
            family.hamiltonian(s), family.coupling, family.bath, lamb_shift=family.lamb_shift
        )
        assert _match(closed, np.linalg.eigvals(family.liouvillian(s))) <= 1e-8


def test_closed_form_rejects_degenerate_hamiltonian():
    with pytest.raises(DegenerateHamiltonianError):
        example2_spectrum_closed_form(np.zeros((2, 2)), SIGMA_Y, OhmicBath(1.0), lamb_shift_enabled=False)


def test_gibbs_states():
    assert_allclose(gibbs_state(SIGMA_Z, 0.0), np.eye(2) / 2)
    weights = np.array([math.exp(-1), math.exp(1)]) / (math.exp(-1) + math.exp(1))
    assert_allclose(np.diag(gibbs_state(SIGMA_Z, 1.0)).real, weights)


def test_certificate_needs_full_rank_gibbs_state(example2_bare):
    with pytest.raises(SingularGibbsError):
        detailed_balance_certificate(example2_bare.liouvillian(0.5), np.diag([1.0, 0.0]))
