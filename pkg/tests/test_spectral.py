"""Tests for zero projectors, reduced resolvents, derivatives and the induced norm."""

import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import linalg

from adiakit.exceptions import BoundaryStencilWarning, EmptyKernelError, OrderTooHighError
from adiakit.services.spectral import (
    decompose,
    finite_difference,
    gap_report,
    induced_trace_norm,
    kernel_state,
    local_structure,
    projector_derivative,
    reduced_resolvent,
    reduced_resolvent_from_spectrum,
    resolvent_derivative,
    resolvent_derivative_fd,
    semisimplicity_defect,
    split_zero_cluster,
    track_eigenvalues,
    x_sequence,
    zero_projector,
)
from adiakit.services.superop import trace_row


def _residuals(L, P, S):
    Q = np.eye(L.shape[0]) - P
    return max(
        np.linalg.norm(P @ P - P),
        np.linalg.norm(L @ P),
        np.linalg.norm(S @ L - Q),
        np.linalg.norm(L @ S - Q),
        np.linalg.norm(S @ P),
        np.linalg.norm(P @ S),
    )


def test_zero_projector_of_example1(example1):
    for s in (0.0, 0.3, 0.9, 1.0):
        L = example1.liouvillian(s)
        P = zero_projector(L)
        S = reduced_resolvent(L, P)
        assert _residuals(L, P, S) < 1e-9
        assert np.trace(P).real == pytest.approx(1.0)
        assert np.linalg.norm(trace_row(2) @ P - trace_row(2)) < 1e-10


def test_resolvent_from_spectrum_agrees(example1):
    L = example1.liouvillian(0.4)
    data = decompose(L)
    assert data.zero_multiplicity == 1
    assert_allclose(reduced_resolvent_from_spectrum(data), reduced_resolvent(L, data.zero_projector), atol=1e-9)


@pytest.mark.parametrize("fixture", ["example1", "closed_system"])
def test_spectral_blocks_are_biorthonormal(fixture, request):
    data = decompose(request.getfixturevalue(fixture).liouvillian(0.4))
    for i, (R_i, L_i) in enumerate(zip(data.right_vectors, data.left_vectors)):
        assert_allclose(R_i @ L_i.conj().T, data.projectors[i], atol=1e-9)
        for j, R_j in enumerate(data.right_vectors):
            expected = np.eye(R_i.shape[1]) if i == j else np.zeros((L_i.shape[1], R_j.shape[1]))
            assert_allclose(L_i.conj().T @ R_j, expected, atol=1e-9)


def test_invertible_matrix_has_no_kernel():
    with pytest.raises(EmptyKernelError):
        zero_projector(-np.eye(4))


def test_jordan_block_has_defect():
    M = np.array([[0.0, 1.0], [0.0, 0.0]])
    P = zero_projector(M)
    assert_allclose(P, np.eye(2))
    assert semisimplicity_defect(M, P) == pytest.approx(1.0)


def test_lindbladian_zero_is_semisimple(example1, unitary, example2_bare):
    for family in (example1, unitary, example2_bare):
        for s in np.linspace(0.0, 1.0, 11):
            L = family.liouvillian(float(s))
            assert semisimplicity_defect(L, zero_projector(L)) <= 1e-9 * max(1.0, np.linalg.norm(L, 2))


def test_closed_system_kernel_is_two_dimensional(closed_system):
    report = gap_report(closed_system, 0.5)
    assert report.zero_multiplicity == 2
    assert report.gap == pytest.approx(2 * np.linalg.norm(closed_system.field(0.5)))


def test_crossing_at_end_point_doubles_the_kernel(synthetic):
    assert gap_report(synthetic, 0.5).zero_multiplicity == 1
    assert gap_report(synthetic, 1.0).zero_multiplicity == 2


def test_split_zero_cluster():
    k, gap, scale = split_zero_cluster(np.array([0.0, 1e-14, -1.0, -2.0 + 1.0j]))
    assert k == 2
    assert gap == pytest.approx(1.0)
    assert scale == pytest.approx(np.sqrt(5.0))


def test_track_eigenvalues_follows_crossing_lines():
    spectra = np.array([[-1.0, -3.0], [-2.9, -1.1], [-1.2, -2.8]])
    tracks = track_eigenvalues(spectra)
    assert_allclose(tracks[:, 0], [-1.0, -1.1, -1.2])
    assert_allclose(tracks[:, 1], [-3.0, -2.9, -2.8])


def test_kernel_state_is_the_steady_state(example1):
    L = example1.liouvillian(0.2)
    rho = kernel_state(zero_projector(L), 2)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.linalg.norm(L @ rho.reshape(-1, order="F")) < 1e-12


def test_finite_difference_uses_one_sided_stencil_at_ends():
    def fn(s):
        return np.array([s**2])

    assert finite_difference(fn, 0.5, 1e-3)[0] == pytest.approx(1.0)
    with pytest.warns(BoundaryStencilWarning):
        value = finite_difference(fn, 1.0, 1e-3)
    assert value[0] == pytest.approx(2.0)


def test_projector_derivative_matches_finite_difference(example1):
    s, h = 0.35, 1e-5
    numeric = finite_difference(lambda t: local_structure(example1, t).P, s, h)
    assert_allclose(projector_derivative(example1, s), numeric, atol=1e-6)


def test_resolvent_derivative_identity(example1, unitary):
    for family in (example1, unitary):
        analytic = resolvent_derivative(family, 0.6)
        numeric = resolvent_derivative_fd(family, 0.6)
        assert np.linalg.norm(analytic - numeric) <= 1e-6 * max(1.0, np.linalg.norm(analytic))


def test_x_sequence_orders(example1):
    X = x_sequence(example1, 0.5, 2)
    assert_allclose(X[0], local_structure(example1, 0.5).S)
    assert X[1].shape == (4, 4)
    with pytest.raises(OrderTooHighError):
        x_sequence(example1, 0.5, 4)


def test_induced_norm_of_channels(example1):
    estimate = induced_trace_norm(linalg.expm(0.7 * example1.liouvillian(0.3)))
    assert estimate.value == pytest.approx(1.0, abs=1e-6)
    assert estimate.certified
    assert induced_trace_norm(2.0 * np.eye(4)).value == pytest.approx(2.0, abs=1e-8)


def test_induced_norm_is_seed_deterministic(example1):
    M = local_structure(example1, 0.5).S
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        first = induced_trace_norm(M, seed=7, certify=False).value
        second = induced_trace_norm(M, seed=7, certify=False).value
    assert first == second
