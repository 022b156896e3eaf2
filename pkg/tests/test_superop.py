"""Tests for vectorization, Lindblad superoperators and channel diagnostics."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import linalg

from adiakit.exceptions import DimensionMismatchError, NonHermitianInputError
from adiakit.services.superop import (
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Z,
    apply_superop,
    as_density_matrix,
    choi_matrix,
    conjugation_superop,
    devectorize,
    dissipator_derivative,
    dissipator_superop,
    hamiltonian_superop,
    hermiticity_preservation_defect,
    is_cptp,
    lindbladian,
    pauli_vector,
    spost,
    spre,
    sprepost,
    trace_norm,
    trace_row,
    vectorize,
)
from tests.conftest import random_density_matrix, random_operator


def test_vectorize_is_column_stacking():
    X = np.array([[1, 2], [3, 4]])
    assert_allclose(vectorize(X), [1, 3, 2, 4])
    assert_allclose(devectorize(vectorize(X)), X)


def test_devectorize_rejects_non_square_length():
    with pytest.raises(DimensionMismatchError):
        devectorize(np.ones(5))


def test_pre_and_post_multiplication(rng):
    A, B, X = (random_operator(rng, 3) for _ in range(3))
    assert_allclose(spre(A) @ vectorize(X), vectorize(A @ X), atol=1e-12)
    assert_allclose(spost(B) @ vectorize(X), vectorize(X @ B), atol=1e-12)
    assert_allclose(sprepost(A, B) @ vectorize(X), vectorize(A @ X @ B), atol=1e-12)


def test_conjugation_superop(rng):
    U = linalg.expm(-1j * pauli_vector([0.2, -0.4, 0.9]))
    rho = random_density_matrix(rng)
    assert_allclose(apply_superop(conjugation_superop(U), rho), U @ rho @ U.conj().T, atol=1e-12)


def test_hamiltonian_superop_is_commutator(rng):
    H = pauli_vector([0.3, 0.1, -0.7])
    rho = random_density_matrix(rng)
    assert_allclose(apply_superop(hamiltonian_superop(H), rho), -1j * (H @ rho - rho @ H), atol=1e-12)


def test_hamiltonian_superop_rejects_non_hermitian():
    with pytest.raises(NonHermitianInputError):
        hamiltonian_superop(np.array([[0, 1], [0, 0]], dtype=complex))


def test_amplitude_damping_dissipator():
    D = dissipator_superop([SIGMA_MINUS])
    excited = np.array([[0, 0], [0, 1]], dtype=complex)
    # sigma^- = |1><0| moves population from |0> into |1>
    assert_allclose(apply_superop(D, np.diag([1.0, 0.0]).astype(complex)), np.diag([-1.0, 1.0]), atol=1e-14)
    assert_allclose(apply_superop(D, excited), np.zeros((2, 2)), atol=1e-14)


def test_empty_dissipator_needs_dimension():
    with pytest.raises(DimensionMismatchError):
        dissipator_superop([])
    assert_allclose(dissipator_superop([], dim=2), np.zeros((4, 4)))


def test_mismatched_operators_rejected():
    with pytest.raises(DimensionMismatchError):
        dissipator_superop([SIGMA_MINUS, np.eye(3)])


def test_lindbladian_annihilates_trace(rng):
    L = lindbladian(pauli_vector(rng.normal(size=3)), [math.sqrt(0.8) * SIGMA_MINUS, 0.3 * SIGMA_Z])
    assert np.linalg.norm(trace_row(2) @ L) < 1e-13
    assert hermiticity_preservation_defect(L) < 1e-12


def test_semigroup_is_cptp(rng):
    L = lindbladian(pauli_vector(rng.normal(size=3)), [SIGMA_MINUS, 0.5 * SIGMA_X])
    for t in (0.01, 1.0, 25.0):
        diagnostic = is_cptp(linalg.expm(t * L))
        assert diagnostic.passed, diagnostic


def test_transpose_is_positive_but_not_cp():
    d = 2
    transpose = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            E = np.zeros((d, d))
            E[i, j] = 1.0
            transpose[:, i + d * j] = vectorize(E.T)
    diagnostic = is_cptp(transpose)
    assert diagnostic.tp_violation < 1e-14
    assert diagnostic.cp_violation == pytest.approx(1.0)
    assert not diagnostic.passed


def test_choi_of_identity_is_unnormalized_bell_projector():
    choi = choi_matrix(np.eye(4))
    bell = vectorize(np.eye(2))
    assert_allclose(choi, np.outer(bell, bell), atol=1e-14)


def test_dissipator_derivative_matches_finite_difference():
    def ops(s):
        return [(1.0 + s) * SIGMA_MINUS, s**2 * SIGMA_Z]

    def dops(s):
        return [SIGMA_MINUS, 2 * s * SIGMA_Z]

    s, h = 0.4, 1e-6
    numeric = (dissipator_superop(ops(s + h)) - dissipator_superop(ops(s - h))) / (2 * h)
    assert_allclose(dissipator_derivative(ops(s), dops(s), 2), numeric, atol=1e-8)


def test_trace_norm_and_density_validation():
    assert trace_norm(np.diag([1.0, -2.0])) == pytest.approx(3.0)
    assert_allclose(as_density_matrix(np.eye(2) / 2), np.eye(2) / 2)
    with pytest.raises(ValueError):
        as_density_matrix(np.eye(2))
    with pytest.raises(ValueError):
        as_density_matrix(np.diag([1.5, -0.5]))
