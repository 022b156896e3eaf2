"""Shared fixtures for the adiakit test suite."""

import numpy as np
import pytest

from adiakit.models.families import (
    ClosedSystemFamily,
    ConstantFamily,
    Example1Family,
    Example2Family,
    SyntheticCrossingFamily,
    UnitaryFamily,
)
from adiakit.models.schemas import BathSpec, CouplingAxis, SyntheticCrossingSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def example1():
    return Example1Family()


@pytest.fixture
def constant():
    return ConstantFamily(field=(0.3, 0.0, 0.5), gamma=0.5)


@pytest.fixture
def unitary():
    return UnitaryFamily.from_fields()


@pytest.fixture
def closed_system():
    return ClosedSystemFamily()


@pytest.fixture
def synthetic():
    return SyntheticCrossingFamily(SyntheticCrossingSpec(alpha=1.0, s_star=1.0))


@pytest.fixture(scope="session")
def example2_bare():
    """Example-2 family without the Lamb shift (no quadratures)."""
    return Example2Family(coupling_axis=CouplingAxis.Y, bath=BathSpec(lamb_shift_enabled=False))


@pytest.fixture(scope="session")
def example2_y():
    return Example2Family(coupling_axis=CouplingAxis.Y)


@pytest.fixture(scope="session")
def example2_z():
    return Example2Family(coupling_axis=CouplingAxis.Z)


def random_density_matrix(rng, d: int = 2) -> np.ndarray:
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = G @ G.conj().T
    return rho / np.trace(rho)


def random_operator(rng, d: int = 2) -> np.ndarray:
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
