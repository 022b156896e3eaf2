"""Built-in differentiable Liouvillian families.

A family maps s in [0, 1] to a Lindblad generator L(s). Hilbert-space
families supply H(s) and the jump operators L_l(s); the unitary and
synthetic families supply superoperators directly. Consumers only rely on
``liouvillian`` / ``liouvillian_batch`` / ``liouvillian_derivative``.
Schedules are ``numpy.polynomial.Polynomial`` objects, so families pickle
cleanly into sweep workers and differentiate exactly.
"""

import logging
import math
from abc import ABC, abstractmethod
from typing import Any, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg

from adiakit.exceptions import ConfigError, NonAntiHermitianError
from adiakit.models.schemas import (
    BathSpec,
    CouplingAxis,
    CrossingMode,
    FamilySpec,
    ShiftMode,
    SyntheticCrossingSpec,
)
from adiakit.services.davies import (
    LambShiftTable,
    bohr_decompose,
    build_bath,
    davies_generator,
    davies_generator_batch,
    davies_jump_operators,
    gibbs_state,
    lamb_shift_hamiltonian,
)
from adiakit.services.superop import (
    PAULIS,
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    conjugation_superop,
    dagger,
    dissipator_derivative,
    dissipator_superop,
    hamiltonian_superop,
    lindbladian,
    pauli_vector,
)

logger = logging.getLogger(__name__)


def _polynomial(value: Any) -> Polynomial:
    """Accept a Polynomial, a scalar or a coefficient list (ascending powers)."""
    if isinstance(value, Polynomial):
        return value
    return Polynomial(np.atleast_1d(np.asarray(value, dtype=float)))


# ============================================================================
# Interfaces
# ============================================================================


class LiouvillianFamily(ABC):
    """A schedule s -> L(s) of Lindblad generators on a d-level system."""

    name = "family"
    theoretical_exponent: Optional[float] = None

    def __init__(self, dim: int):
        self.dim = dim

    @abstractmethod
    def liouvillian(self, s: float) -> np.ndarray:
        """L(s) as a d^2 x d^2 matrix."""

    def liouvillian_derivative(self, s: float) -> Optional[np.ndarray]:
        """Analytic L'(s), or None to request finite differences."""
        return None

    def liouvillian_batch(self, s_values: np.ndarray) -> np.ndarray:
        return np.stack([self.liouvillian(float(s)) for s in np.asarray(s_values)])

    def initial_state(self) -> Optional[np.ndarray]:
        """Preferred initial state, or None for the projected maximally mixed state."""
        return None

    def hamiltonian(self, s: float) -> Optional[np.ndarray]:
        return None

    def hamiltonian_derivative(self, s: float) -> Optional[np.ndarray]:
        return None

    @property
    def beta(self) -> Optional[float]:
        """Inverse temperature for thermal families."""
        return None

    def parameters(self) -> dict[str, Any]:
        return {}

    def metadata(self) -> dict[str, Any]:
        return {"name": self.name, **self.parameters()}


class HilbertSpaceFamily(LiouvillianFamily):
    """Family given by H(s) and jump operators L_l(s)."""

    @abstractmethod
    def hamiltonian(self, s: float) -> np.ndarray: ...

    @abstractmethod
    def lindblad_operators(self, s: float) -> list[np.ndarray]: ...

    def lindblad_derivatives(self, s: float) -> Optional[list[np.ndarray]]:
        return None

    def evaluate(self, s: float) -> tuple[np.ndarray, list[np.ndarray]]:
        return self.hamiltonian(s), self.lindblad_operators(s)

    def derivative(self, s: float) -> Optional[tuple[np.ndarray, list[np.ndarray]]]:
        dH = self.hamiltonian_derivative(s)
        dops = self.lindblad_derivatives(s)
        if dH is None or dops is None:
            return None
        return dH, dops

    def liouvillian(self, s: float) -> np.ndarray:
        H, ops = self.evaluate(s)
        return lindbladian(H, ops)

    def liouvillian_derivative(self, s: float) -> Optional[np.ndarray]:
        derivative = self.derivative(s)
        if derivative is None:
            return None
        dH, dops = derivative
        return hamiltonian_superop(dH) + dissipator_derivative(
            self.lindblad_operators(s), dops, self.dim
        )


# ============================================================================
# Qubit families with a Pauli-field Hamiltonian
# ============================================================================


class PauliFieldFamily(HilbertSpaceFamily):
    """H(s) = m(s) . sigma with polynomial components."""

    def __init__(self, m_x: Any, m_y: Any, m_z: Any):
        super().__init__(dim=2)
        self.schedules = (_polynomial(m_x), _polynomial(m_y), _polynomial(m_z))
        self._derivs = tuple(p.deriv() for p in self.schedules)
        self._pauli_superops = [hamiltonian_superop(sigma) for sigma in PAULIS]

    def field(self, s) -> np.ndarray:
        """m(s), shape (..., 3)."""
        return np.stack([p(s) for p in self.schedules], axis=-1)

    def field_derivative(self, s) -> np.ndarray:
        return np.stack([p(s) for p in self._derivs], axis=-1)

    def hamiltonian(self, s: float) -> np.ndarray:
        return pauli_vector(self.field(s))

    def hamiltonian_derivative(self, s: float) -> np.ndarray:
        return pauli_vector(self.field_derivative(s))

    def _hamiltonian_part_batch(self, s_values: np.ndarray) -> np.ndarray:
        m = self.field(np.asarray(s_values, dtype=float))
        return np.einsum("nk,kij->nij", m, np.stack(self._pauli_superops))

    def parameters(self) -> dict[str, Any]:
        return {
            axis: [float(c) for c in p.coef] for axis, p in zip(("m_x", "m_y", "m_z"), self.schedules)
        }


class ConstantFamily(PauliFieldFamily):
    """Example-1 generator frozen at a fixed field m."""

    name = "constant"

    def __init__(self, field: Sequence[float] = (0.0, 0.0, 0.0), gamma: float = 0.5):
        m = [float(x) for x in field]
        super().__init__(m[0], m[1], m[2])
        self.gamma = gamma
        self._L = lindbladian(self.hamiltonian(0.0), self.lindblad_operators(0.0))

    def lindblad_operators(self, s: float) -> list[np.ndarray]:
        return [math.sqrt(2.0 * self.gamma) * SIGMA_MINUS] if self.gamma > 0 else []

    def lindblad_derivatives(self, s: float) -> list[np.ndarray]:
        return [np.zeros((2, 2), dtype=complex) for _ in self.lindblad_operators(s)]

    def liouvillian(self, s: float) -> np.ndarray:
        return self._L.copy()

    def liouvillian_derivative(self, s: float) -> np.ndarray:
        return np.zeros_like(self._L)

    def liouvillian_batch(self, s_values: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self._L, (len(s_values),) + self._L.shape).copy()

    def parameters(self) -> dict[str, Any]:
        return {"field": [float(p.coef[0]) for p in self.schedules], "gamma": self.gamma}


class Example1Family(PauliFieldFamily):
    """Amplitude damping sqrt(2 gamma) sigma^- under a swept field H(s) = m(s) . sigma."""

    name = "example1"

    def __init__(
        self,
        m_x: Any = (1.0, -1.0),
        m_y: Any = (0.0,),
        m_z: Any = (0.0, 1.0 / 150.0),
        gamma: float = 0.5,
    ):
        super().__init__(m_x, m_y, m_z)
        self.gamma = gamma
        self._jump = math.sqrt(2.0 * gamma) * SIGMA_MINUS
        self._dissipator = dissipator_superop([self._jump])

    def lindblad_operators(self, s: float) -> list[np.ndarray]:
        return [self._jump]

    def lindblad_derivatives(self, s: float) -> list[np.ndarray]:
        return [np.zeros((2, 2), dtype=complex)]

    def liouvillian_batch(self, s_values: np.ndarray) -> np.ndarray:
        return self._hamiltonian_part_batch(s_values) + self._dissipator

    def parameters(self) -> dict[str, Any]:
        return {**super().parameters(), "gamma": self.gamma}


def example1_family(m_x: Any = (1.0, -1.0), m_y: Any = (0.0,), m_z: Any = (0.0, 1.0 / 150.0), gamma: float = 0.5) -> Example1Family:
    return Example1Family(m_x, m_y, m_z, gamma)


def example1_iss_closed_form(m: Sequence[float], gamma: float) -> np.ndarray:
    """Steady state of m . sigma with amplitude damping, in the sigma^z basis."""
    mx, my, mz = (float(x) for x in m)
    m2 = mx * mx + my * my + mz * mz
    c = 2.0 * (m2 + mz * mz) + gamma * gamma
    if c <= 0.0:
        raise ValueError("closed form needs c = 2(m^2 + m_z^2) + gamma^2 > 0")
    m_minus = mx - 1j * my
    m_plus = mx + 1j * my
    return (
        np.array(
            [
                [m2 - mz * mz, -m_minus * (2 * mz + 1j * gamma)],
                [-m_plus * (2 * mz - 1j * gamma), m2 + 3 * mz * mz + gamma * gamma],
            ],
            dtype=complex,
        )
        / c
    )


class Example2Family(PauliFieldFamily):
    """Qubit Davies generator for H(s) = w_x (1 - s) sigma^x + w_z s sigma^z and A = g sigma^{y,z}."""

    name = "example2"

    def __init__(
        self,
        omega_x: float = -0.5,
        omega_z: float = -0.5,
        g: float = 1e-2,
        coupling_axis: CouplingAxis = CouplingAxis.Y,
        bath: Optional[BathSpec] = None,
    ):
        super().__init__((omega_x, -omega_x), (0.0,), (0.0, omega_z))
        self.omega_x = omega_x
        self.omega_z = omega_z
        self.g = g
        self.coupling_axis = CouplingAxis(coupling_axis)
        self.bath_spec = bath if bath is not None else BathSpec()
        self.bath = build_bath(self.bath_spec)
        self.coupling = g * (SIGMA_Y if self.coupling_axis == CouplingAxis.Y else SIGMA_Z)
        self._lamb_table: Optional[LambShiftTable] = None
        if self.coupling_axis == CouplingAxis.Z:
            self.theoretical_exponent = 1.0 / 3.0
        else:
            self.theoretical_exponent = 1.0

    def lindblad_operators(self, s: float) -> list[np.ndarray]:
        return davies_jump_operators(bohr_decompose(self.hamiltonian(s), self.coupling), self.bath)

    def evaluate(self, s: float) -> tuple[np.ndarray, list[np.ndarray]]:
        """(H + H_LS, jump operators); H_LS is zero with the Lamb shift disabled."""
        H = self.hamiltonian(s)
        bohr = bohr_decompose(H, self.coupling)
        if self.bath_spec.lamb_shift_enabled:
            H = H + lamb_shift_hamiltonian(bohr, self.bath, self.lamb_shift)
        return H, davies_jump_operators(bohr, self.bath)

    def splitting(self, s) -> np.ndarray:
        """Hamiltonian gap delta(s) = 2 ||m(s)||."""
        return 2.0 * np.linalg.norm(self.field(np.asarray(s, dtype=float)), axis=-1)

    @property
    def lamb_shift(self) -> Optional[LambShiftTable]:
        if not self.bath_spec.lamb_shift_enabled:
            return None
        if self._lamb_table is None:
            deltas = self.splitting(np.linspace(0.0, 1.0, 1001))
            self._lamb_table = LambShiftTable(
                self.bath, 0.9 * float(deltas.min()), 1.1 * float(deltas.max())
            )
        return self._lamb_table

    @property
    def beta(self) -> float:
        return self.bath.beta

    def liouvillian(self, s: float) -> np.ndarray:
        return davies_generator(
            self.hamiltonian(s),
            self.coupling,
            self.bath,
            lamb_shift=self.lamb_shift,
            lamb_shift_enabled=self.bath_spec.lamb_shift_enabled,
        )

    def liouvillian_derivative(self, s: float) -> Optional[np.ndarray]:
        return None

    def liouvillian_batch(self, s_values: np.ndarray) -> np.ndarray:
        H = pauli_vector(self.field(np.asarray(s_values, dtype=float)))
        return davies_generator_batch(
            H,
            self.coupling,
            self.bath,
            lamb_shift=self.lamb_shift,
            lamb_shift_enabled=self.bath_spec.lamb_shift_enabled,
        )

    def initial_state(self) -> np.ndarray:
        return gibbs_state(self.hamiltonian(0.0), self.beta)

    def parameters(self) -> dict[str, Any]:
        return {
            "omega_x": self.omega_x,
            "omega_z": self.omega_z,
            "g": self.g,
            "coupling_axis": self.coupling_axis.value,
            "bath": self.bath_spec.model_dump(mode="json"),
        }


def example2_family(
    omega_x: float = -0.5,
    omega_z: float = -0.5,
    g: float = 1e-2,
    coupling_axis: CouplingAxis = CouplingAxis.Y,
    bath: Optional[BathSpec] = None,
) -> Example2Family:
    return Example2Family(omega_x, omega_z, g, coupling_axis, bath)


class ClosedSystemFamily(PauliFieldFamily):
    """Unitary evolution under H(s) = m(s) . sigma; L(s) = K(s) = -i[H(s), .].

    The ground-energy shift mode additionally exposes the Hilbert-space
    generator -i(H(s) - E_0(s)) through ``generator``.
    """

    name = "closed_system"
    theoretical_exponent = 1.0

    def __init__(self, m_x: Any = (1.0,), m_y: Any = (0.0,), m_z: Any = (0.0, 2.0), shift: ShiftMode = ShiftMode.NONE):
        super().__init__(m_x, m_y, m_z)
        self.shift = ShiftMode(shift)

    def lindblad_operators(self, s: float) -> list[np.ndarray]:
        return []

    def lindblad_derivatives(self, s: float) -> list[np.ndarray]:
        return []

    def liouvillian_batch(self, s_values: np.ndarray) -> np.ndarray:
        return self._hamiltonian_part_batch(s_values)

    def generator(self, s: float) -> np.ndarray:
        """Hilbert-space generator: -i(H - E_0) in shift mode, -iH otherwise."""
        H = self.hamiltonian(s)
        if self.shift == ShiftMode.GROUND_ENERGY:
            H = H - np.linalg.eigvalsh(H)[0] * np.eye(self.dim)
        return -1j * H

    def initial_state(self) -> np.ndarray:
        _, V = np.linalg.eigh(self.hamiltonian(0.0))
        ground = V[:, 0]
        return np.outer(ground, ground.conj())

    def parameters(self) -> dict[str, Any]:
        return {**super().parameters(), "shift": self.shift.value}


def closed_system_family(m_x: Any = (1.0,), m_y: Any = (0.0,), m_z: Any = (0.0, 2.0), shift: ShiftMode = ShiftMode.NONE) -> ClosedSystemFamily:
    return ClosedSystemFamily(m_x, m_y, m_z, shift)


# ============================================================================
# Superoperator-level families
# ============================================================================


class UnitaryFamily(LiouvillianFamily):
    """L(s) = e^{sK} L0 e^{-sK} for an anti-hermitian superoperator K."""

    name = "unitary"

    def __init__(self, L0: np.ndarray, K: np.ndarray, tol: float = 1e-10):
        L0 = np.asarray(L0, dtype=complex)
        K = np.asarray(K, dtype=complex)
        deviation = float(np.max(np.abs(K + dagger(K))))
        if deviation > tol * max(1.0, float(np.max(np.abs(K)))):
            raise NonAntiHermitianError(deviation)
        super().__init__(dim=int(round(math.sqrt(L0.shape[0]))))
        self.L0 = L0
        self.K = K
        self._source: dict[str, Any] = {}

    def rotation(self, s: float) -> np.ndarray:
        return linalg.expm(s * self.K)

    def liouvillian(self, s: float) -> np.ndarray:
        U = self.rotation(s)
        return U @ self.L0 @ dagger(U)

    def liouvillian_derivative(self, s: float) -> np.ndarray:
        L = self.liouvillian(s)
        return self.K @ L - L @ self.K

    def liouvillian_batch(self, s_values: np.ndarray) -> np.ndarray:
        s_values = np.asarray(s_values, dtype=float)
        U = linalg.expm(s_values[:, None, None] * self.K)
        return U @ self.L0 @ dagger(U)

    @classmethod
    def from_fields(
        cls,
        field: Sequence[float] = (1.0, 0.0, 0.25),
        gamma: float = 0.5,
        rotation: Sequence[float] = (0.0, 0.6, 0.0),
    ) -> "UnitaryFamily":
        """Amplitude damping under m . sigma, rotated by K = -i[n . sigma, .]."""
        L0 = lindbladian(pauli_vector(field), [math.sqrt(2.0 * gamma) * SIGMA_MINUS])
        family = cls(L0, hamiltonian_superop(pauli_vector(rotation)))
        family._source = {
            "field": [float(x) for x in field],
            "gamma": gamma,
            "rotation": [float(x) for x in rotation],
        }
        return family

    def parameters(self) -> dict[str, Any]:
        return dict(self._source)


def unitary_family(L0: np.ndarray, K: np.ndarray) -> UnitaryFamily:
    return UnitaryFamily(L0, K)


class SyntheticCrossingFamily(LiouvillianFamily):
    """Qubit generator with an engineered gap v |s - s*|^alpha.

    In the basis |e_k(s)> = exp(-i theta(s) sigma^y)|k>, populations relax at
    rate r(s) = v |s - s*|^alpha toward (1 - q(s), q(s)) and coherences decay
    at r/2 + kappa. In coupled mode the target q(s) moves through the crossing,
    so the kernel direction rotates into the closing mode; in decoupled mode q
    is fixed and only the basis rotation (a gapped coherence direction) moves
    the kernel.
    """

    name = "synthetic_crossing"

    def __init__(self, spec: Optional[SyntheticCrossingSpec] = None):
        super().__init__(dim=2)
        self.spec = spec if spec is not None else SyntheticCrossingSpec()
        self._up = dissipator_superop([np.array([[0, 0], [1, 0]], dtype=complex)])  # |1><0|
        self._down = dissipator_superop([np.array([[0, 1], [0, 0]], dtype=complex)])  # |0><1|
        self._dephase = 0.5 * self.spec.kappa * dissipator_superop([SIGMA_Z])
        self._G = self.spec.rotation * hamiltonian_superop(SIGMA_Y)
        self.theoretical_exponent = (
            1.0 / (1.0 + self.spec.alpha) if self.spec.mode == CrossingMode.COUPLED else 1.0
        )

    def rate(self, s) -> np.ndarray:
        return self.spec.v * np.abs(np.asarray(s, dtype=float) - self.spec.s_star) ** self.spec.alpha

    def rate_derivative(self, s) -> np.ndarray:
        offset = np.asarray(s, dtype=float) - self.spec.s_star
        alpha = self.spec.alpha
        with np.errstate(divide="ignore"):
            return self.spec.v * alpha * np.sign(offset) * np.abs(offset) ** (alpha - 1.0)

    def _q_slope(self) -> float:
        if self.spec.mode == CrossingMode.DECOUPLED:
            return 0.0
        return 0.4 / max(self.spec.s_star, 1.0 - self.spec.s_star)

    def target_population(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.spec.mode == CrossingMode.DECOUPLED:
            return np.full_like(s, self.spec.population)
        return 0.5 + self._q_slope() * (s - self.spec.s_star)

    def _frame(self, s) -> np.ndarray:
        theta = self.spec.rotation * np.asarray(s, dtype=float)
        c, sn = np.cos(theta), np.sin(theta)
        # exp(-i theta sigma^y) is the real rotation [[c, -sn], [sn, c]]
        U = np.stack([np.stack([c, -sn], axis=-1), np.stack([sn, c], axis=-1)], axis=-2)
        return conjugation_superop(U.astype(complex))

    def _rotating_generator(self, r, q) -> np.ndarray:
        r = np.asarray(r, dtype=float)[..., None, None]
        q = np.asarray(q, dtype=float)[..., None, None]
        return r * q * self._up + r * (1.0 - q) * self._down + self._dephase

    def liouvillian(self, s: float) -> np.ndarray:
        F = self._frame(s)
        return F @ self._rotating_generator(self.rate(s), self.target_population(s)) @ dagger(F)

    def liouvillian_batch(self, s_values: np.ndarray) -> np.ndarray:
        s_values = np.asarray(s_values, dtype=float)
        F = self._frame(s_values)
        M = self._rotating_generator(self.rate(s_values), self.target_population(s_values))
        return F @ M @ dagger(F)

    def liouvillian_derivative(self, s: float) -> np.ndarray:
        F = self._frame(s)
        r, q = float(self.rate(s)), float(self.target_population(s))
        dr, dq = float(self.rate_derivative(s)), self._q_slope()
        dM = (dr * q + r * dq) * self._up + (dr * (1.0 - q) - r * dq) * self._down
        L = self.liouvillian(s)
        return self._G @ L - L @ self._G + F @ dM @ dagger(F)

    def parameters(self) -> dict[str, Any]:
        return self.spec.model_dump(mode="json")


def synthetic_crossing_family(spec: Optional[SyntheticCrossingSpec] = None) -> SyntheticCrossingFamily:
    return SyntheticCrossingFamily(spec)


# ============================================================================
# Registry
# ============================================================================


def build_family(spec: FamilySpec) -> LiouvillianFamily:
    """Construct a family from its JSON name + parameter record."""
    params = dict(spec.parameters)
    try:
        if spec.name == "constant":
            return ConstantFamily(**params)
        if spec.name == "example1":
            return Example1Family(**params)
        if spec.name == "example2":
            if "bath" in params:
                params["bath"] = BathSpec.model_validate(params["bath"])
            return Example2Family(**params)
        if spec.name == "unitary":
            return UnitaryFamily.from_fields(**params)
        if spec.name == "synthetic_crossing":
            return SyntheticCrossingFamily(SyntheticCrossingSpec.model_validate(params))
        if spec.name == "closed_system":
            return ClosedSystemFamily(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), location=f"family.parameters ({spec.name})") from exc
    raise ConfigError(f"unknown family {spec.name!r}", location="family.name")


def default_families() -> list[LiouvillianFamily]:
    """One instance of every built-in family, used by the invariant suites."""
    return [
        ConstantFamily(field=(0.3, 0.0, 0.5), gamma=0.5),
        Example1Family(),
        Example2Family(coupling_axis=CouplingAxis.Y),
        Example2Family(coupling_axis=CouplingAxis.Z),
        UnitaryFamily.from_fields(),
        SyntheticCrossingFamily(SyntheticCrossingSpec(s_star=0.5)),
        ClosedSystemFamily(),
    ]
