"""Thermal (Davies) generators, bath spectral functions and Gibbs-state certificates."""

import logging
import math
from abc import ABC, abstractmethod
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.special import expit

from adiakit.config import get_settings
from adiakit.exceptions import (
    DegenerateHamiltonianError,
    QuadratureFailureError,
    SingularGibbsError,
)
from adiakit.models.records import BohrDecomposition
from adiakit.models.schemas import BathKind, BathSpec, DetailedBalanceReport
from adiakit.services.spectral import finite_difference
from adiakit.services.superop import (
    check_hermitian,
    dagger,
    dissipator_superop,
    hamiltonian_superop,
    spost,
    spre,
    sprepost,
    superop_dim,
    vectorize,
)

logger = logging.getLogger(__name__)


# ============================================================================
# Bath spectral functions
# ============================================================================


class Bath(ABC):
    """Rate function gamma(omega) at inverse temperature beta."""

    def __init__(self, beta: float, cutoff: float = math.inf):
        self.beta = beta
        self.cutoff = cutoff
        # Inner principal-value radius; None means |omega| + pv_cutoff_multiple * frequency_scale
        self.pv_radius: Optional[float] = None

    @abstractmethod
    def gamma(self, omega) -> np.ndarray:
        """Vectorized gamma(omega) >= 0."""

    @property
    def frequency_scale(self) -> float:
        """Scale beyond which gamma has decayed (used to size quadratures)."""
        if math.isfinite(self.cutoff):
            return self.cutoff
        return 1.0 / self.beta if self.beta > 0 else 1.0


class OhmicBath(Bath):
    """gamma(omega) = 2 pi eta omega exp(-|omega|/cutoff) / (1 - exp(-beta omega))."""

    def __init__(self, beta: float, eta: float = 1.0, cutoff: float = 8 * math.pi):
        super().__init__(beta, cutoff)
        self.eta = eta

    def gamma(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        x = self.beta * omega
        small = np.abs(x) < 1e-12
        safe = np.where(small, 1.0, x)
        with np.errstate(over="ignore"):
            # omega / (1 - e^{-beta omega}), continuous at omega = 0 with limit 1/beta
            thermal = np.where(small, 1.0, safe / -np.expm1(-safe)) / self.beta
        return 2.0 * np.pi * self.eta * thermal * np.exp(-np.abs(omega) / self.cutoff)


class FlatBath(Bath):
    """gamma(omega) = 2 kappa exp(-|omega|/cutoff) / (1 + exp(-beta omega))."""

    def __init__(self, beta: float, kappa: float = 1.0, cutoff: float = math.inf):
        super().__init__(beta, cutoff)
        self.kappa = kappa

    def gamma(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        return 2.0 * self.kappa * expit(self.beta * omega) * np.exp(-np.abs(omega) / self.cutoff)


class TabulatedBath(Bath):
    """Monotone interpolation of user samples; zero outside the table."""

    def __init__(self, beta: float, points: Iterable[tuple[float, float]], enforce_kms: bool = True):
        table = np.array(sorted(points), dtype=float)
        super().__init__(beta)
        self.enforce_kms = enforce_kms
        if enforce_kms:
            table = table[table[:, 0] >= 0.0]
        self.omega_max = float(np.max(np.abs(table[:, 0])))
        self._interp = PchipInterpolator(table[:, 0], table[:, 1], extrapolate=False)

    @property
    def frequency_scale(self) -> float:
        return self.omega_max

    def _raw(self, omega: np.ndarray) -> np.ndarray:
        return np.nan_to_num(self._interp(omega), nan=0.0).clip(min=0.0)

    def gamma(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        if not self.enforce_kms:
            return self._raw(omega)
        magnitude = np.abs(omega)
        return np.where(omega >= 0.0, 1.0, np.exp(-self.beta * magnitude)) * self._raw(magnitude)


def build_bath(spec: BathSpec) -> Bath:
    if spec.kind == BathKind.OHMIC:
        bath: Bath = OhmicBath(spec.beta, spec.eta, spec.cutoff)
    elif spec.kind == BathKind.FLAT:
        bath = FlatBath(spec.beta, spec.kappa, spec.cutoff)
    else:
        bath = TabulatedBath(spec.beta, spec.points, spec.enforce_kms)
    bath.pv_radius = spec.pv_radius
    return bath


def kms_violation(bath: Bath, omegas) -> float:
    """max |gamma(-w) - e^{-beta w} gamma(w)| / gamma(w) over the sampled w."""
    omegas = np.abs(np.atleast_1d(np.asarray(omegas, dtype=float)))
    omegas = omegas[omegas > 0.0]
    if omegas.size == 0:
        return 0.0
    forward = bath.gamma(omegas)
    backward = bath.gamma(-omegas)
    defect = np.abs(backward - np.exp(-bath.beta * omegas) * forward)
    return float(np.max(defect / np.maximum(forward, np.finfo(float).tiny)))


# ============================================================================
# Lamb shift
# ============================================================================


def lamb_shift_coefficient(
    bath: Bath, omega: float, radius: Optional[float] = None, tol: Optional[float] = None
) -> tuple[float, float]:
    """S(omega) = P int gamma(w') / (omega - w') dw' and its absolute error estimate.

    The singularity is removed by folding the integrand about w' = omega:
    S(omega) = -int_0^inf [gamma(omega + u) - gamma(omega - u)] / u du,
    split into [0, R] (with the gamma kink at u = |omega| as a breakpoint)
    plus the tail [R, inf).
    """
    settings = get_settings()
    tol = settings.pv_tolerance if tol is None else tol
    if radius is None:
        radius = bath.pv_radius
    R = radius if radius is not None else abs(omega) + settings.pv_cutoff_multiple * bath.frequency_scale

    def folded(u: float) -> float:
        if u == 0.0:
            return 0.0
        return float(bath.gamma(omega + u) - bath.gamma(omega - u)) / u

    breakpoints = [abs(omega)] if 0.0 < abs(omega) < R else None
    inner, inner_err = integrate.quad(
        folded, 0.0, R, points=breakpoints, epsabs=1e-13, epsrel=1e-12, limit=400
    )
    tail, tail_err = integrate.quad(folded, R, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    value = -(inner + tail)
    error = inner_err + tail_err
    if error > tol * max(1.0, abs(value)):
        raise QuadratureFailureError(omega, value, error)
    logger.debug("S(%.6g) = %.12g +- %.2e", omega, value, error)
    return value, error


class LambShiftTable:
    """S(omega) on |omega| in [omega_min, omega_max] by cubic splines, exact at 0.

    Frequencies outside the table fall back to direct quadrature.
    """

    def __init__(self, bath: Bath, omega_min: float, omega_max: float, points: Optional[int] = None):
        points = get_settings().lamb_table_points if points is None else points
        self.bath = bath
        self.omega_min = omega_min
        self.omega_max = omega_max
        nodes = np.linspace(omega_min, omega_max, points)
        positive = [lamb_shift_coefficient(bath, w)[0] for w in nodes]
        negative = [lamb_shift_coefficient(bath, -w)[0] for w in nodes]
        self._positive = CubicSpline(nodes, positive)
        self._negative = CubicSpline(nodes, negative)
        self.s0 = lamb_shift_coefficient(bath, 0.0)[0]
        logger.info(
            "Lamb shift table: %d nodes on |omega| in [%.4g, %.4g]", points, omega_min, omega_max
        )

    def __call__(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        flat = omega.ravel()
        out = np.empty_like(flat)
        magnitude = np.abs(flat)
        tol = get_settings().bohr_tol
        inside = (magnitude >= self.omega_min) & (magnitude <= self.omega_max)
        at_zero = magnitude <= tol
        out[at_zero] = self.s0
        pos = inside & (flat > 0)
        neg = inside & (flat < 0)
        out[pos] = self._positive(magnitude[pos])
        out[neg] = self._negative(magnitude[neg])
        for i in np.flatnonzero(~(inside | at_zero)):
            out[i] = lamb_shift_coefficient(self.bath, float(flat[i]))[0]
        return out.reshape(omega.shape)


def direct_lamb_shift(bath: Bath) -> Callable[[np.ndarray], np.ndarray]:
    def shift(omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        return np.vectorize(lambda w: lamb_shift_coefficient(bath, float(w))[0])(omega)

    return shift


# ============================================================================
# Bohr decomposition and generators
# ============================================================================


def _energy_levels(H: np.ndarray, tol: float) -> tuple[np.ndarray, list[np.ndarray]]:
    """Distinct eigenvalues of H and their eigenprojectors."""
    E, V = np.linalg.eigh(H)
    scale = max(float(np.max(np.abs(E))), 1.0)
    levels: list[list[int]] = [[0]]
    for i in range(1, len(E)):
        if E[i] - E[levels[-1][-1]] <= tol * scale:
            levels[-1].append(i)
        else:
            levels.append([i])
    energies = np.array([E[idx].mean() for idx in levels])
    projectors = [V[:, idx] @ V[:, idx].conj().T for idx in levels]
    return energies, projectors


def bohr_decompose(H: np.ndarray, A: np.ndarray, tol: Optional[float] = None) -> BohrDecomposition:
    """A_omega = sum over E_b - E_a = omega of Pi_a A Pi_b."""
    tol = get_settings().bohr_tol if tol is None else tol
    H = check_hermitian(H, name="Hamiltonian")
    A = np.asarray(A, dtype=complex)
    energies, projectors = _energy_levels(H, tol)
    scale = max(float(np.max(np.abs(energies))), 1.0)

    pairs = []
    for a, Pa in enumerate(projectors):
        for b, Pb in enumerate(projectors):
            pairs.append((energies[b] - energies[a], Pa @ A @ Pb))
    pairs.sort(key=lambda item: item[0])

    frequencies: list[float] = []
    components: list[np.ndarray] = []
    for omega, block in pairs:
        if frequencies and abs(omega - frequencies[-1]) <= tol * scale:
            components[-1] = components[-1] + block
        else:
            frequencies.append(float(omega))
            components.append(block)
    keep = [i for i, C in enumerate(components) if np.max(np.abs(C)) > 0.0]
    return BohrDecomposition(
        frequencies=np.array([frequencies[i] for i in keep]),
        components=[components[i] for i in keep],
        clustering_tol=tol * scale,
    )


def davies_parts(
    H: np.ndarray,
    A: np.ndarray,
    bath: Bath,
    lamb_shift: Optional[Callable] = None,
    lamb_shift_enabled: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(K, K_LS, D): Hamiltonian, Lamb-shift and dissipative parts."""
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    bohr = bohr_decompose(H, A)
    K = hamiltonian_superop(H)
    D = dissipator_superop(davies_jump_operators(bohr, bath), dim=d)
    K_LS = np.zeros_like(D)
    if lamb_shift_enabled:
        K_LS = hamiltonian_superop(lamb_shift_hamiltonian(bohr, bath, lamb_shift))
    return K, K_LS, D


def davies_jump_operators(bohr: BohrDecomposition, bath: Bath) -> list[np.ndarray]:
    """Jump operators sqrt(gamma(omega)) A_omega, one per Bohr frequency."""
    rates = np.clip(bath.gamma(bohr.frequencies), 0.0, None)
    return [math.sqrt(float(rate)) * A_w for rate, A_w in zip(rates, bohr.components)]


def lamb_shift_hamiltonian(
    bohr: BohrDecomposition, bath: Bath, lamb_shift: Optional[Callable] = None
) -> np.ndarray:
    """H_LS = sum_omega S(omega) A_omega^dag A_omega, hermitized."""
    shift = lamb_shift if lamb_shift is not None else direct_lamb_shift(bath)
    shifts = np.atleast_1d(shift(bohr.frequencies))
    d = bohr.components[0].shape[0]
    H_LS = np.zeros((d, d), dtype=complex)
    for S_w, A_w in zip(shifts, bohr.components):
        H_LS += S_w * dagger(A_w) @ A_w
    return 0.5 * (H_LS + dagger(H_LS))


def davies_generator(
    H: np.ndarray,
    A: np.ndarray,
    bath: Bath,
    lamb_shift: Optional[Callable] = None,
    lamb_shift_enabled: bool = True,
) -> np.ndarray:
    """L = -i[H + H_LS, .] + sum_omega gamma(omega) D[A_omega]."""
    K, K_LS, D = davies_parts(H, A, bath, lamb_shift, lamb_shift_enabled)
    return K + K_LS + D


def _batch_dissipator(J: np.ndarray) -> np.ndarray:
    JdJ = dagger(J) @ J
    return sprepost(J, dagger(J)) - 0.5 * spre(JdJ) - 0.5 * spost(JdJ)


def davies_generator_batch(
    H_stack: np.ndarray,
    A: np.ndarray,
    bath: Bath,
    lamb_shift: Optional[Callable] = None,
    lamb_shift_enabled: bool = True,
) -> np.ndarray:
    """Davies generators for a stack of Hamiltonians.

    Vectorized when every H is nondegenerate and its off-diagonal Bohr
    frequencies are distinct; otherwise each generator is built separately.
    """
    H_stack = np.asarray(H_stack, dtype=complex)
    n, d = H_stack.shape[0], H_stack.shape[-1]
    tol = get_settings().bohr_tol
    E, V = np.linalg.eigh(H_stack)
    scale = max(float(np.max(np.abs(E))), 1.0)
    pairs = [(a, b) for a in range(d) for b in range(d) if a != b]
    freqs = np.stack([E[:, b] - E[:, a] for a, b in pairs], axis=1) if pairs else np.zeros((n, 0))
    generic = np.all(np.diff(E, axis=1) > tol * scale)
    if generic and freqs.shape[1] > 1:
        ordered = np.sort(freqs, axis=1)
        generic = bool(np.all(np.diff(ordered, axis=1) > tol * scale))
    if not generic:
        logger.debug("degenerate spectrum in batch; building %d Davies generators one by one", n)
        return np.stack([davies_generator(H, A, bath, lamb_shift, lamb_shift_enabled) for H in H_stack])

    A = np.asarray(A, dtype=complex)
    A_eig = dagger(V) @ A @ V
    shift = None
    if lamb_shift_enabled:
        shift = lamb_shift if lamb_shift is not None else direct_lamb_shift(bath)

    diag = np.zeros((n, d, d), dtype=complex)
    idx = np.arange(d)
    diag[:, idx, idx] = A_eig[:, idx, idx]
    L = bath.gamma(np.zeros(1))[0] * _batch_dissipator(diag)
    H_LS = np.zeros((n, d, d), dtype=complex)
    if shift is not None:
        H_LS += shift(np.zeros(1))[0] * dagger(diag) @ diag
    for k, (a, b) in enumerate(pairs):
        J = np.zeros((n, d, d), dtype=complex)
        J[:, a, b] = A_eig[:, a, b]
        rates = bath.gamma(freqs[:, k])
        L = L + rates[:, None, None] * _batch_dissipator(J)
        if shift is not None:
            H_LS[:, b, b] += shift(freqs[:, k]) * np.abs(A_eig[:, a, b]) ** 2
    energies = np.zeros((n, d, d), dtype=complex)
    energies[:, idx, idx] = E
    L = L - 1j * (spre(energies + H_LS) - spost(energies + H_LS))
    rotation = np.einsum("nij,nkl->nikjl", np.conj(V), V).reshape(n, d * d, d * d)
    return rotation @ L @ dagger(rotation)


# ============================================================================
# Closed forms and certificates
# ============================================================================


def example2_spectrum_closed_form(
    H: np.ndarray,
    A: np.ndarray,
    bath: Bath,
    lamb_shift: Optional[Callable] = None,
    lamb_shift_enabled: bool = True,
    cross_dephasing: bool = True,
) -> np.ndarray:
    """Four eigenvalues {0, lambda_2, -Gamma + i mu, -Gamma - i mu} of a qubit Davies generator.

    With cross_dephasing the zero-frequency term is gamma(0)|A00 - A11|^2,
    which is exact for any coupling; without it the sum
    gamma(0)(|A00|^2 + |A11|^2) is used, which agrees whenever A00 A11 = 0.
    """
    H = check_hermitian(H, name="Hamiltonian")
    E, V = np.linalg.eigh(H)
    delta = float(E[1] - E[0])
    if delta < get_settings().bohr_tol * max(1.0, float(np.max(np.abs(E)))):
        raise DegenerateHamiltonianError(delta)
    Ae = dagger(V) @ np.asarray(A, dtype=complex) @ V
    A00, A11, A01 = Ae[0, 0], Ae[1, 1], Ae[0, 1]
    g0, g_up, g_down = (float(x) for x in bath.gamma(np.array([0.0, delta, -delta])))
    population = abs(A01) ** 2 * (g_up + g_down)
    if cross_dephasing:
        dephasing = g0 * abs(A00 - A11) ** 2
    else:
        dephasing = g0 * (abs(A00) ** 2 + abs(A11) ** 2)
    Gamma = 0.5 * (dephasing + population)
    mu = delta
    if lamb_shift_enabled:
        shift = lamb_shift if lamb_shift is not None else direct_lamb_shift(bath)
        S0, S_up, S_down = (float(x) for x in shift(np.array([0.0, delta, -delta])))
        mu = delta - S0 * (abs(A00) ** 2 - abs(A11) ** 2) + abs(A01) ** 2 * (S_up - S_down)
    return np.array([0.0, -population, -Gamma + 1j * mu, -Gamma - 1j * mu], dtype=complex)


def gibbs_state(H: np.ndarray, beta: float) -> np.ndarray:
    """exp(-beta H) / Z evaluated in the eigenbasis of H."""
    H = check_hermitian(H, name="Hamiltonian")
    E, V = np.linalg.eigh(H)
    weights = np.exp(-beta * (E - E.min()))
    weights /= weights.sum()
    rho = (V * weights) @ V.conj().T
    return 0.5 * (rho + rho.conj().T)


def gibbs_derivative(hamiltonian: Callable[[float], np.ndarray], beta: float, s: float, h: Optional[float] = None) -> np.ndarray:
    """rho_G'(s) by finite differences of the Gibbs state along H(s)."""
    h = get_settings().fd_step if h is None else h
    return finite_difference(lambda t: gibbs_state(hamiltonian(t), beta), s, h)


def detailed_balance_certificate(L: np.ndarray, rho_G: np.ndarray) -> DetailedBalanceReport:
    """Stationarity of rho_G and normality of the generator.

    Normality is measured for the Heisenberg-picture generator L^dag under the
    weighted product <X, Y>_G = Tr[rho_G X^dag Y] = vec(X)^dag (rho_G^T kron 1) vec(Y).
    """
    L = np.asarray(L, dtype=complex)
    superop_dim(L)
    rho_G = np.asarray(rho_G, dtype=complex)
    smallest = float(np.linalg.eigvalsh(rho_G)[0])
    if smallest < 1e-14:
        raise SingularGibbsError(smallest)
    stationarity = float(np.linalg.norm(L @ vectorize(rho_G)))
    G = spost(rho_G)
    heisenberg = dagger(L)
    adjoint = np.linalg.solve(G, dagger(heisenberg) @ G)
    commutator = heisenberg @ adjoint - adjoint @ heisenberg
    return DetailedBalanceReport(
        stationarity=stationarity,
        normality_defect=float(np.linalg.norm(commutator, 2)),
    )
