"""Propagation of E'(s) = T L(s) E(s), adiabatic intertwiners and the adiabatic error."""

import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from adiakit.config import get_settings
from adiakit.exceptions import (
    AdiakitError,
    DegenerateCaseError,
    DegenerateKernelError,
    NonConvergenceError,
    ProjectorFailureError,
)
from adiakit.models.records import ErrorSample, EvolutionRecord, WitnessRecord
from adiakit.models.schemas import PropagationMethod, PropagatorConfig
from adiakit.services.spectral import (
    kernel_state,
    liouvillian_derivative,
    local_structure,
    zero_projector,
)
from adiakit.services.superop import (
    apply_superop,
    as_density_matrix,
    devectorize,
    is_cptp,
    trace_norm,
    trace_row,
    vectorize,
)

logger = logging.getLogger(__name__)

BatchGenerator = Callable[[np.ndarray], np.ndarray]

# Fourth-order commutator-free Magnus step: Gauss-Legendre nodes and weights
_GL_OFFSET = math.sqrt(3.0) / 6.0
_NODES = (0.5 - _GL_OFFSET, 0.5 + _GL_OFFSET)
_WEIGHTS = (0.25 - _GL_OFFSET, 0.25 + _GL_OFFSET)

_ORDER = {
    PropagationMethod.EXPONENTIAL_MIDPOINT: 2,
    PropagationMethod.MAGNUS4: 4,
}


# ============================================================================
# Step maps and products
# ============================================================================


def _step_maps(
    batch_fn: BatchGenerator, T: float, starts: np.ndarray, h: float, method: PropagationMethod
) -> np.ndarray:
    """Exponential step maps for substeps [start, start + h]."""
    if method == PropagationMethod.MAGNUS4:
        A1 = batch_fn(starts + _NODES[0] * h)
        A2 = batch_fn(starts + _NODES[1] * h)
        a1, a2 = _WEIGHTS
        # the factor weighted toward the later node acts last
        return linalg.expm(h * T * (a1 * A1 + a2 * A2)) @ linalg.expm(h * T * (a2 * A1 + a1 * A2))
    return linalg.expm(h * T * batch_fn(starts + 0.5 * h))


def ordered_product(maps: np.ndarray) -> np.ndarray:
    """maps[n-1] @ ... @ maps[0] by pairwise reduction."""
    maps = np.asarray(maps)
    while maps.shape[0] > 1:
        n = maps.shape[0]
        even = n - (n % 2)
        paired = maps[1:even:2] @ maps[0:even:2]
        maps = np.concatenate([paired, maps[even:]]) if n % 2 else paired
    return maps[0]


def _segment_map(
    batch_fn: BatchGenerator,
    T: float,
    a: float,
    b: float,
    substeps: int,
    method: PropagationMethod,
    chunk: int,
) -> np.ndarray:
    h = (b - a) / substeps
    result = None
    for first in range(0, substeps, chunk):
        index = np.arange(first, min(substeps, first + chunk))
        block = ordered_product(_step_maps(batch_fn, T, a + index * h, h, method))
        result = block if result is None else block @ result
    return result


def _substep_counts(checkpoints: np.ndarray, total: int) -> np.ndarray:
    widths = np.diff(checkpoints)
    span = checkpoints[-1] - checkpoints[0]
    return np.maximum(1, np.ceil(total * widths / span)).astype(int)


def _segments(
    batch_fn: BatchGenerator,
    T: float,
    checkpoints: np.ndarray,
    counts: np.ndarray,
    method: PropagationMethod,
    chunk: int,
) -> np.ndarray:
    return np.stack(
        [
            _segment_map(batch_fn, T, checkpoints[k], checkpoints[k + 1], int(n), method, chunk)
            for k, n in enumerate(counts)
        ]
    )


def _chain(segments: np.ndarray) -> np.ndarray:
    """Cumulative products E(s_k, s_0) from the segment maps."""
    D = segments.shape[-1]
    out = np.empty((segments.shape[0] + 1, D, D), dtype=complex)
    out[0] = np.eye(D)
    for k, segment in enumerate(segments):
        out[k + 1] = segment @ out[k]
    return out


def _checkpoint_grid(checkpoints: Optional[Sequence[float]]) -> np.ndarray:
    points = [1.0] if checkpoints is None else [float(s) for s in checkpoints]
    if any(not 0.0 <= s <= 1.0 for s in points):
        raise ValueError("checkpoints must lie in [0, 1]")
    grid = np.unique(np.asarray([0.0, *points]))
    if grid.size < 2:
        raise ValueError("propagation needs a checkpoint beyond s = 0")
    return grid


# ============================================================================
# Propagation
# ============================================================================


def _evolve_rk(
    batch_fn: BatchGenerator, T: float, checkpoints: np.ndarray, tol: float
) -> tuple[np.ndarray, int]:
    D = batch_fn(checkpoints[:1]).shape[-1]
    size = D * D

    def rhs(s: float, y: np.ndarray) -> np.ndarray:
        E = (y[:size] + 1j * y[size:]).reshape(D, D)
        dE = T * batch_fn(np.array([s]))[0] @ E
        return np.concatenate([dE.real.ravel(), dE.imag.ravel()])

    identity = np.concatenate([np.eye(D).ravel(), np.zeros(size)])
    segments = []
    steps = 0
    for a, b in zip(checkpoints[:-1], checkpoints[1:]):
        sol = solve_ivp(rhs, (a, b), identity, method="DOP853", rtol=tol, atol=tol)
        if not sol.success:
            raise NonConvergenceError(f"adaptive integration failed on [{a}, {b}]: {sol.message}")
        y = sol.y[:, -1]
        segments.append((y[:size] + 1j * y[size:]).reshape(D, D))
        steps += len(sol.t) - 1
    return np.stack(segments), steps


def _evolve_generator(
    batch_fn: BatchGenerator,
    T: float,
    checkpoints: np.ndarray,
    config: Optional[PropagatorConfig] = None,
    diagnose: bool = True,
) -> EvolutionRecord:
    """Propagate X' = T G(s) X through the checkpoints for any batched generator G."""
    settings = get_settings()
    config = config if config is not None else PropagatorConfig()
    method = PropagationMethod(config.method)

    if method == PropagationMethod.ADAPTIVE_RK:
        tol = config.tolerance if config.tolerance is not None else settings.ode_tol
        segments, steps = _evolve_rk(batch_fn, T, checkpoints, tol)
        discrepancy = None
    else:
        max_step_norm = config.max_step_norm or settings.max_step_norm
        max_substeps = config.max_substeps or settings.max_substeps
        tol = config.tolerance
        if tol is None:
            tol = settings.richardson_tol * max(1.0, T * settings.richardson_t_scale)
        probe = np.linspace(checkpoints[0], checkpoints[-1], 65)
        norm = float(np.max(np.linalg.norm(batch_fn(probe), ord=2, axis=(1, 2))))
        span = float(checkpoints[-1] - checkpoints[0])
        total = config.steps or max(1, math.ceil(T * span * norm / max_step_norm))
        counts = _substep_counts(checkpoints, total)
        logger.debug(
            "%s: T=%.4g, max ||L||=%.4g, starting with %d substeps (tol %.2e)",
            method.value, T, norm, int(counts.sum()), tol,
        )

        coarse = _segments(batch_fn, T, checkpoints, counts, method, settings.chunk_size)
        discrepancy = None
        while True:
            if 2 * int(counts.sum()) > max_substeps:
                raise NonConvergenceError(
                    f"Richardson discrepancy {discrepancy} above {tol:.2e} at "
                    f"{int(counts.sum())} substeps (T={T:.4g})",
                    discrepancy=discrepancy,
                )
            counts = counts * 2
            fine = _segments(batch_fn, T, checkpoints, counts, method, settings.chunk_size)
            discrepancy = float(np.linalg.norm(_chain(fine)[-1] - _chain(coarse)[-1], 2))
            logger.debug("Richardson: %d substeps, discrepancy %.3e", int(counts.sum()), discrepancy)
            if discrepancy <= tol:
                break
            coarse = fine
        segments = fine
        steps = int(counts.sum())

    propagators = _chain(segments)
    cptp = []
    if diagnose:
        cptp_tol = max(1e-8, 10.0 * (config.tolerance or settings.richardson_tol))
        cptp = [is_cptp(E, cptp_tol) for E in propagators[1:]]
        failed = [d for d in cptp if not d.passed]
        if failed:
            logger.warning("%d checkpoint propagators fail the CPTP check", len(failed))
    return EvolutionRecord(
        s_grid=checkpoints,
        propagators=propagators,
        segments=segments,
        substeps=steps,
        method=method.value,
        richardson_discrepancy=discrepancy,
        cptp=cptp,
    )


def propagate(
    family,
    T: float,
    config: Optional[PropagatorConfig] = None,
    checkpoints: Optional[Sequence[float]] = None,
) -> EvolutionRecord:
    """E(s_k, 0) at every checkpoint (default: s = 1) for E' = T L(s) E."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    return _evolve_generator(family.liouvillian_batch, T, _checkpoint_grid(checkpoints), config)


# ============================================================================
# Ideal adiabatic evolution
# ============================================================================


def initial_state(family) -> np.ndarray:
    """The family's preferred state, else the maximally mixed state projected on Ker L(0)."""
    rho = family.initial_state()
    if rho is None:
        rho = kernel_state(zero_projector(family.liouvillian(0.0)), family.dim)
    return as_density_matrix(rho)


def projector_path(family, grid: np.ndarray) -> np.ndarray:
    """Zero projectors P(s) on a grid."""
    grid = np.asarray(grid, dtype=float)
    generators = family.liouvillian_batch(grid)
    out = np.empty_like(generators)
    for k, (s, L) in enumerate(zip(grid, generators)):
        try:
            out[k] = zero_projector(L)
        except (AdiakitError, linalg.LinAlgError) as exc:
            raise ProjectorFailureError(float(s), exc) from exc
    return out


def _euler_grid(s: float, steps: Optional[int]) -> tuple[np.ndarray, int]:
    N = steps if steps is not None else get_settings().euler_steps
    if N < 1:
        raise ValueError("the Euler product needs at least one step")
    return np.linspace(0.0, s, 2 * N + 1), N


def intertwiner_euler(family, s: float, steps: Optional[int] = None, extrapolate: bool = True) -> np.ndarray:
    """W(s) as the limit of P(s) ... P(2s/N) P(s/N) P(0).

    With extrapolate, returns the Richardson combination 2 W_{2N} - W_N.
    """
    grid, N = _euler_grid(s, steps)
    P = projector_path(family, grid)
    fine = ordered_product(P)
    if not extrapolate:
        return fine
    coarse = ordered_product(P[::2])
    return 2.0 * fine - coarse


def ideal_state(family, s: float = 1.0, steps: Optional[int] = None, rho0: Optional[np.ndarray] = None) -> np.ndarray:
    """W(s) rho(0), with the Euler product applied to the state vector."""
    rho0 = initial_state(family) if rho0 is None else rho0
    grid, N = _euler_grid(s, steps)
    P = projector_path(family, grid)
    v0 = vectorize(rho0)
    fine = v0
    for Pk in P:
        fine = Pk @ fine
    coarse = v0
    for Pk in P[::2]:
        coarse = Pk @ coarse
    rho = devectorize(2.0 * fine - coarse, family.dim)
    return 0.5 * (rho + rho.conj().T)


def ideal_states(family, points: Sequence[float], steps: Optional[int] = None, rho0: Optional[np.ndarray] = None) -> np.ndarray:
    rho0 = initial_state(family) if rho0 is None else rho0
    return np.stack([ideal_state(family, s, steps, rho0) for s in points])


def transport_generator(family, sigma: float) -> np.ndarray:
    """[P', P] at sigma."""
    st = local_structure(family, sigma)
    dL = liouvillian_derivative(family, sigma)
    dP = -st.P @ dL @ st.S - st.S @ dL @ st.P
    return dP @ st.P - st.P @ dP


def _transport(family, X0: np.ndarray, s_eval: Sequence[float], tolerance: Optional[float]) -> np.ndarray:
    """Solve X' = [P', P] X from X(0) = X0 and return X at every s_eval."""
    tol = get_settings().ode_tol if tolerance is None else tolerance
    s_eval = np.asarray(s_eval, dtype=float)
    X0 = np.asarray(X0, dtype=complex)
    D = X0.shape[0]
    size = D * D
    s_end = float(s_eval.max())
    if s_end == 0.0:
        return np.broadcast_to(X0, (len(s_eval), D, D)).copy()

    def rhs(sigma: float, y: np.ndarray) -> np.ndarray:
        X = (y[:size] + 1j * y[size:]).reshape(D, D)
        dX = transport_generator(family, sigma) @ X
        return np.concatenate([dX.real.ravel(), dX.imag.ravel()])

    y0 = np.concatenate([X0.real.ravel(), X0.imag.ravel()])
    sol = solve_ivp(rhs, (0.0, s_end), y0, method="DOP853", t_eval=s_eval, rtol=tol, atol=tol)
    if not sol.success:
        raise NonConvergenceError(f"intertwiner integration failed: {sol.message}")
    Y = sol.y.T
    return (Y[:, :size] + 1j * Y[:, size:]).reshape(len(s_eval), D, D)


def intertwiner_ode(family, s: float, tolerance: Optional[float] = None) -> np.ndarray:
    """W(s) from W' = [P', P] W with W(0) = P(0)."""
    P0 = local_structure(family, 0.0).P
    return _transport(family, P0, [s], tolerance)[0]


def intertwiner_path(family, s_values: Sequence[float], tolerance: Optional[float] = None) -> np.ndarray:
    """W(s) at increasing s_values from a single integration."""
    P0 = local_structure(family, 0.0).P
    return _transport(family, P0, s_values, tolerance)


def intertwiner_v(family, s: float, tolerance: Optional[float] = None) -> np.ndarray:
    """V(s) from V' = [P', P] V with V(0) = 1."""
    D = family.dim**2
    return _transport(family, np.eye(D, dtype=complex), [s], tolerance)[0]


def rank_one_intertwiner(rho_0: np.ndarray, rho_s: np.ndarray) -> np.ndarray:
    """V = 1 + (|rho_s> - |rho_0>) <1| for rank-one kernels."""
    d = rho_0.shape[0]
    return np.eye(d * d, dtype=complex) + np.outer(vectorize(rho_s - rho_0), trace_row(d))


def _rank_one_kernel_state(family, s: float) -> np.ndarray:
    st = local_structure(family, s, require_gap=False)
    if st.zero_multiplicity != 1:
        raise DegenerateKernelError(st.zero_multiplicity)
    return kernel_state(st.P, family.dim)


def v_nonpositivity_witness(family, s: float = 1.0) -> WitnessRecord:
    """A state x0 with V(s) x0 not positive, for a rank-one kernel that moves."""
    d = family.dim
    rho_0 = _rank_one_kernel_state(family, 0.0)
    rho_s = _rank_one_kernel_state(family, s)
    delta = rho_s - rho_0
    w, U = np.linalg.eigh(0.5 * (delta + delta.conj().T))
    alpha = -float(w[0])
    if alpha <= get_settings().density_tol:
        raise DegenerateCaseError(f"steady state at s={s} equals the one at s=0; no witness exists")
    perp = U[:, -1]
    lam = 0.5 * min(alpha * d, 1.0)
    x0 = lam / d * np.eye(d) + (1.0 - lam) * np.outer(perp, perp.conj())
    image = apply_superop(rank_one_intertwiner(rho_0, rho_s), x0)
    negative = float(np.linalg.eigvalsh(0.5 * (image + image.conj().T))[0])
    return WitnessRecord(x0=x0, negative_eigenvalue=negative, predicted=lam / d - alpha, lam=lam, alpha=alpha)


# ============================================================================
# Adiabatic error
# ============================================================================


def error_points(grid: Optional[Sequence[float]] = None) -> list[float]:
    """Sorted evaluation points, always ending at s = 1."""
    return sorted({1.0, *(float(s) for s in (grid or []))})


def measure_error(
    family,
    T: float,
    config: Optional[PropagatorConfig] = None,
    points: Optional[Sequence[float]] = None,
    ideals: Optional[np.ndarray] = None,
    rho0: Optional[np.ndarray] = None,
) -> ErrorSample:
    """||E(s, 0) rho(0) - W(s) rho(0)||_1 at s = 1 and at any extra points."""
    points = error_points(points)
    rho0 = initial_state(family) if rho0 is None else rho0
    if ideals is None:
        ideals = ideal_states(family, points, rho0=rho0)
    record = propagate(family, T, config, checkpoints=points)
    v0 = vectorize(rho0)
    errors = [trace_norm(devectorize(record.at(s) @ v0, family.dim) - ideal) for s, ideal in zip(points, ideals)]
    return ErrorSample(
        T=T,
        error=errors[-1],
        substeps=record.substeps,
        richardson_discrepancy=record.richardson_discrepancy,
        grid_errors=errors[:-1] if len(points) > 1 else None,
    )


def adiabatic_error(family, T: float, config: Optional[PropagatorConfig] = None, grid: Optional[Sequence[float]] = None) -> float:
    """Trace-norm distance between the evolved and the ideal state at s = 1."""
    return measure_error(family, T, config, points=grid).error
