"""Adiabatic bounds: the constant C, expansion terms, thermal P' bound, crossings and fits."""

import logging
import math
import warnings
from typing import Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from adiakit.config import get_settings
from adiakit.exceptions import (
    BoundaryStencilWarning,
    DegenerateKernelError,
    InsufficientDataError,
    OrderTooHighError,
    UnsupportedFamilyError,
)
from adiakit.models.schemas import (
    BoundReport,
    Crossing,
    CrossingReport,
    PowerLawFit,
    PPrimeSample,
    PropagatorConfig,
    SweepResult,
    SweepRow,
    TimeEstimate,
)
from adiakit.services.davies import gibbs_derivative, gibbs_state
from adiakit.services.propagate import _evolve_generator, intertwiner_ode, intertwiner_path
from adiakit.services.spectral import (
    finite_difference,
    induced_trace_norm,
    liouvillian_derivative,
    local_structure,
    projector_derivative,
    projector_second_derivative,
    resolvent_derivative,
    split_zero_cluster,
    x_sequence,
)
from adiakit.services.superop import check_hermitian, trace_norm

logger = logging.getLogger(__name__)


# ============================================================================
# The constant C
# ============================================================================


def _sup_integrand(family, sigma: float) -> np.ndarray:
    """S' P' + S P'' at sigma."""
    st = local_structure(family, sigma)
    return resolvent_derivative(family, sigma) @ projector_derivative(family, sigma) + st.S @ projector_second_derivative(family, sigma)


def constant_C(
    family, s: float = 1.0, grid_points: Optional[int] = None, seed: Optional[int] = None
) -> BoundReport:
    """C = ||S(s)|| ||P'(s)|| + ||S(0)|| ||P'(0)|| + sup ||S' P' + S P''||.

    The supremum is taken over a uniform grid on [0, s] and refined by a
    bounded scalar search between the neighbours of the grid maximum.
    """
    settings = get_settings()
    n = grid_points or settings.sup_grid_points
    grid = np.linspace(0.0, s, n)

    def norm(M: np.ndarray, certify: bool = False):
        return induced_trace_norm(M, seed=seed, certify=certify)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryStencilWarning)
        structures = [local_structure(family, float(x)) for x in grid]
        gap_min = min(st.gap for st in structures)
        resolvent_gap = max(norm(st.S).value * st.gap for st in structures if math.isfinite(st.gap))

        values = np.array([norm(_sup_integrand(family, float(x))).value for x in grid])
        i = int(np.argmax(values))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
        sup_location = float(grid[i])
        if hi > lo:
            refined = minimize_scalar(
                lambda x: -norm(_sup_integrand(family, float(x))).value,
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1e-6 * (hi - lo)},
            )
            if -refined.fun > values[i]:
                sup_location = float(refined.x)
        sup_norm = norm(_sup_integrand(family, sup_location), certify=True)

        end = structures[-1]
        start = structures[0]
        S_end, dP_end = norm(end.S, True), norm(projector_derivative(family, s), True)
        S_start, dP_start = norm(start.S, True), norm(projector_derivative(family, 0.0), True)

    contributions = [
        S_end.value * dP_end.value,
        S_start.value * dP_start.value,
        max(sup_norm.value, float(values.max())),
    ]
    certified = all(e.certified for e in (sup_norm, S_end, dP_end, S_start, dP_start))
    logger.info(
        "C = %.6g (terms %.4g, %.4g, %.4g; sup at s=%.4f; certified=%s)",
        sum(contributions), *contributions, sup_location, certified,
    )
    return BoundReport(
        C=sum(contributions),
        contributions=contributions,
        norm_estimator_certified=certified,
        s=s,
        s_grid=[float(x) for x in grid],
        sup_location=sup_location,
        gap_min=gap_min,
        resolvent_gap_constant=resolvent_gap,
    )


# ============================================================================
# Expansion terms
# ============================================================================


def _intertwiner_data(family, nodes: np.ndarray, rank: int) -> tuple[np.ndarray, np.ndarray]:
    """W' and W'' on the nodes; W = P when the kernel has rank one."""
    dP = np.stack([projector_derivative(family, float(x)) for x in nodes])
    d2P = np.stack([projector_second_derivative(family, float(x)) for x in nodes])
    if rank == 1:
        return dP, d2P
    W = intertwiner_path(family, nodes)
    return dP @ W, (d2P + dP @ dP) @ W


def _expansion(family, s: float, T: float, m: int, config: Optional[PropagatorConfig]):
    settings = get_settings()
    if m < 1:
        raise ValueError("m must be at least 1")
    if m > settings.max_order:
        raise OrderTooHighError(m, settings.max_order)
    rank = local_structure(family, 0.0).zero_multiplicity
    if rank > 1 and m > 1:
        raise DegenerateKernelError(rank)

    nodes = np.linspace(0.0, s, settings.expansion_nodes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryStencilWarning)
        dW, d2W = _intertwiner_data(family, nodes, rank)
        X = [x_sequence(family, float(x), m) for x in nodes]
    D = dW.shape[-1]

    splines = []
    for order in range(m):
        F = np.stack([X[k][order] @ d2W[k] for k in range(len(nodes))])
        splines.append((CubicSpline(nodes, F.real, axis=0), CubicSpline(nodes, F.imag, axis=0)))

    def augmented(sigma: np.ndarray) -> np.ndarray:
        # [[L, F_1/T, ..., F_m/T], [0, 0]]: the top-right blocks accumulate int E(s, .) F_n
        sigma = np.asarray(sigma, dtype=float)
        A = np.zeros((len(sigma), D * (m + 1), D * (m + 1)), dtype=complex)
        A[:, :D, :D] = family.liouvillian_batch(sigma)
        for order, (re, im) in enumerate(splines):
            A[:, :D, D * (order + 1) : D * (order + 2)] = (re(sigma) + 1j * im(sigma)) / T
        return A

    record = _evolve_generator(augmented, T, np.array([0.0, s]), config, diagnose=False)
    Z = record.final
    E = Z[:D, :D]
    omegas = []
    for order in range(m):
        integral = Z[:D, D * (order + 1) : D * (order + 2)]
        boundary = X[-1][order] @ dW[-1] - E @ X[0][order] @ dW[0]
        omegas.append(boundary - integral)
    return omegas, E, rank


def expansion_terms(
    family, s: float, T: float, m: int = 1, config: Optional[PropagatorConfig] = None
) -> list[np.ndarray]:
    """[Omega_1, ..., Omega_m] with [E(s) - V(s)] P(0) = sum Omega_n / T^n + O(T^-(m+1))."""
    return _expansion(family, s, T, m, config)[0]


def expansion_residual(
    family, s: float, T: float, m: int = 1, config: Optional[PropagatorConfig] = None
) -> float:
    """||E(s, 0) P(0) - W(s) - sum_n Omega_n / T^n||_2."""
    omegas, E, rank = _expansion(family, s, T, m, config)
    P0 = local_structure(family, 0.0).P
    W = local_structure(family, s).P if rank == 1 else intertwiner_ode(family, s)
    remainder = E @ P0 - W - sum(omega / T ** (n + 1) for n, omega in enumerate(omegas))
    return float(np.linalg.norm(remainder, 2))


# ============================================================================
# Thermal estimates
# ============================================================================


def kms_pprime_bound(H_prime: np.ndarray, rho_G: np.ndarray, beta: float) -> float:
    """2 beta sqrt(Tr[rho_G H'^2]), an upper bound on ||rho_G'||_1."""
    H_prime = check_hermitian(H_prime, name="H'")
    second_moment = float(np.trace(np.asarray(rho_G) @ H_prime @ H_prime).real)
    return 2.0 * beta * math.sqrt(max(second_moment, 0.0))


def _thermal_data(family, beta: Optional[float]):
    beta = family.beta if beta is None else beta
    if beta is None or family.hamiltonian(0.0) is None:
        raise UnsupportedFamilyError(f"{family.name} has no Hamiltonian and temperature")
    return beta


def _hamiltonian_derivative(family, s: float) -> np.ndarray:
    dH = family.hamiltonian_derivative(s)
    if dH is None:
        dH = finite_difference(family.hamiltonian, s, get_settings().fd_step)
    return dH


def gibbs_pprime_profile(family, grid: Optional[Sequence[float]] = None) -> list[PPrimeSample]:
    """The thermal bound against the finite-difference ||rho_G'(s)||_1 on a grid."""
    beta = _thermal_data(family, None)
    grid = np.linspace(0.0, 1.0, 20) if grid is None else np.asarray(grid, dtype=float)
    samples = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryStencilWarning)
        for s in grid:
            s = float(s)
            rho_G = gibbs_state(family.hamiltonian(s), beta)
            bound = kms_pprime_bound(_hamiltonian_derivative(family, s), rho_G, beta)
            measured = trace_norm(gibbs_derivative(family.hamiltonian, beta, s))
            samples.append(PPrimeSample(s=s, bound=bound, measured=measured))
    return samples


def adiabatic_time_estimate(
    family,
    s_grid: Optional[Sequence[float]] = None,
    beta: Optional[float] = None,
    epsilon: float = 1e-3,
) -> TimeEstimate:
    """T ~ c^2 beta ||L'||_max sqrt(<H'^2>_G,max) / (gap_min^2 epsilon), c = max ||S|| gap."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    beta = _thermal_data(family, beta)
    grid = np.linspace(0.0, 1.0, get_settings().sup_grid_points) if s_grid is None else np.asarray(s_grid, dtype=float)

    gap_min = math.inf
    c = 0.0
    lprime_max = 0.0
    h2_max = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryStencilWarning)
        for s in grid:
            s = float(s)
            st = local_structure(family, s)
            gap_min = min(gap_min, st.gap)
            c = max(c, induced_trace_norm(st.S, certify=False).value * st.gap)
            lprime_max = max(lprime_max, induced_trace_norm(liouvillian_derivative(family, s), certify=False).value)
            dH = _hamiltonian_derivative(family, s)
            rho_G = gibbs_state(family.hamiltonian(s), beta)
            h2_max = max(h2_max, float(np.trace(rho_G @ dH @ dH).real))

    T = c**2 * beta * lprime_max * math.sqrt(h2_max) / (gap_min**2 * epsilon)
    logger.info("sufficient T %.4g for epsilon=%.2g (gap_min %.3e, c %.3f)", T, epsilon, gap_min, c)
    return TimeEstimate(T=T, epsilon=epsilon, beta=beta, gap_min=gap_min, lprime_max=lprime_max, h2_max=h2_max, c=c)


# ============================================================================
# Level crossings
# ============================================================================


def _moduli(family, s_values: np.ndarray) -> np.ndarray:
    """Sorted eigenvalue moduli of L(s), one row per s."""
    return np.sort(np.abs(np.linalg.eigvals(family.liouvillian_batch(np.atleast_1d(s_values)))), axis=-1)


def crossing_scan(family, grid: Optional[Sequence[float]] = None) -> CrossingReport:
    """Locate points where a nonzero eigenvalue reaches zero and fit gap ~ v |s - s*|^alpha."""
    settings = get_settings()
    grid = np.linspace(0.0, 1.0, 201) if grid is None else np.asarray(grid, dtype=float)
    moduli = _moduli(family, grid)
    multiplicities = [split_zero_cluster(row)[0] for row in moduli]
    generic = int(np.median(multiplicities))
    closing = moduli[:, generic]
    median_gap = float(np.median(closing))
    threshold = settings.crossing_ratio * median_gap

    def mode(s: float) -> float:
        return float(_moduli(family, np.array([s]))[0, generic])

    n = len(grid)
    candidates = [
        i
        for i in range(n)
        if closing[i] < threshold
        and (i == 0 or closing[i] <= closing[i - 1])
        and (i == n - 1 or closing[i] <= closing[i + 1])
    ]

    crossings = []
    offsets = np.logspace(-3.0, math.log10(3e-2), 12)
    for i in candidates:
        s_star = float(grid[i])
        if multiplicities[i] <= generic:
            lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
            s_star = float(minimize_scalar(mode, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10}).x)
        points = [(d, mode(s_star + side * d)) for side in (-1.0, 1.0) for d in offsets if 0.0 <= s_star + side * d <= 1.0]
        points = [(d, g) for d, g in points if g > 0.0]
        if len(points) < 3:
            logger.warning("too few samples to fit the crossing at s=%.6f", s_star)
            continue
        x, y = np.log([p[0] for p in points]), np.log([p[1] for p in points])
        alpha, log_v = np.polyfit(x, y, 1)
        if alpha <= 0:
            logger.warning("non-closing gap profile at s=%.6f (alpha=%.3f)", s_star, alpha)
            continue
        crossings.append(Crossing(s_star=s_star, alpha=float(alpha), v=float(np.exp(log_v)), eta=1.0 / (1.0 + float(alpha))))
        logger.info("crossing at s=%.6f: alpha=%.4f, eta=%.4f", s_star, alpha, 1.0 / (1.0 + alpha))

    return CrossingReport(crossings=crossings, generic_multiplicity=generic, median_gap=median_gap, threshold=threshold)


# ============================================================================
# Power-law fits
# ============================================================================


def default_fit_window(T_values: Sequence[float]) -> tuple[float, float]:
    """Top fit_window_fraction of the ladder in log T."""
    logT = np.log10(np.asarray(T_values, dtype=float))
    fraction = get_settings().fit_window_fraction
    low = logT.max() - fraction * (logT.max() - logT.min())
    return float(10.0**low), float(10.0 ** logT.max())


def fit_power_law(
    sweep: Union[SweepResult, Sequence[SweepRow]], window: Optional[tuple[float, float]] = None
) -> PowerLawFit:
    """Least squares of log(error) against log(T) over the unflagged rows in the window."""
    rows = sweep.rows if isinstance(sweep, SweepResult) else list(sweep)
    rows = [row for row in rows if not row.flagged]
    if len(rows) < 4:
        raise InsufficientDataError(f"need at least 4 unflagged rows, got {len(rows)}")
    T = np.array([row.T for row in rows])
    error = np.array([row.error for row in rows])
    window = default_fit_window(T) if window is None else (float(window[0]), float(window[1]))
    inside = (T >= window[0] * (1 - 1e-9)) & (T <= window[1] * (1 + 1e-9))
    if inside.sum() < 4:
        raise InsufficientDataError(f"only {int(inside.sum())} rows inside the fit window {window}")
    if np.any(error[inside] <= 0):
        raise InsufficientDataError("errors must be positive for a log-log fit")
    x, y = np.log(T[inside]), np.log(error[inside])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((slope * x + intercept - y) ** 2)))
    return PowerLawFit(
        prefactor=float(np.exp(intercept)),
        exponent=float(-slope),
        window=window,
        residual=residual,
        points=int(inside.sum()),
    )
