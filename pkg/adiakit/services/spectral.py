"""Spectral structure of superoperators: zero projector, gap, reduced resolvent.

Also hosts the derivative identities for P and S along a family, the X_n
recursion and the induced trace norm estimator used by the bounds.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg
from scipy.optimize import linear_sum_assignment, minimize
from scipy.sparse.csgraph import connected_components

from adiakit.config import get_settings
from adiakit.exceptions import (
    BoundaryStencilWarning,
    DefectiveMatrixError,
    EmptyKernelError,
    GapTooSmallError,
    OrderTooHighError,
    SingularShiftError,
    UnsupportedFamilyError,
)
from adiakit.models.records import SpectralData
from adiakit.models.schemas import GapReport, NormEstimate
from adiakit.services.superop import devectorize, superop_dim, vectorize

logger = logging.getLogger(__name__)


# ============================================================================
# Eigenstructure
# ============================================================================


def _spectral_scale(eigenvalues: np.ndarray) -> float:
    radius = float(np.max(np.abs(eigenvalues), initial=0.0))
    return radius if radius > 0.0 else 1.0


def _riesz_zero_projector(M: np.ndarray, threshold: float) -> tuple[np.ndarray, int]:
    """Projector onto the invariant subspace of eigenvalues with |lambda| <= threshold.

    Built from an ordered Schur form, so a nilpotent part inside the zero
    block still yields the correct (oblique) spectral projector.
    """
    n = M.shape[0]
    T, Z, k = linalg.schur(M, output="complex", sort=lambda x: abs(x) <= threshold)
    if k == 0:
        return np.zeros_like(M), 0
    if k == n:
        return np.eye(n, dtype=complex), n
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    X = linalg.solve_sylvester(T11, -T22, -T12)
    block = np.zeros((n, n), dtype=complex)
    block[:k, :k] = np.eye(k)
    block[:k, k:] = -X
    return Z @ block @ Z.conj().T, k


def decompose(
    M: np.ndarray, zero_tol: Optional[float] = None, cluster_tol: Optional[float] = None
) -> SpectralData:
    """Cluster the spectrum of M and build biorthonormal spectral projectors."""
    settings = get_settings()
    zero_tol = settings.zero_tol if zero_tol is None else zero_tol
    cluster_tol = settings.cluster_tol if cluster_tol is None else cluster_tol
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]

    w, vl, vr = linalg.eig(M, left=True, right=True)
    scale = _spectral_scale(w)
    P0, k = _riesz_zero_projector(M, zero_tol * scale)

    by_modulus = np.argsort(np.abs(w), kind="stable")
    rest = by_modulus[k:]

    eigenvalues: list[complex] = []
    multiplicities: list[int] = []
    rights: list[np.ndarray] = []
    lefts: list[np.ndarray] = []
    projectors: list[np.ndarray] = []
    zero_index: Optional[int] = None
    if k:
        zero_index = 0
        eigenvalues.append(0j)
        multiplicities.append(k)
        # R spans range(P0) orthonormally; L^dag = R^dag P0 gives L^dag R = 1 and R L^dag = P0
        R = np.linalg.svd(P0)[0][:, :k]
        rights.append(R)
        lefts.append((R.conj().T @ P0).conj().T)
        projectors.append(P0)

    if rest.size:
        wr = w[rest]
        adjacency = np.abs(wr[:, None] - wr[None, :]) <= cluster_tol * scale
        n_clusters, labels = connected_components(adjacency, directed=False)
        groups = [rest[labels == c] for c in range(n_clusters)]
        groups.sort(key=lambda g: (round(abs(w[g].mean()), 12), w[g].mean().imag, w[g].mean().real))
        for members in groups:
            R = vr[:, members]
            Lh = vl[:, members].conj().T
            G = Lh @ R
            if np.linalg.cond(G) > 1e12:
                raise DefectiveMatrixError(
                    float("inf"),
                    f"eigenvalue cluster near {w[members].mean():.6g} is defective",
                )
            Lh = np.linalg.solve(G, Lh)
            eigenvalues.append(complex(w[members].mean()))
            multiplicities.append(len(members))
            rights.append(R)
            lefts.append(Lh.conj().T)
            projectors.append(R @ Lh)

    reconstruction = M @ P0 + sum(
        (lam * Pj for lam, Pj in zip(eigenvalues, projectors) if lam != 0j),
        np.zeros((n, n), dtype=complex),
    )
    residual = float(np.linalg.norm(M - reconstruction, 2))
    if residual > settings.reconstruction_tol * scale:
        raise DefectiveMatrixError(residual)

    return SpectralData(
        eigenvalues=np.array(eigenvalues, dtype=complex),
        multiplicities=multiplicities,
        right_vectors=rights,
        left_vectors=lefts,
        projectors=projectors,
        zero_index=zero_index,
        scale=scale,
        residual=residual,
    )


def split_zero_cluster(eigenvalues: np.ndarray, zero_tol: Optional[float] = None) -> tuple[int, float, float]:
    """(zero multiplicity, gap, spectral scale) of a list of eigenvalues."""
    zero_tol = get_settings().zero_tol if zero_tol is None else zero_tol
    moduli = np.sort(np.abs(np.asarray(eigenvalues)))
    scale = _spectral_scale(moduli)
    k = int(np.count_nonzero(moduli <= zero_tol * scale))
    gap = float(moduli[k]) if k < moduli.size else float("inf")
    return k, gap, scale


def track_eigenvalues(spectra: np.ndarray) -> np.ndarray:
    """Reorder each row of eigenvalues to continue the previous row's tracks."""
    spectra = np.asarray(spectra)
    tracks = spectra.copy()
    for k in range(1, len(tracks)):
        cost = np.abs(tracks[k - 1][:, None] - spectra[k][None, :])
        _, columns = linear_sum_assignment(cost)
        tracks[k] = spectra[k][columns]
    return tracks


def zero_projector(M: np.ndarray, zero_tol: Optional[float] = None) -> np.ndarray:
    """Spectral projector of M for the eigenvalue zero."""
    zero_tol = get_settings().zero_tol if zero_tol is None else zero_tol
    M = np.asarray(M, dtype=complex)
    scale = _spectral_scale(np.linalg.eigvals(M))
    P, k = _riesz_zero_projector(M, zero_tol * scale)
    if k == 0:
        raise EmptyKernelError("no eigenvalue within zero_tol of zero")
    return P


def semisimplicity_defect(M: np.ndarray, P: np.ndarray) -> float:
    """Spectral norm of M P, the nilpotent part of the zero block."""
    return float(np.linalg.norm(np.asarray(M) @ np.asarray(P), 2))


def reduced_resolvent(M: np.ndarray, P: np.ndarray) -> np.ndarray:
    """S = (M + P)^-1 - P, the inverse of M on the range of Q = 1 - P."""
    A = np.asarray(M, dtype=complex) + P
    condition = float(np.linalg.cond(A))
    if not np.isfinite(condition) or condition > get_settings().singular_shift_cond:
        raise SingularShiftError(condition)
    return np.linalg.solve(A, np.eye(A.shape[0])) - P


def reduced_resolvent_from_spectrum(data: SpectralData) -> np.ndarray:
    """S as the eigenprojector sum over nonzero clusters, sum_j P_j / lambda_j."""
    n = data.projectors[0].shape[0]
    S = np.zeros((n, n), dtype=complex)
    for j in data.nonzero:
        S += data.projectors[j] / data.eigenvalues[j]
    return S


def kernel_state(P: np.ndarray, dim: Optional[int] = None) -> np.ndarray:
    """Normalized image of the maximally mixed state under P."""
    d = dim if dim is not None else superop_dim(P)
    rho = devectorize(P @ vectorize(np.eye(d) / d), d)
    trace = np.trace(rho)
    if abs(trace) < 1e-12:
        raise EmptyKernelError("projector annihilates the maximally mixed state")
    rho = rho / trace
    return 0.5 * (rho + rho.conj().T)


# ============================================================================
# Local structure along a family
# ============================================================================


@dataclass(frozen=True)
class LocalStructure:
    s: float
    L: np.ndarray
    P: np.ndarray
    S: Optional[np.ndarray]
    gap: float
    zero_multiplicity: int
    scale: float


def local_structure(family, s: float, require_gap: bool = True) -> LocalStructure:
    """L, P, S and the gap at s; raises GapTooSmallError when required."""
    settings = get_settings()
    L = family.liouvillian(s)
    w = np.linalg.eigvals(L)
    scale = _spectral_scale(w)
    P, k = _riesz_zero_projector(L, settings.zero_tol * scale)
    if k == 0:
        raise EmptyKernelError(f"no zero eigenvalue at s={s}")
    moduli = np.sort(np.abs(w))
    gap = float(moduli[k]) if k < moduli.size else float("inf")
    threshold = settings.gap_threshold * scale
    if gap < threshold:
        if require_gap:
            raise GapTooSmallError(s, gap, threshold)
        return LocalStructure(s, L, P, None, gap, k, scale)
    return LocalStructure(s, L, P, reduced_resolvent(L, P), gap, k, scale)


def gap_report(family, s: float) -> GapReport:
    st = local_structure(family, s, require_gap=False)
    return GapReport(
        s=s,
        gap=st.gap if np.isfinite(st.gap) else 0.0,
        zero_multiplicity=st.zero_multiplicity,
        semisimple_defect=semisimplicity_defect(st.L, st.P),
    )


def finite_difference(
    fn: Callable[[float], np.ndarray], s: float, h: float, lo: float = 0.0, hi: float = 1.0
) -> np.ndarray:
    """Central difference, or a second-order one-sided stencil at the ends of [lo, hi]."""
    if s - h >= lo and s + h <= hi:
        return (fn(s + h) - fn(s - h)) / (2.0 * h)
    warnings.warn(
        f"one-sided difference at s={s} (step {h})", BoundaryStencilWarning, stacklevel=2
    )
    if s - h < lo:
        return (-3.0 * fn(s) + 4.0 * fn(s + h) - fn(s + 2.0 * h)) / (2.0 * h)
    return (3.0 * fn(s) - 4.0 * fn(s - h) + fn(s - 2.0 * h)) / (2.0 * h)


def liouvillian_derivative(family, s: float, scheme: str = "auto", h: Optional[float] = None) -> np.ndarray:
    """L'(s): analytic when the family supplies it, else central differences."""
    if scheme not in ("auto", "analytic", "fd"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme != "fd":
        analytic = family.liouvillian_derivative(s)
        if analytic is not None:
            return analytic
        if scheme == "analytic":
            raise UnsupportedFamilyError(f"{family.name} has no analytic derivative")
    h = get_settings().fd_step if h is None else h
    return finite_difference(family.liouvillian, s, h)


def projector_derivative(family, s: float) -> np.ndarray:
    """P' = -P L' S - S L' P (first-order perturbation theory)."""
    st = local_structure(family, s)
    dL = liouvillian_derivative(family, s)
    return -st.P @ dL @ st.S - st.S @ dL @ st.P


def projector_second_derivative(family, s: float, h: Optional[float] = None) -> np.ndarray:
    h = get_settings().fd_step if h is None else h
    return finite_difference(lambda t: projector_derivative(family, t), s, h)


def resolvent_derivative(family, s: float) -> np.ndarray:
    """S' = S^2 L' P + P L' S^2 - S L' S."""
    st = local_structure(family, s)
    dL = liouvillian_derivative(family, s)
    S2 = st.S @ st.S
    return S2 @ dL @ st.P + st.P @ dL @ S2 - st.S @ dL @ st.S


def resolvent_derivative_fd(family, s: float, h: Optional[float] = None) -> np.ndarray:
    h = get_settings().fd_step if h is None else h
    return finite_difference(lambda t: local_structure(family, t).S, s, h)


def x_sequence(family, s: float, m: int) -> list[np.ndarray]:
    """[X_1(s), ..., X_m(s)] with X_1 = S and X_{n+1} = S X_n'.

    X_n' uses central differences with step x_base_step * 10**((n - 1) / 2).
    """
    settings = get_settings()
    if m < 1:
        raise ValueError("m must be at least 1")
    if m > settings.max_order:
        raise OrderTooHighError(m, settings.max_order)

    def x_at(order: int, sigma: float) -> np.ndarray:
        S = local_structure(family, sigma).S
        if order == 1:
            return S
        step = settings.x_base_step * 10.0 ** ((order - 2) / 2.0)
        return S @ finite_difference(lambda t: x_at(order - 1, t), sigma, step)

    return [x_at(n, s) for n in range(1, m + 1)]


# ============================================================================
# Induced trace norm
# ============================================================================


def _rank_one_images(M: np.ndarray, d: int, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """||M(|u><v|)||_1 for rows of U and V (unit vectors)."""
    vecs = (np.conj(V)[:, :, None] * U[:, None, :]).reshape(len(U), d * d)
    images = devectorize(vecs @ M.T, d)
    return np.linalg.svd(images, compute_uv=False).sum(axis=-1)


def _unpack(x: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    u = x[:d] + 1j * x[d : 2 * d]
    v = x[2 * d : 3 * d] + 1j * x[3 * d :]
    return u / max(np.linalg.norm(u), 1e-300), v / max(np.linalg.norm(v), 1e-300)


def _pack(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.concatenate([u.real, u.imag, v.real, v.imag])


def _random_unit(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    z = rng.normal(size=(count, d)) + 1j * rng.normal(size=(count, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _bloch_grid(theta_points: int = 13, phi_points: int = 24) -> np.ndarray:
    theta, phi = np.meshgrid(
        np.linspace(0.0, np.pi, theta_points),
        np.linspace(0.0, 2.0 * np.pi, phi_points, endpoint=False),
        indexing="ij",
    )
    theta, phi = theta.ravel(), phi.ravel()
    return np.stack([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], axis=1)


def _polish(M: np.ndarray, d: int, u: np.ndarray, v: np.ndarray, iterations: int) -> float:
    def objective(x: np.ndarray) -> float:
        uu, vv = _unpack(x, d)
        return -float(_rank_one_images(M, d, uu[None, :], vv[None, :])[0])

    result = minimize(objective, _pack(u, v), method="L-BFGS-B", options={"maxiter": iterations})
    return -float(result.fun)


def induced_trace_norm(
    M: np.ndarray,
    restarts: Optional[int] = None,
    iterations: Optional[int] = None,
    seed: Optional[int] = None,
    certify: bool = True,
) -> NormEstimate:
    """Lower-bound estimate of sup ||M(x)||_1 / ||x||_1 over rank-one x = |u><v|."""
    settings = get_settings()
    restarts = settings.norm_restarts if restarts is None else restarts
    iterations = settings.norm_iterations if iterations is None else iterations
    seed = settings.seed if seed is None else seed
    M = np.asarray(M, dtype=complex)
    d = superop_dim(M)
    rng = np.random.default_rng(seed)

    eye = np.eye(d, dtype=complex)
    basis_u = np.repeat(eye, d, axis=0)
    basis_v = np.tile(eye, (d, 1))
    U = np.vstack([basis_u, _random_unit(rng, settings.norm_samples, d)])
    V = np.vstack([basis_v, _random_unit(rng, settings.norm_samples, d)])
    values = _rank_one_images(M, d, U, V)
    best = float(values.max())
    for i in np.argsort(values)[::-1][:restarts]:
        best = max(best, _polish(M, d, U[i], V[i], iterations))

    certified = False
    if certify and d <= 4:
        if d == 2:
            grid = _bloch_grid()
            Ud = np.repeat(grid, len(grid), axis=0)
            Vd = np.tile(grid, (len(grid), 1))
        else:
            Ud = _random_unit(rng, 20000, d)
            Vd = _random_unit(rng, 20000, d)
        dense = _rank_one_images(M, d, Ud, Vd)
        i = int(np.argmax(dense))
        refined = max(float(dense[i]), _polish(M, d, Ud[i], Vd[i], iterations))
        certified = abs(refined - best) < settings.norm_certify_tol * max(1.0, best)
        logger.debug("induced norm %.10g, dense refinement %.10g", best, refined)
        best = max(best, refined)
    return NormEstimate(value=best, certified=certified)
