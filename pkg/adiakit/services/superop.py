"""Vectorization, Lindblad superoperators and CPTP diagnostics.

Operators are column-stacked: entry (a, b) of a d x d matrix lands in slot
b*d + a of its vector, so that vec(A X B^dag) = (conj(B) kron A) vec(X).
Every builder accepts a single matrix or a stack of matrices (leading axes
are broadcast), which the propagators use to assemble thousands of
generators at once.
"""

from typing import Optional, Sequence

import numpy as np

from adiakit.config import get_settings
from adiakit.exceptions import DimensionMismatchError, NonHermitianInputError
from adiakit.models.schemas import CPTPDiagnostic


# ============================================================================
# Pauli algebra (sigma^z |0> = +|0>)
# ============================================================================

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
SIGMA_PLUS = SIGMA_MINUS.T.copy()
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def pauli_vector(m) -> np.ndarray:
    """m . sigma for a 3-vector, or a stack of them with shape (..., 3)."""
    m = np.asarray(m, dtype=float)
    return np.einsum("...k,kij->...ij", m, np.stack(PAULIS))


# ============================================================================
# Vectorization
# ============================================================================


def vectorize(X: np.ndarray) -> np.ndarray:
    """Column-stack a d x d operator (or a stack of them) into d^2 vectors."""
    X = np.asarray(X)
    d = X.shape[-1]
    return np.swapaxes(X, -1, -2).reshape(X.shape[:-2] + (d * d,))


def devectorize(v: np.ndarray, dim: Optional[int] = None) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    v = np.asarray(v)
    n = v.shape[-1]
    d = dim if dim is not None else int(round(np.sqrt(n)))
    if d * d != n:
        raise DimensionMismatchError(f"vector of length {n} is not a vectorized operator")
    return np.swapaxes(v.reshape(v.shape[:-1] + (d, d)), -1, -2)


def superop_dim(M: np.ndarray) -> int:
    """Hilbert-space dimension d of a d^2 x d^2 superoperator."""
    n = M.shape[-1]
    d = int(round(np.sqrt(n)))
    if d * d != n or M.shape[-2] != n:
        raise DimensionMismatchError(f"shape {M.shape} is not a superoperator")
    return d


def _kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kronecker product broadcast over leading axes."""
    A = np.asarray(A)
    B = np.asarray(B)
    out = np.einsum("...ij,...kl->...ikjl", A, B)
    n = A.shape[-2] * B.shape[-2]
    m = A.shape[-1] * B.shape[-1]
    return out.reshape(out.shape[:-4] + (n, m))


def spre(A: np.ndarray) -> np.ndarray:
    """Superoperator of X -> A X."""
    return _kron(np.eye(A.shape[-1]), A)


def spost(B: np.ndarray) -> np.ndarray:
    """Superoperator of X -> X B."""
    return _kron(np.swapaxes(B, -1, -2), np.eye(B.shape[-1]))


def sprepost(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Superoperator of X -> A X B."""
    return _kron(np.swapaxes(B, -1, -2), A)


def conjugation_superop(U: np.ndarray) -> np.ndarray:
    """Superoperator of X -> U X U^dag."""
    return _kron(np.conj(U), U)


def dagger(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


# ============================================================================
# Validation helpers
# ============================================================================


def check_finite(A: np.ndarray, name: str = "operator") -> np.ndarray:
    A = np.asarray(A)
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def check_hermitian(A: np.ndarray, tol: Optional[float] = None, name: str = "operator") -> np.ndarray:
    """Raise NonHermitianInputError unless max|A - A^dag| <= tol * max|A|."""
    A = check_finite(np.asarray(A, dtype=complex), name)
    tol = get_settings().hermitian_tol if tol is None else tol
    scale = float(np.max(np.abs(A), initial=0.0))
    deviation = float(np.max(np.abs(A - dagger(A)), initial=0.0))
    if deviation > tol * max(scale, np.finfo(float).tiny):
        raise NonHermitianInputError(name, deviation, tol)
    return A


def as_density_matrix(X: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    """Validate a density matrix: hermitian, unit trace, positive within tol."""
    tol = get_settings().density_tol if tol is None else tol
    X = check_finite(np.asarray(X, dtype=complex), "density matrix")
    if np.max(np.abs(X - dagger(X)), initial=0.0) > tol:
        raise NonHermitianInputError("density matrix", float(np.max(np.abs(X - dagger(X)))), tol)
    trace = np.trace(X).real
    if abs(trace - 1.0) > tol:
        raise ValueError(f"density matrix has trace {trace:.12f}")
    smallest = float(np.linalg.eigvalsh(0.5 * (X + dagger(X)))[0])
    if smallest < -tol:
        raise ValueError(f"density matrix has eigenvalue {smallest:.3e}")
    return X


def trace_norm(X: np.ndarray) -> float:
    """Sum of singular values."""
    return float(np.sum(np.linalg.svd(np.asarray(X), compute_uv=False)))


def apply_superop(M: np.ndarray, X: np.ndarray) -> np.ndarray:
    d = X.shape[-1]
    return devectorize(M @ vectorize(X), d)


# ============================================================================
# Lindblad generators
# ============================================================================


def hamiltonian_superop(H: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    """K with K vec(rho) = vec(-i[H, rho])."""
    H = check_hermitian(H, tol, "Hamiltonian")
    return -1j * (spre(H) - spost(H))


def _single_dissipator(L: np.ndarray) -> np.ndarray:
    LdL = dagger(L) @ L
    return sprepost(L, dagger(L)) - 0.5 * spre(LdL) - 0.5 * spost(LdL)


def dissipator_superop(lindblad_ops: Sequence[np.ndarray], dim: Optional[int] = None) -> np.ndarray:
    """Sum over L of L . L^dag - 1/2 {L^dag L, .}.

    An empty list gives the zero superoperator of dimension `dim`, which is
    then required; with operators present `dim` is only checked.
    """
    ops = [check_finite(np.asarray(L, dtype=complex), "Lindblad operator") for L in lindblad_ops]
    if not ops:
        if dim is None:
            raise DimensionMismatchError("empty operator list needs an explicit dimension")
        return np.zeros((dim * dim, dim * dim), dtype=complex)
    d = ops[0].shape[-1]
    if dim is not None and dim != d:
        raise DimensionMismatchError(f"operators are {d}x{d}, expected {dim}x{dim}")
    for L in ops:
        if L.shape[-2:] != (d, d):
            raise DimensionMismatchError(f"Lindblad operator of shape {L.shape} is not {d}x{d}")
    return sum(_single_dissipator(L) for L in ops)


def dissipator_derivative(
    lindblad_ops: Sequence[np.ndarray], derivatives: Sequence[np.ndarray], dim: int
) -> np.ndarray:
    """s-derivative of dissipator_superop given L_l(s) and L_l'(s)."""
    if len(lindblad_ops) != len(derivatives):
        raise DimensionMismatchError("each Lindblad operator needs one derivative")
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for L, dL in zip(lindblad_ops, derivatives):
        cross = dagger(dL) @ L + dagger(L) @ dL
        out = out + sprepost(dL, dagger(L)) + sprepost(L, dagger(dL))
        out = out - 0.5 * spre(cross) - 0.5 * spost(cross)
    return out


def lindbladian(H: np.ndarray, lindblad_ops: Sequence[np.ndarray], tol: Optional[float] = None) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    return hamiltonian_superop(H, tol) + dissipator_superop(lindblad_ops, dim=H.shape[-1])


def assemble_liouvillian(family, s: float) -> np.ndarray:
    """L(s) of a Liouvillian family."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s={s} is outside [0, 1]")
    return family.liouvillian(s)


# ============================================================================
# Channel diagnostics
# ============================================================================


def choi_matrix(M: np.ndarray) -> np.ndarray:
    """Choi matrix sum_ij |i><j| kron M(|i><j|)."""
    d = superop_dim(M)
    # M[b*d + a, j*d + i] = <a| M(|i><j|) |b>
    return M.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d * d, d * d)


def trace_row(d: int) -> np.ndarray:
    """<1| as a row vector: <1| vec(X) = Tr X."""
    return vectorize(np.eye(d)).astype(complex)


def is_cptp(M: np.ndarray, tol: float = 1e-8) -> CPTPDiagnostic:
    d = superop_dim(M)
    choi = choi_matrix(M)
    eigenvalues = np.linalg.eigvalsh(0.5 * (choi + dagger(choi)))
    cp_violation = max(0.0, -float(eigenvalues[0]))
    one = trace_row(d)
    tp_violation = float(np.linalg.norm(one @ M - one))
    return CPTPDiagnostic(
        cp_violation=cp_violation,
        tp_violation=tp_violation,
        tol=tol,
        passed=cp_violation <= tol and tp_violation <= tol,
    )


def hermiticity_preservation_defect(M: np.ndarray, samples: int = 8, seed: int = 0) -> float:
    """Max anti-hermitian part of M(X) over random hermitian test operators X."""
    d = superop_dim(M)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        Y = apply_superop(M, G + dagger(G))
        worst = max(worst, float(np.max(np.abs(Y - dagger(Y)))))
    return worst
