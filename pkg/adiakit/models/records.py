"""Array-valued records produced by the numerical services."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from adiakit.models.schemas import CPTPDiagnostic


@dataclass(frozen=True)
class SpectralData:
    """Clustered eigenstructure of a superoperator at fixed s.

    Cluster j has eigenvalue ``eigenvalues[j]`` (the cluster mean), its
    right/left eigenvector blocks are biorthonormal and ``projectors[j]`` is
    the corresponding spectral projector.
    """

    eigenvalues: np.ndarray
    multiplicities: list[int]
    right_vectors: list[np.ndarray]
    left_vectors: list[np.ndarray]
    projectors: list[np.ndarray]
    zero_index: Optional[int]
    scale: float
    residual: float

    @property
    def zero_projector(self) -> Optional[np.ndarray]:
        return None if self.zero_index is None else self.projectors[self.zero_index]

    @property
    def zero_multiplicity(self) -> int:
        return 0 if self.zero_index is None else self.multiplicities[self.zero_index]

    @property
    def nonzero(self) -> list[int]:
        return [j for j in range(len(self.eigenvalues)) if j != self.zero_index]

    @property
    def gap(self) -> float:
        """Smallest modulus among nonzero clusters (inf when there are none)."""
        moduli = [abs(self.eigenvalues[j]) for j in self.nonzero]
        return float(min(moduli)) if moduli else float("inf")


@dataclass
class EvolutionRecord:
    """Propagators E(s_k, 0) at checkpoints plus the segment maps between them."""

    s_grid: np.ndarray
    propagators: np.ndarray  # (K, D, D), E(s_k, 0)
    segments: np.ndarray  # (K - 1, D, D), E(s_{k+1}, s_k)
    substeps: int
    method: str
    richardson_discrepancy: Optional[float] = None
    cptp: list[CPTPDiagnostic] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.propagators[-1]

    def at(self, s: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.s_grid - s)))
        if abs(self.s_grid[k] - s) > 1e-12:
            raise KeyError(f"s={s} is not a checkpoint")
        return self.propagators[k]


@dataclass(frozen=True)
class BohrDecomposition:
    """A = sum_omega A_omega with exp(iHt) A_omega exp(-iHt) = exp(-i omega t) A_omega."""

    frequencies: np.ndarray
    components: list[np.ndarray]
    clustering_tol: float

    def component(self, omega: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.frequencies - omega)))
        if abs(self.frequencies[k] - omega) > self.clustering_tol:
            raise KeyError(f"no Bohr frequency near {omega}")
        return self.components[k]


@dataclass(frozen=True)
class WitnessRecord:
    """A state x0 that V(s) maps to a non-positive operator."""

    x0: np.ndarray
    negative_eigenvalue: float
    predicted: float
    lam: float
    alpha: float


@dataclass(frozen=True)
class ErrorSample:
    """Adiabatic error of one propagation, with integrator diagnostics."""

    T: float
    error: float
    substeps: int
    richardson_discrepancy: Optional[float]
    grid_errors: Optional[list[float]] = None
