"""Error hierarchy for adiakit."""

from typing import Optional


class AdiakitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(AdiakitError):
    """An experiment configuration could not be parsed or validated."""

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class NonHermitianInputError(AdiakitError):
    def __init__(self, name: str, deviation: float, tol: float):
        self.deviation = deviation
        self.tol = tol
        super().__init__(
            f"{name} is not hermitian: max |A - A^dag| = {deviation:.3e} > {tol:.1e}"
        )


class DimensionMismatchError(AdiakitError):
    pass


class DefectiveMatrixError(AdiakitError):
    def __init__(self, residual: float, message: str = ""):
        self.residual = residual
        super().__init__(
            message or f"spectral reconstruction residual {residual:.3e} exceeds tolerance"
        )


class EmptyKernelError(AdiakitError):
    pass


class SingularShiftError(AdiakitError):
    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(
            f"M + P is numerically singular (cond = {condition:.3e}); "
            "a second eigenvalue is within roundoff of zero"
        )


class GapTooSmallError(AdiakitError):
    def __init__(self, s: float, gap: float, threshold: float):
        self.s = s
        self.gap = gap
        self.threshold = threshold
        super().__init__(f"gap {gap:.3e} at s={s:.6f} is below threshold {threshold:.3e}")


class OrderTooHighError(AdiakitError):
    def __init__(self, order: int, max_order: int):
        self.order = order
        self.max_order = max_order
        super().__init__(f"order {order} exceeds max_order {max_order}")


class NonConvergenceError(AdiakitError):
    def __init__(self, message: str, discrepancy: Optional[float] = None):
        self.discrepancy = discrepancy
        super().__init__(message)


class ProjectorFailureError(AdiakitError):
    def __init__(self, s: float, cause: Exception):
        self.s = s
        self.cause = cause
        super().__init__(f"zero projector unavailable at s={s:.6f}: {cause}")


class DegenerateCaseError(AdiakitError):
    pass


class DegenerateKernelError(AdiakitError):
    def __init__(self, rank: int):
        self.rank = rank
        super().__init__(
            f"kernel has rank {rank}; higher-order terms need a rank-one kernel"
        )


class QuadratureFailureError(AdiakitError):
    def __init__(self, omega: float, value: float, error: float):
        self.omega = omega
        self.value = value
        self.error = error
        super().__init__(
            f"principal value at omega={omega:.6g} has error estimate {error:.3e} "
            f"(value {value:.6g})"
        )


class DegenerateHamiltonianError(AdiakitError):
    def __init__(self, splitting: float):
        self.splitting = splitting
        super().__init__(f"Hamiltonian splitting {splitting:.3e} is below tolerance")


class SingularGibbsError(AdiakitError):
    def __init__(self, min_eigenvalue: float):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(f"Gibbs state has eigenvalue {min_eigenvalue:.3e} below 1e-14")


class InsufficientDataError(AdiakitError):
    pass


class NonAntiHermitianError(AdiakitError):
    def __init__(self, deviation: float):
        self.deviation = deviation
        super().__init__(f"generator K is not anti-hermitian (deviation {deviation:.3e})")


class UnsupportedFamilyError(AdiakitError):
    """The family lacks data an operation needs (Hamiltonian, temperature, ...)."""


class BoundaryStencilWarning(UserWarning):
    """A finite difference fell back to a one-sided stencil at an interval end."""
