"""Verification service running the cross-module invariant suites."""

import logging
import math
import warnings
from typing import Callable, Optional

import numpy as np
from scipy import linalg
from scipy.optimize import linear_sum_assignment

from adiakit.config import get_settings, settings_override
from adiakit.exceptions import (
    AdiakitError,
    BoundaryStencilWarning,
    ConfigError,
    DegenerateCaseError,
    DegenerateKernelError,
    GapTooSmallError,
)
from adiakit.models.families import (
    ConstantFamily,
    Example1Family,
    Example2Family,
    LiouvillianFamily,
    UnitaryFamily,
    example1_iss_closed_form,
)
from adiakit.models.schemas import CheckOutcome, CouplingAxis, ExperimentConfig, VerificationReport
from adiakit.services.bounds import gibbs_pprime_profile
from adiakit.services.davies import detailed_balance_certificate, example2_spectrum_closed_form, gibbs_state, kms_violation
from adiakit.services.experiment_service import ExperimentService, family_from_spec
from adiakit.services.propagate import (
    intertwiner_euler,
    intertwiner_ode,
    intertwiner_v,
    rank_one_intertwiner,
    v_nonpositivity_witness,
)
from adiakit.services.spectral import (
    decompose,
    finite_difference,
    induced_trace_norm,
    kernel_state,
    liouvillian_derivative,
    local_structure,
    projector_derivative,
    reduced_resolvent_from_spectrum,
    resolvent_derivative,
    resolvent_derivative_fd,
    semisimplicity_defect,
    zero_projector,
)
from adiakit.services.superop import is_cptp, lindbladian, pauli_vector, trace_row, vectorize, SIGMA_MINUS
from adiakit.utils.reporting import provenance

logger = logging.getLogger(__name__)

GRID = np.linspace(0.0, 1.0, 21)
INTERIOR = np.linspace(0.05, 0.95, 11)
# Absolute semigroup times h, plus times t / ||L|| relative to the generator scale
SEMIGROUP_STEPS = (1e-3, 1e-2, 1e-1)
SEMIGROUP_SCALED_STEPS = (0.1, 1.0, 10.0)


def _norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, 2))


def _outcome(name: str, measured: float, threshold: float, detail: str = "") -> CheckOutcome:
    return CheckOutcome(
        name=name,
        passed=bool(measured <= threshold),
        measured=float(measured),
        threshold=threshold,
        detail=detail,
    )


def _gapped_points(family: LiouvillianFamily, points: np.ndarray) -> list[float]:
    """Points of the grid where the reduced resolvent exists."""
    kept = []
    for s in points:
        try:
            local_structure(family, float(s))
            kept.append(float(s))
        except GapTooSmallError:
            continue
    return kept


def _gapped_end(family: LiouvillianFamily) -> float:
    return 1.0 if _gapped_points(family, np.array([1.0])) else 0.95


class VerificationService:
    """Named invariant checks; each returns a CheckOutcome with the measured value."""

    def __init__(self):
        self.settings = get_settings()
        self.checks: dict[str, Callable[[LiouvillianFamily, ExperimentConfig], CheckOutcome]] = {
            "trace_annihilation": self.check_trace_annihilation,
            "semigroup_cptp": self.check_semigroup_cptp,
            "semisimplicity": self.check_semisimplicity,
            "resolvent_identities": self.check_resolvent_identities,
            "projector_derivative": self.check_projector_derivative,
            "resolvent_derivative": self.check_resolvent_derivative,
            "intertwining": self.check_intertwining,
            "kms_symmetry": self.check_kms_symmetry,
            "detailed_balance": self.check_detailed_balance,
            "closed_form_spectrum": self.check_closed_form_spectrum,
            "iss_closed_form": self.check_iss_closed_form,
            "kms_pprime": self.check_kms_pprime,
            "unitary_identities": self.check_unitary_identities,
            "v_witness": self.check_v_witness,
            "bound_validity": self.check_bound_validity,
        }
        self._reference: dict[str, LiouvillianFamily] = {}

    def run(self, config: ExperimentConfig) -> VerificationReport:
        names = config.verify.checks or list(self.checks)
        unknown = [name for name in names if name not in self.checks]
        if unknown:
            raise ConfigError(f"unknown checks {unknown}; available: {sorted(self.checks)}", location="verify.checks")

        outcomes = []
        with settings_override(**ExperimentService.overrides(config)):
            family = family_from_spec(config.family)
            for name in names:
                logger.info("check %s on %s", name, family.name)
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", BoundaryStencilWarning)
                        outcome = self.checks[name](family, config)
                except AdiakitError as exc:
                    outcome = CheckOutcome(name=name, passed=False, detail=f"{type(exc).__name__}: {exc}")
                if not outcome.passed:
                    logger.warning("check %s failed: measured %s > %s %s", name, outcome.measured, outcome.threshold, outcome.detail)
                outcomes.append(outcome)
            prov = provenance(config)
        report = VerificationReport(checks=outcomes, provenance=prov)
        logger.info("%d/%d checks passed", sum(c.passed for c in outcomes), len(outcomes))
        return report

    def _family_for(self, family: LiouvillianFamily, kind: type, config: ExperimentConfig) -> Optional[LiouvillianFamily]:
        """The configured family if it is a `kind`, else the built-in reference (when enabled)."""
        if isinstance(family, kind):
            return family
        if not config.verify.include_builtin:
            return None
        if kind.__name__ not in self._reference:
            builders = {
                "Example1Family": Example1Family,
                "Example2Family": lambda: Example2Family(coupling_axis=CouplingAxis.Y),
                "UnitaryFamily": UnitaryFamily.from_fields,
            }
            self._reference[kind.__name__] = builders[kind.__name__]()
        return self._reference[kind.__name__]

    @staticmethod
    def _not_applicable(name: str, family: LiouvillianFamily) -> CheckOutcome:
        return CheckOutcome(name=name, passed=True, detail=f"not applicable to {family.name}")

    # ========================================================================
    # Generic suites
    # ========================================================================

    def check_trace_annihilation(self, family, config) -> CheckOutcome:
        one = trace_row(family.dim)
        worst = 0.0
        for s in GRID:
            L = family.liouvillian(float(s))
            worst = max(worst, float(np.linalg.norm(one @ L)) / max(1.0, _norm(L)))
        return _outcome("trace_annihilation", worst, 1e-12)

    def check_semigroup_cptp(self, family, config) -> CheckOutcome:
        worst = 0.0
        for s in np.linspace(0.0, 1.0, 5):
            L = family.liouvillian(float(s))
            scale = max(_norm(L), 1e-12)
            steps = [*SEMIGROUP_STEPS, *(t / scale for t in SEMIGROUP_SCALED_STEPS)]
            for h in steps:
                diagnostic = is_cptp(linalg.expm(h * L))
                worst = max(worst, diagnostic.cp_violation, diagnostic.tp_violation)
        detail = f"h in {SEMIGROUP_STEPS} and t/||L|| for t in {SEMIGROUP_SCALED_STEPS}"
        return _outcome("semigroup_cptp", worst, 1e-8, detail)

    def check_semisimplicity(self, family, config) -> CheckOutcome:
        worst = 0.0
        for s in GRID:
            L = family.liouvillian(float(s))
            worst = max(worst, semisimplicity_defect(L, zero_projector(L)) / max(1.0, _norm(L)))
        return _outcome("semisimplicity", worst, 1e-9)

    def check_resolvent_identities(self, family, config) -> CheckOutcome:
        points = _gapped_points(family, INTERIOR)
        worst = 0.0
        for s in points:
            st = local_structure(family, s)
            Q = np.eye(st.P.shape[0]) - st.P
            scale = max(1.0, _norm(st.S))
            residuals = [
                _norm(st.S @ st.L - Q),
                _norm(st.L @ st.S - Q),
                _norm(st.S @ st.P) / scale,
                _norm(st.P @ st.S) / scale,
                _norm(st.S - reduced_resolvent_from_spectrum(decompose(st.L))) / scale,
                _norm(st.P @ st.P - st.P),
                _norm(st.L @ st.P),
            ]
            worst = max(worst, *residuals)
        return _outcome("resolvent_identities", worst, 1e-8, f"{len(points)} gapped points")

    def check_projector_derivative(self, family, config) -> CheckOutcome:
        points = _gapped_points(family, INTERIOR)
        h = get_settings().fd_step
        worst = 0.0
        for s in points:
            analytic = projector_derivative(family, s)
            numeric = finite_difference(lambda t: local_structure(family, t, require_gap=False).P, s, h)
            worst = max(worst, _norm(analytic - numeric) / max(1.0, _norm(analytic)))
        return _outcome("projector_derivative", worst, 1e-6)

    def check_resolvent_derivative(self, family, config) -> CheckOutcome:
        points = _gapped_points(family, INTERIOR)
        worst = 0.0
        for s in points:
            analytic = resolvent_derivative(family, s)
            worst = max(worst, _norm(analytic - resolvent_derivative_fd(family, s)) / max(1.0, _norm(analytic)))
        return _outcome("resolvent_derivative", worst, 1e-6)

    def check_intertwining(self, family, config) -> CheckOutcome:
        """Euler-line and ODE intertwiners: intertwining, agreement and CPTP."""
        P0 = local_structure(family, 0.0).P
        worst_intertwining = 0.0
        worst_agreement = 0.0
        worst_cp = 0.0
        for s in (0.5, _gapped_end(family)):
            P = local_structure(family, s).P
            W_euler = intertwiner_euler(family, s)
            W_ode = intertwiner_ode(family, s)
            for W in (W_euler, W_ode):
                worst_intertwining = max(worst_intertwining, _norm(P @ W - W), _norm(W - W @ P0))
            worst_agreement = max(worst_agreement, induced_trace_norm(W_euler - W_ode, certify=False).value)
            diagnostic = is_cptp(W_euler, 1e-6)
            worst_cp = max(worst_cp, diagnostic.cp_violation, diagnostic.tp_violation)
        passed = worst_intertwining <= 1e-6 and worst_agreement <= 1e-5 and worst_cp <= 1e-6
        return CheckOutcome(
            name="intertwining",
            passed=passed,
            measured=max(worst_intertwining, worst_agreement, worst_cp),
            threshold=1e-6,
            detail=f"intertwining {worst_intertwining:.2e}, euler/ode {worst_agreement:.2e} (<= 1e-5), choi {worst_cp:.2e}",
        )

    def check_v_witness(self, family, config) -> CheckOutcome:
        s = _gapped_end(family)
        try:
            witness = v_nonpositivity_witness(family, s)
        except DegenerateCaseError:
            return CheckOutcome(name="v_witness", passed=True, detail="kernel does not move; V(s) = 1 on states")
        except DegenerateKernelError:
            return self._not_applicable("v_witness", family)
        rho_0 = kernel_state(local_structure(family, 0.0).P, family.dim)
        rho_s = kernel_state(local_structure(family, s).P, family.dim)
        transport = _norm(intertwiner_v(family, s) - rank_one_intertwiner(rho_0, rho_s))
        mismatch = abs(witness.negative_eigenvalue - witness.predicted)
        passed = witness.negative_eigenvalue < -1e-6 and mismatch <= 1e-9 and transport <= 1e-6
        return CheckOutcome(
            name="v_witness",
            passed=passed,
            measured=witness.negative_eigenvalue,
            threshold=-1e-6,
            detail=f"predicted {witness.predicted:.6e}, closed form vs ODE V {transport:.2e}",
        )

    def check_bound_validity(self, family, config) -> CheckOutcome:
        try:
            report, rows = ExperimentService().run_bound(config, ladder=config.verify.bound_ladder, workers=1)
        except GapTooSmallError as exc:
            return CheckOutcome(name="bound_validity", passed=True, detail=f"gap closes ({exc}); the bound does not apply")
        safety = get_settings().bound_safety
        ratio = max(row.error / (safety * row.bound) if row.bound > 0 else (0.0 if row.error <= 1e-12 else math.inf) for row in rows)
        return CheckOutcome(
            name="bound_validity",
            passed=all(row.holds for row in rows),
            measured=ratio,
            threshold=1.0,
            detail=f"C={report.C:.6g}, certified={report.norm_estimator_certified}",
        )

    # ========================================================================
    # Family-specific suites
    # ========================================================================

    def check_kms_symmetry(self, family, config) -> CheckOutcome:
        target = self._family_for(family, Example2Family, config)
        if target is None:
            return self._not_applicable("kms_symmetry", family)
        omegas = np.concatenate([target.splitting(GRID), np.linspace(0.01, 5.0, 50)])
        violation = kms_violation(target.bath, omegas)
        return _outcome("kms_symmetry", violation, 1e-10, f"gamma(-w) / (exp(-beta w) gamma(w)) on {target.name}")

    def check_detailed_balance(self, family, config) -> CheckOutcome:
        target = self._family_for(family, Example2Family, config)
        if target is None:
            return self._not_applicable("detailed_balance", family)
        worst = 0.0
        for s in INTERIOR:
            L = target.liouvillian(float(s))
            report = detailed_balance_certificate(L, gibbs_state(target.hamiltonian(float(s)), target.beta))
            worst = max(worst, report.stationarity / max(1.0, _norm(L)), report.normality_defect / max(1.0, _norm(L)) ** 2)
        return _outcome("detailed_balance", worst, 1e-8)

    def check_closed_form_spectrum(self, family, config) -> CheckOutcome:
        target = self._family_for(family, Example2Family, config)
        if target is None:
            return self._not_applicable("closed_form_spectrum", family)
        worst = 0.0
        for s in np.linspace(0.05, 0.95, 19):
            s = float(s)
            closed = example2_spectrum_closed_form(
                target.hamiltonian(s),
                target.coupling,
                target.bath,
                lamb_shift=target.lamb_shift,
                lamb_shift_enabled=target.bath_spec.lamb_shift_enabled,
            )
            numeric = np.linalg.eigvals(target.liouvillian(s))
            rows, cols = linear_sum_assignment(np.abs(closed[:, None] - numeric[None, :]))
            radius = float(np.max(np.abs(numeric)))
            scale = np.where(np.abs(closed[rows]) > 0, np.abs(closed[rows]), radius)
            worst = max(worst, float(np.max(np.abs(closed[rows] - numeric[cols]) / scale)))
        return _outcome("closed_form_spectrum", worst, 1e-8, f"19 interior points on {target.name}")

    def check_iss_closed_form(self, family, config) -> CheckOutcome:
        rng = np.random.default_rng(config.seed)
        residual = 0.0
        mismatch = 0.0
        draws = []
        for _ in range(50):
            draws.append((rng.normal(size=3), float(rng.uniform(0.1, 2.0))))
        if isinstance(family, (Example1Family, ConstantFamily)):
            draws.extend((family.field(float(s)), family.gamma) for s in GRID)
        for m, gamma in draws:
            L = lindbladian(pauli_vector(m), [math.sqrt(2.0 * gamma) * SIGMA_MINUS])
            rho = example1_iss_closed_form(m, gamma)
            residual = max(residual, float(np.linalg.norm(L @ vectorize(rho))))
            mismatch = max(mismatch, float(np.max(np.abs(kernel_state(zero_projector(L), 2) - rho))))
        return CheckOutcome(
            name="iss_closed_form",
            passed=residual <= 1e-12 and mismatch <= 1e-10,
            measured=residual,
            threshold=1e-12,
            detail=f"{len(draws)} parameter sets; kernel-state mismatch {mismatch:.2e} (<= 1e-10)",
        )

    def check_kms_pprime(self, family, config) -> CheckOutcome:
        target = self._family_for(family, Example2Family, config)
        if target is None:
            return self._not_applicable("kms_pprime", family)
        samples = gibbs_pprime_profile(target)
        worst = max(sample.measured / sample.bound if sample.bound > 0 else 0.0 for sample in samples)
        return CheckOutcome(
            name="kms_pprime",
            passed=all(sample.holds for sample in samples),
            measured=worst,
            threshold=1.0,
            detail=f"max measured/bound over {len(samples)} points",
        )

    def check_unitary_identities(self, family, config) -> CheckOutcome:
        target = self._family_for(family, UnitaryFamily, config)
        if target is None:
            return self._not_applicable("unitary_identities", family)
        K = target.K
        P0 = local_structure(target, 0.0).P
        worst = 0.0
        for s in INTERIOR:
            s = float(s)
            st = local_structure(target, s)
            U = target.rotation(s)
            scale = max(1.0, _norm(st.S))
            worst = max(
                worst,
                _norm(projector_derivative(target, s) - (K @ st.P - st.P @ K)),
                _norm(resolvent_derivative(target, s) - (K @ st.S - st.S @ K)) / scale,
                _norm(st.P - U @ P0 @ np.conj(U).T),
                _norm(liouvillian_derivative(target, s, scheme="analytic") - (K @ st.L - st.L @ K)),
            )
        transport = _norm(intertwiner_ode(target, 1.0) - target.rotation(1.0) @ P0)
        return CheckOutcome(
            name="unitary_identities",
            passed=worst <= 1e-9 and transport <= 1e-7,
            measured=worst,
            threshold=1e-9,
            detail=f"W(1) vs exp(K) P(0): {transport:.2e} (<= 1e-7)",
        )


# Singleton
_verification_service: Optional[VerificationService] = None


def get_verification_service() -> VerificationService:
    """Get the verification service singleton."""
    global _verification_service
    if _verification_service is None:
        _verification_service = VerificationService()
    return _verification_service
