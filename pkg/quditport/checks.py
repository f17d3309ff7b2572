"""Invariant checks run by ``quditport validate``.

Checks are registered by name and level. ``fast`` checks are algebraic or
closed-form identities; ``full`` adds the cross-checks between the three
fidelity routes and the Monte Carlo estimates. Every check returns a
``PassResult`` or a ``FailResult`` and never raises.
"""
import logging
from enum import Enum
from typing import Any, Callable, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel

from quditport.closed_form import (
    classical_fidelity,
    fidelity_computational,
    fidelity_weyl_closed,
    fidelity_weyl_raw,
    input_noise_tolerance,
    quantum_contribution,
    rank_state,
    region_fraction_below_classical,
    restoration_limit,
    scenario_fidelity,
    single_qudit_fidelity,
    threshold,
    tilde_f,
)
from quditport.noise import (
    NoiseKind,
    NoiseSpec,
    ScenarioSpec,
    apply_channel,
    apply_weyl_coefficient_form,
    coefficient_matrix,
    kraus_operators,
    weyl_coefficients,
)
from quditport.optimization import optimize_phases
from quditport.oracle import fidelity_for_input
from quditport.qudit import (
    MeasurementBasis,
    PureState,
    SchmidtChannel,
    entanglement_entropy,
    max_entangled_basis,
    omega,
    phased_basis,
    weyl_basis,
    weyl_operator,
)
from quditport.sampling import (
    RngSeed,
    envelope_bounds,
    fourth_moment_from_angles,
    haar_moment,
    mc_average_fidelity,
    moment_estimate,
    sample_density_matrix,
    sample_input_states,
    sample_schmidt_channel,
    scatter_experiment,
)
from quditport.utils.constants import default_settings

logger = logging.getLogger(__name__)

WEYL_KINDS = (NoiseKind.NONE, NoiseKind.F, NoiseKind.P, NoiseKind.FP, NoiseKind.D)
NOISY_KINDS = (NoiseKind.F, NoiseKind.P, NoiseKind.FP, NoiseKind.D, NoiseKind.AD)
MC_SIGMAS = 4.0


class CheckLevel(str, Enum):
    FAST = "fast"
    FULL = "full"


class CheckResult(BaseModel):
    outcome: str
    metadata: Optional[Dict[str, Any]] = None


class PassResult(CheckResult):
    outcome: Literal["pass"] = "pass"


class FailResult(CheckResult):
    outcome: Literal["fail"] = "fail"

    error_message: str


check_registry: Dict[str, Callable[[], CheckResult]] = {}
levels_to_checks: Dict[CheckLevel, List[str]] = {level: [] for level in CheckLevel}


def register_check(name: str, level: CheckLevel):
    """Register a check; fast checks also run at the full level."""
    level = CheckLevel(level)

    def decorator(func: Callable[[], CheckResult]):
        if name in check_registry:
            raise ValueError(f"Check {name} is already registered.")
        func.check_name = name
        check_registry[name] = func
        levels_to_checks[CheckLevel.FULL].append(name)
        if level is CheckLevel.FAST:
            levels_to_checks[CheckLevel.FAST].append(name)
        return func

    return decorator


def checks_for_level(level: CheckLevel) -> List[str]:
    return list(levels_to_checks[CheckLevel(level)])


def run_check(name: str) -> CheckResult:
    """Runs one registered check, turning exceptions into failures."""
    try:
        return check_registry[name]()
    except Exception as e:
        logger.debug(f"Check {name} raised {e!r}")
        return FailResult(error_message=f"{type(e).__name__}: {e}")


def _worst(deviations: Dict[str, float], tol: float, **metadata: Any) -> CheckResult:
    """Pass when every deviation is within ``tol``."""
    worst_key = max(deviations, key=deviations.get)
    worst = deviations[worst_key]
    metadata = {
        "max_deviation": worst,
        "tolerance": tol,
        "cases": len(deviations),
        **metadata,
    }
    if worst <= tol:
        return PassResult(metadata=metadata)
    return FailResult(
        error_message=f"{worst_key} deviates by {worst:.3e} (tolerance {tol:.1e})",
        metadata=metadata,
    )


@register_check("kraus-completeness", CheckLevel.FAST)
def check_kraus_completeness() -> CheckResult:
    deviations = {}
    for d in range(2, 6):
        for kind in NOISY_KINDS:
            for p in (0.0, 0.37, 1.0):
                ops = kraus_operators(NoiseSpec(kind=kind, p=p), d).operators
                total = np.einsum("kai,kaj->ij", ops.conj(), ops)
                deviations[f"{kind.symbol} d={d} p={p}"] = float(
                    np.max(np.abs(total - np.eye(d)))
                )
    return _worst(deviations, default_settings().tolerances.construction)


@register_check("weyl-group-law", CheckLevel.FAST)
def check_weyl_group_law() -> CheckResult:
    """U_mn U_kl = omega**(nk) U_{m+k, n+l} and tr(U_mn^dagger U_kl) = d delta."""
    deviations = {}
    for d in range(2, 6):
        basis = weyl_basis(d)
        gram = np.einsum("xab,yab->xy", basis.conj(), basis)
        deviations[f"orthogonality d={d}"] = float(
            np.max(np.abs(gram - d * np.eye(d * d)))
        )
        for m, n, k, q in np.ndindex(d, d, d, d):
            product = weyl_operator(d, (m, n)) @ weyl_operator(d, (k, q))
            expected = omega(d) ** (n * k) * weyl_operator(d, (m + k, n + q))
            key = f"d={d} ({m},{n})({k},{q})"
            deviations[key] = float(np.max(np.abs(product - expected)))
    return _worst(deviations, default_settings().tolerances.construction)


@register_check("weyl-coefficient-form", CheckLevel.FAST)
def check_weyl_coefficient_form() -> CheckResult:
    """Kraus sandwich and coefficient update agree on random states."""
    rng = RngSeed(seed=11).generator(0)
    deviations = {}
    for d in (2, 3, 4):
        for kind in WEYL_KINDS[1:]:
            spec = NoiseSpec(kind=kind, p=float(rng.random()))
            rho = sample_density_matrix(d, 2, rng)
            for register in (0, 1):
                kraus = apply_channel(rho, kraus_operators(spec, d), register)
                coefficient = apply_weyl_coefficient_form(
                    rho, coefficient_matrix(spec, d), register
                )
                deviations[f"{kind.symbol} d={d} register {register}"] = float(
                    np.max(np.abs(kraus.matrix - coefficient.matrix))
                )
    return _worst(deviations, default_settings().tolerances.derived)


@register_check("noiseless-fidelity", CheckLevel.FAST)
def check_noiseless_fidelity() -> CheckResult:
    deviations = {
        f"d={d}": abs(scenario_fidelity(ScenarioSpec(), d) - 1.0) for d in range(2, 9)
    }
    return _worst(deviations, default_settings().tolerances.construction)


@register_check("thresholds", CheckLevel.FAST)
def check_thresholds() -> CheckResult:
    """Single-qudit fidelity equals f_C at p*."""
    deviations = {}
    for d in range(2, 9):
        for kind in NOISY_KINDS:
            report = threshold(kind, d)
            deviations[f"{kind.symbol} d={d}"] = abs(
                report.fidelity_at_threshold - classical_fidelity(d)
            )
    deviations["AD d=2 value"] = abs(
        threshold(NoiseKind.AD, 2).p_star - (2 * np.sqrt(2) - 2)
    )
    return _worst(deviations, default_settings().tolerances.construction)


@register_check("restoration-limit", CheckLevel.FAST)
def check_restoration_limit() -> CheckResult:
    deviations = {}
    for d in range(2, 7):
        for kind in (NoiseKind.F, NoiseKind.P):
            scenario = ScenarioSpec.from_kinds(
                (NoiseKind.NONE, kind, kind), (0.0, 1.0, 1.0)
            )
            deviations[f"{kind.symbol} d={d}"] = abs(
                scenario_fidelity(scenario, d) - restoration_limit(d)
            )
    return _worst(deviations, default_settings().tolerances.construction)


@register_check("input-noise-tolerance", CheckLevel.FAST)
def check_input_noise_tolerance() -> CheckResult:
    """(X, F, F) with p_F = 1 stays above f_C exactly below the tabulated p_X."""
    deviations = {}
    for d in range(2, 6):
        expected = {
            NoiseKind.P: 1 / d,
            NoiseKind.FP: 1 / d,
            NoiseKind.D: d / (d * d - d + 1),
        }
        for kind, value in expected.items():
            found = input_noise_tolerance(kind, NoiseKind.F, d)
            deviations[f"({kind.symbol},F,F) d={d}"] = abs(found - value)
    return _worst(deviations, 1e-6)


@register_check("haar-fourth-moment", CheckLevel.FAST)
def check_haar_fourth_moment() -> CheckResult:
    deviations = {
        f"d={d}": abs(fourth_moment_from_angles(d) - haar_moment(d, (0, 0, 0, 0)))
        for d in range(2, 9)
    }
    return _worst(deviations, default_settings().tolerances.derived)


@register_check("phase-optimum", CheckLevel.FAST)
def check_phase_optimum() -> CheckResult:
    deviations = {}
    for d in (2, 3):
        for p in (0.1, 0.5, 0.95):
            result = optimize_phases(d, p)
            deviations[f"d={d} p={p}"] = abs(result.difference)
    return _worst(deviations, 1e-6)


@register_check("triple-equivalence", CheckLevel.FULL)
def check_triple_equivalence() -> CheckResult:
    """Raw Weyl sum, region closed form and computational sum agree."""
    root = RngSeed(seed=2023)
    deviations = {}
    for d in (2, 3, 4):
        for index in range(34):
            rng = root.child(d).generator(index)
            kinds = [WEYL_KINDS[i] for i in rng.integers(0, len(WEYL_KINDS), 3)]
            specs = [
                NoiseSpec()
                if k is NoiseKind.NONE
                else NoiseSpec(kind=k, p=float(rng.random()))
                for k in kinds
            ]
            gamma = sample_schmidt_channel(d, rng)
            basis = phased_basis(d, rng.uniform(0, 2 * np.pi, d - 1))
            raw = fidelity_weyl_raw(basis, gamma, *specs)
            closed = fidelity_weyl_closed(
                d,
                quantum_contribution(basis, gamma),
                tilde_f(basis, gamma),
                *(weyl_coefficients(s.kind, s.p, d) for s in specs),
            )
            computational = fidelity_computational(
                basis, gamma, *(kraus_operators(s, d) for s in specs)
            )
            key = f"d={d} #{index}"
            deviations[key] = max(abs(raw - closed), abs(raw - computational))
    return _worst(deviations, default_settings().tolerances.derived)


@register_check("amplitude-damping-closed-form", CheckLevel.FULL)
def check_amplitude_damping() -> CheckResult:
    deviations = {}
    for d in range(2, 6):
        basis = max_entangled_basis(d)
        gamma = SchmidtChannel.maximally_entangled(d)
        noiseless = kraus_operators(NoiseSpec(), d)
        for p in (0.2, 0.6, 1.0):
            channel = kraus_operators(NoiseSpec(kind=NoiseKind.AD, p=p), d)
            computational = fidelity_computational(
                basis, gamma, noiseless, noiseless, channel
            )
            deviations[f"d={d} p={p}"] = abs(
                computational - single_qudit_fidelity(NoiseKind.AD, p, d)
            )
    return _worst(deviations, default_settings().tolerances.derived)


@register_check("oracle-monte-carlo", CheckLevel.FULL)
def check_oracle_monte_carlo() -> CheckResult:
    """Monte Carlo over the density-matrix oracle matches the closed forms."""
    d, n = 3, 2000
    root = RngSeed(seed=7)
    basis = max_entangled_basis(d)
    failures, scores = [], []
    for index in range(10):
        rng = root.child(0).generator(index)
        kinds = [NOISY_KINDS[i] for i in rng.integers(0, len(NOISY_KINDS), 3)]
        scenario = ScenarioSpec.from_kinds(kinds, rng.random(3))
        gamma = sample_schmidt_channel(d, rng)
        estimate = mc_average_fidelity(
            gamma, basis, scenario, n, seed=root.child(1, index)
        )
        expected = scenario_fidelity(scenario, d, basis, gamma)
        scores.append(abs(estimate.mean - expected) / max(estimate.std_error, 1e-15))
        if not estimate.within(expected, sigmas=MC_SIGMAS):
            failures.append(f"{scenario.label}: {estimate.mean} vs {expected}")
    metadata = {"max_sigma": float(max(scores)), "sigmas": MC_SIGMAS, "samples": n}
    if failures:
        return FailResult(error_message="; ".join(failures), metadata=metadata)
    return PassResult(metadata=metadata)


@register_check("oracle-noiseless", CheckLevel.FULL)
def check_oracle_noiseless() -> CheckResult:
    rng = RngSeed(seed=5).generator(0)
    deviations = {}
    for d in range(2, 6):
        gamma = SchmidtChannel.maximally_entangled(d)
        for row, amplitudes in enumerate(sample_input_states(d, 5, rng)):
            phi = PureState(amplitudes=amplitudes)
            value = fidelity_for_input(
                phi, gamma, max_entangled_basis(d), ScenarioSpec()
            )
            deviations[f"d={d} #{row}"] = abs(value - 1.0)
    return _worst(deviations, default_settings().tolerances.construction)


@register_check("haar-moments", CheckLevel.FULL)
def check_haar_moments() -> CheckResult:
    failures = []
    patterns = ((0, 0, 0, 0), (0, 0, 1, 1), (0, 1, 1, 0), (0, 1, 0, 1))
    for d in range(2, 7):
        for method in ("gaussian", "angular"):
            states = sample_input_states(
                d, 100000, RngSeed(seed=d).generator(0), method
            )
            for pattern in patterns:
                estimate = moment_estimate(states, pattern)
                expected = haar_moment(d, pattern)
                if not estimate.within(expected, sigmas=MC_SIGMAS):
                    failures.append(
                        f"{method} d={d} {pattern}: {estimate.mean} vs {expected}"
                    )
    if failures:
        return FailResult(error_message="; ".join(failures))
    return PassResult(metadata={"sigmas": MC_SIGMAS})


@register_check("entanglement-envelope", CheckLevel.FULL)
def check_entanglement_envelope() -> CheckResult:
    """Scatter points stay inside the boundary families; rank states sit on them."""
    deviations = {}
    for d in (3, 4, 5):
        result = scatter_experiment(d, 2000, seed=d, curve_points=21)
        excess = 0.0
        for record in result.records:
            lower, upper = envelope_bounds(d, record.entanglement)
            excess = max(
                excess, lower - record.fq_normalized, record.fq_normalized - upper
            )
        deviations[f"scatter d={d}"] = max(excess - 1e-6, 0.0)
        for nu in range(1, d):
            gamma = rank_state(d, nu)
            lower, _ = envelope_bounds(d, entanglement_entropy(gamma))
            fq = (d + 1) * quantum_contribution(max_entangled_basis(d), gamma) / (d - 1)
            deviations[f"rank {nu} d={d}"] = max(abs(lower - fq) - 1e-9, 0.0)
    return _worst(deviations, 0.0)


@register_check("region-fraction", CheckLevel.FULL)
def check_region_fraction() -> CheckResult:
    """(none, AD, AD) region below f_C against its exact area."""
    deviations = {}
    for d in (2, 5):
        u = 1 + np.sqrt(d)
        exact = 4 / d**2 * (u * u / 2 - 3 * u + 3 * np.log(u) + 1 / u - (0.5 - 3 + 1))
        fraction = region_fraction_below_classical(d, resolution=201)
        deviations[f"d={d}"] = abs(fraction - exact)
    return _worst(deviations, 5e-3)
