"""Measurement-phase optimisation under single-qudit d-phase-flip noise.

With a maximally entangled channel and the phased basis
beta_jm = exp(i phi_j) omega**(jm) / sqrt(d), the fidelity only depends on
the pairwise phase differences. Above the threshold (d-1)/d the
quantum term flips sign and the best phases spread out around the circle.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from eliot import start_action
from pydantic import BaseModel
from scipy.optimize import minimize

from quditport.closed_form import classical_fidelity, optimal_phase_fidelity
from quditport.qudit import check_dim

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi


class PhaseOptimum(BaseModel):
    d: int
    p: float
    phases: Tuple[float, ...]
    value: float
    prediction: float

    @property
    def difference(self) -> float:
        return self.value - self.prediction


def _pair_cosines(phases: np.ndarray) -> float:
    """sum_k cos(phi_k) + sum_{k>l} cos(phi_l - phi_k), with phi_0 = 0 implied."""
    full = np.concatenate([[0.0], phases])
    total = np.abs(np.sum(np.exp(1j * full))) ** 2
    return (total - full.size) / 2


def phase_fidelity(d: int, p: float, phases: Sequence[float]) -> float:
    """Single-qudit d-phase-flip fidelity for a phased measurement basis.

    Args:
        d: Qudit dimension.
        p: Noise fraction.
        phases: phi_1 .. phi_{d-1}.
    """
    d = check_dim(d)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (d - 1,):
        raise ValueError(f"Expected {d - 1} phases for d={d}, got {phases.shape}.")
    coefficient = 1 - p * d / (d - 1)
    return classical_fidelity(d) * (1 + coefficient * _pair_cosines(phases) / d)


def canonical_phases(phases: Sequence[float], decimals: int = 9) -> Tuple[float, ...]:
    """Representative of a phase vector under the symmetries of the fidelity.

    The fidelity is unchanged by a common shift of all d phases (re-choosing
    which one is zero), by reversing their signs and by permuting them. The
    representative is the lexicographically smallest sorted vector.
    """
    full = np.concatenate([[0.0], np.asarray(phases, dtype=float)])
    candidates = []
    for reference in range(full.size):
        for sign in (1.0, -1.0):
            shifted = np.mod(sign * (full - full[reference]), TWO_PI)
            shifted[np.isclose(shifted, TWO_PI, atol=10.0**-decimals)] = 0.0
            shifted = np.sort(shifted)[1:]
            candidates.append(tuple(np.round(shifted, decimals)))
    best = min(candidates)
    return tuple(float(x) for x in best)


def optimize_phases(
    d: int, p: float, starts: Optional[int] = None, seed: int = 0
) -> PhaseOptimum:
    """Maximises ``phase_fidelity`` over the (d-1)-torus.

    Multi-start Nelder-Mead; starting points are drawn from a fixed seed so
    the result is reproducible.

    Args:
        d: Qudit dimension.
        p: Noise fraction in [0, 1].
        starts: Number of random starts, at least 8 (d - 1).
        seed: Seed for the starting points.
    """
    d = check_dim(d)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Noise fraction must lie in [0, 1], got {p}.")
    prediction = optimal_phase_fidelity(d, p)
    coefficient = 1 - p * d / (d - 1)
    if abs(coefficient) < 1e-12:
        # Every phase vector is optimal at the threshold.
        return PhaseOptimum(
            d=d,
            p=p,
            phases=(0.0,) * (d - 1),
            value=phase_fidelity(d, p, np.zeros(d - 1)),
            prediction=prediction,
        )

    starts = max(starts or 0, 8 * (d - 1))
    rng = np.random.default_rng(seed)
    initial = np.vstack([np.zeros(d - 1), rng.uniform(0, TWO_PI, (starts, d - 1))])

    def objective(phases: np.ndarray) -> float:
        return -phase_fidelity(d, p, phases)

    with start_action(action_type="optimize_phases", d=d, p=p, starts=starts):
        best = None
        for x0 in initial:
            result = minimize(
                objective,
                x0,
                method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000 * d},
            )
            if best is None or result.fun < best.fun:
                best = result
        phases = canonical_phases(best.x)
        value = phase_fidelity(d, p, np.asarray(phases))
        logger.debug(f"Optimal phases for d={d}, p={p}: {phases} -> {value}")
        return PhaseOptimum(
            d=d, p=p, phases=phases, value=value, prediction=prediction
        )
