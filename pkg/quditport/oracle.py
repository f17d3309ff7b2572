"""Density-matrix simulation of the teleportation protocol.

The input qudit I and Alice's channel qudit A are projected onto each
Bell-like state Phi_mn, Bob's qudit B receives the correction U_mn, and the
unnormalized overlaps <phi|rho_mn|phi> are summed into the fidelity. This is
the reference every closed form is checked against.
"""
import logging
from typing import List, Optional, Sequence

import numpy as np
from eliot import start_action
from pydantic import BaseModel

from quditport.noise import KrausChannel, ScenarioSpec, apply_channel, kraus_operators
from quditport.qudit import (
    DensityMatrix,
    DimensionError,
    MeasurementBasis,
    PureState,
    RegisterError,
    SchmidtChannel,
    bell_basis,
    check_dim,
    tensor_product,
    weyl_basis,
)
from quditport.utils.constants import default_settings

logger = logging.getLogger(__name__)


class ProtocolOutcome(BaseModel):
    """One measurement outcome (m, n) of Alice's joint measurement."""

    m: int
    n: int
    probability: float
    overlap: float
    conditional_fidelity: float


class ProtocolResult(BaseModel):
    outcomes: List[ProtocolOutcome]
    fidelity: float

    @property
    def total_probability(self) -> float:
        return float(np.sum([o.probability for o in self.outcomes]))


def _check_oracle_dim(d: int) -> int:
    return check_dim(d, cap=default_settings().oracle_max_dim)


def assemble_initial(phi: PureState, gamma: SchmidtChannel) -> DensityMatrix:
    """|phi><phi| (x) |psi><psi| on registers (I, A, B)."""
    if phi.d != gamma.d:
        raise DimensionError(
            f"Input state has d={phi.d} but the channel has d={gamma.d}."
        )
    _check_oracle_dim(phi.d)
    vector = np.kron(phi.amplitudes, gamma.state_vector())
    return DensityMatrix(matrix=np.outer(vector, vector.conj()), registers=3)


def apply_scenario(
    rho: DensityMatrix,
    scenario: ScenarioSpec,
    order: Sequence[int] = (0, 1, 2),
) -> DensityMatrix:
    """Applies the input, Alice and Bob channels to their registers.

    Args:
        rho: Three-register density matrix.
        scenario: Noise on (I, A, B).
        order: The order in which registers are processed.
    """
    if rho.registers != 3:
        raise RegisterError("apply_scenario expects a three-register state.")
    if sorted(order) != [0, 1, 2]:
        raise RegisterError(f"order must be a permutation of (0, 1, 2), got {order}.")
    specs = scenario.specs
    for register in order:
        spec = specs[register]
        if spec.is_noiseless:
            continue
        rho = apply_channel(rho, kraus_operators(spec, rho.d), register)
    return rho


def prepare_channel_state(
    gamma: SchmidtChannel, scenario: ScenarioSpec
) -> DensityMatrix:
    """The noisy two-qudit channel state on (A, B); the input noise is ignored."""
    _check_oracle_dim(gamma.d)
    rho = gamma.density_matrix()
    for register, spec in ((0, scenario.alice), (1, scenario.bob)):
        if not spec.is_noiseless:
            rho = apply_channel(rho, kraus_operators(spec, gamma.d), register)
    return rho


def _outcome_overlaps(rho: DensityMatrix, basis: MeasurementBasis, phi: PureState):
    d = rho.d
    if basis.d != d or phi.d != d:
        raise DimensionError("State, basis and reference must share the dimension d.")
    if rho.registers != 3:
        raise RegisterError("The protocol acts on a three-register state.")
    _check_oracle_dim(d)
    bells = bell_basis(basis).reshape(d * d, d, d)
    # <Phi_mn|_IA rho |Phi_mn>_IA, a d x d operator on B for every outcome.
    bob = np.einsum(
        "xia,iabjcq,xjc->xbq", bells.conj(), rho.tensor(), bells, optimize=True
    )
    corrections = weyl_basis(d)
    corrected = np.einsum(
        "xab,xbc,xdc->xad", corrections, bob, corrections.conj(), optimize=True
    )
    probabilities = np.real(np.einsum("xaa->x", corrected))
    amplitudes = phi.amplitudes
    overlaps = np.real(
        np.einsum("a,xab,b->x", amplitudes.conj(), corrected, amplitudes)
    )
    return probabilities, overlaps


def protocol_fidelity(
    rho: DensityMatrix, basis: MeasurementBasis, phi_ref: PureState
) -> float:
    """F = sum_mn <phi|rho_mn|phi> without building outcome records."""
    _, overlaps = _outcome_overlaps(rho, basis, phi_ref)
    return float(np.sum(overlaps))


def run_protocol(
    rho: DensityMatrix, basis: MeasurementBasis, phi_ref: PureState
) -> ProtocolResult:
    """Runs Alice's measurement and Bob's correction for every outcome.

    Args:
        rho: The (noisy) three-register state before the measurement.
        basis: Alice's Bell-like measurement basis.
        phi_ref: The state that was meant to be teleported.

    Returns:
        The per-outcome probabilities and conditional fidelities, and the
        total fidelity F.
    """
    d = rho.d
    with start_action(action_type="run_protocol", d=d):
        probabilities, overlaps = _outcome_overlaps(rho, basis, phi_ref)
        outcomes = []
        for x, (probability, overlap) in enumerate(zip(probabilities, overlaps)):
            if probability > 0:
                conditional = overlap / probability
            else:
                logger.debug(f"Outcome {divmod(x, d)} has zero probability")
                conditional = 0.0
            m, n = divmod(x, d)
            outcomes.append(
                ProtocolOutcome(
                    m=m,
                    n=n,
                    probability=probability,
                    overlap=overlap,
                    conditional_fidelity=conditional,
                )
            )
        return ProtocolResult(outcomes=outcomes, fidelity=float(np.sum(overlaps)))


def fidelity_for_input(
    phi: PureState,
    gamma: SchmidtChannel,
    basis: MeasurementBasis,
    scenario: ScenarioSpec,
) -> float:
    """Fidelity of teleporting one input state through the noisy protocol."""
    rho = apply_scenario(assemble_initial(phi, gamma), scenario)
    return protocol_fidelity(rho, basis, phi)


def fidelity_for_prepared(
    phi: PureState,
    channel_state: DensityMatrix,
    basis: MeasurementBasis,
    input_channel: Optional[KrausChannel] = None,
) -> float:
    """Like ``fidelity_for_input`` with the noisy channel state precomputed.

    The local channels act on different registers of a product state, so
    the input noise can be applied before the tensor product.
    """
    rho_input = phi.density_matrix()
    if input_channel is not None:
        rho_input = apply_channel(rho_input, input_channel, 0)
    rho = tensor_product(rho_input, channel_state)
    return protocol_fidelity(rho, basis, phi)
