import numpy as np
import pytest

from quditport.closed_form import classical_fidelity, rank_state, single_qudit_fidelity
from quditport.noise import NoiseSpec, ScenarioSpec, kraus_operators
from quditport.oracle import (
    apply_scenario,
    assemble_initial,
    fidelity_for_input,
    fidelity_for_prepared,
    prepare_channel_state,
    run_protocol,
)
from quditport.qudit import (
    DensityMatrix,
    DimensionError,
    PureState,
    RegisterError,
    SchmidtChannel,
    max_entangled_basis,
    phased_basis,
)
from quditport.sampling import RngSeed, sample_input_state


@pytest.mark.parametrize("d", [2, 3, 4])
def test_noiseless_protocol_is_perfect(d):
    phi = sample_input_state(d, RngSeed(seed=d).generator(0))
    gamma = SchmidtChannel.maximally_entangled(d)
    result = run_protocol(assemble_initial(phi, gamma), max_entangled_basis(d), phi)
    assert result.fidelity == pytest.approx(1.0, abs=1e-12)
    assert result.total_probability == pytest.approx(1.0, abs=1e-12)
    assert len(result.outcomes) == d * d
    for outcome in result.outcomes:
        assert outcome.probability == pytest.approx(1 / d**2, abs=1e-12)
        assert outcome.conditional_fidelity == pytest.approx(1.0, abs=1e-12)


def test_outcomes_in_lexicographic_order():
    phi = PureState.computational(3, 1)
    rho = assemble_initial(phi, SchmidtChannel.maximally_entangled(3))
    result = run_protocol(rho, max_entangled_basis(3), phi)
    expected = [(m, n) for m in range(3) for n in range(3)]
    assert [(o.m, o.n) for o in result.outcomes] == expected


def test_zero_probability_outcome_has_zero_conditional_fidelity():
    # A product channel state |00> only ever yields outcomes with n matching the input.
    phi = PureState.computational(2, 0)
    gamma = SchmidtChannel(gamma=[1.0, 0.0])
    result = run_protocol(assemble_initial(phi, gamma), max_entangled_basis(2), phi)
    assert result.total_probability == pytest.approx(1.0)
    zero = [o for o in result.outcomes if o.probability < 1e-15]
    assert zero
    assert all(o.conditional_fidelity == 0.0 for o in zero)


def test_assemble_initial_dimension_mismatch():
    with pytest.raises(DimensionError):
        assemble_initial(
            PureState.computational(2, 0), SchmidtChannel.maximally_entangled(3)
        )


def test_oracle_dimension_cap():
    with pytest.raises(DimensionError):
        assemble_initial(
            PureState.computational(11, 0), SchmidtChannel.maximally_entangled(11)
        )


@pytest.mark.parametrize("order", [(0, 1, 2), (2, 1, 0), (1, 0, 2)])
def test_register_order_does_not_matter(order):
    d = 2
    phi = sample_input_state(d, RngSeed(seed=1).generator(0))
    scenario = ScenarioSpec.from_kinds(("D", "AD", "FP"), (0.3, 0.5, 0.2))
    rho = assemble_initial(phi, SchmidtChannel(gamma=[0.6, 0.8]))
    reference = apply_scenario(rho, scenario)
    assert np.allclose(apply_scenario(rho, scenario, order).matrix, reference.matrix)


def test_apply_scenario_rejects_bad_order():
    rho = assemble_initial(
        PureState.computational(2, 0), SchmidtChannel.maximally_entangled(2)
    )
    with pytest.raises(RegisterError):
        apply_scenario(rho, ScenarioSpec(), order=(0, 0, 1))


def test_computational_basis_input_under_full_flip():
    # Flip noise on the input with p = 1 and d = 2 maps |0> to |1>.
    phi = PureState.computational(2, 0)
    scenario = ScenarioSpec(input=NoiseSpec(kind="F", p=1.0))
    value = fidelity_for_input(
        phi, SchmidtChannel.maximally_entangled(2), max_entangled_basis(2), scenario
    )
    assert value == pytest.approx(0.0, abs=1e-12)


def test_prepared_channel_state_matches_full_simulation():
    d = 3
    rng = RngSeed(seed=2).generator(0)
    gamma = SchmidtChannel(gamma=np.sqrt([0.5, 0.3, 0.2]))
    basis = phased_basis(d, [0.4, 1.3])
    scenario = ScenarioSpec.from_kinds(("P", "AD", "D"), (0.2, 0.6, 0.1))
    channel_state = prepare_channel_state(gamma, scenario)
    input_channel = kraus_operators(scenario.input, d)
    for _ in range(3):
        phi = sample_input_state(d, rng)
        prepared = fidelity_for_prepared(phi, channel_state, basis, input_channel)
        direct = fidelity_for_input(phi, gamma, basis, scenario)
        assert prepared == pytest.approx(direct, abs=1e-12)


@pytest.mark.parametrize(
    "kinds,fractions",
    [
        (("none", "F", "P"), (0.0, 0.4, 0.7)),
        (("D", "AD", "FP"), (0.3, 0.5, 0.2)),
        (("AD", "D", "AD"), (0.6, 0.1, 0.9)),
    ],
)
@pytest.mark.parametrize("weight", [0.25, 0.5, 0.8])
def test_fidelity_is_affine_in_channel_state(kinds, fractions, weight):
    d = 3
    basis = phased_basis(d, [0.4, 1.3])
    scenario = ScenarioSpec.from_kinds(kinds, fractions)
    gamma = SchmidtChannel(gamma=np.sqrt([0.5, 0.3, 0.2]))
    first = prepare_channel_state(gamma, scenario)
    second = prepare_channel_state(rank_state(d, 2), scenario)
    mixture = DensityMatrix(
        matrix=weight * first.matrix + (1 - weight) * second.matrix, registers=2
    )
    input_channel = kraus_operators(scenario.input, d)
    phi = sample_input_state(d, RngSeed(seed=11).generator(0))

    def fidelity(channel_state):
        return fidelity_for_prepared(phi, channel_state, basis, input_channel)

    expected = weight * fidelity(first) + (1 - weight) * fidelity(second)
    assert fidelity(mixture) == pytest.approx(expected, abs=1e-12)


def test_average_over_computational_and_fourier_states():
    # For d = 2 the six Pauli eigenstates form a 2-design, so their average is exact.
    d, p = 2, 0.4
    s = 1 / np.sqrt(2)
    states = [
        [1, 0],
        [0, 1],
        [s, s],
        [s, -s],
        [s, 1j * s],
        [s, -1j * s],
    ]
    scenario = ScenarioSpec(bob=NoiseSpec(kind="D", p=p))
    gamma = SchmidtChannel.maximally_entangled(d)
    basis = max_entangled_basis(d)
    values = [
        fidelity_for_input(PureState(amplitudes=a), gamma, basis, scenario)
        for a in states
    ]
    assert np.mean(values) == pytest.approx(single_qudit_fidelity("D", p, d), abs=1e-12)
    assert np.mean(values) > classical_fidelity(d)
