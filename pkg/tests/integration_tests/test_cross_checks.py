import numpy as np
import pytest

from quditport.checks import CheckLevel, PassResult, checks_for_level, run_check
from quditport.closed_form import fidelity_weyl_raw, scenario_fidelity
from quditport.noise import NoiseSpec, ScenarioSpec
from quditport.qudit import SchmidtChannel, max_entangled_basis
from quditport.sampling import RngSeed, mc_average_fidelity, sample_schmidt_channel

FULL_ONLY = [
    name
    for name in checks_for_level(CheckLevel.FULL)
    if name not in checks_for_level(CheckLevel.FAST)
]


@pytest.mark.parametrize("name", FULL_ONLY)
def test_full_checks_pass(name):
    result = run_check(name)
    assert isinstance(result, PassResult), getattr(result, "error_message", "")


@pytest.mark.parametrize("d", [2, 3, 4, 5])
@pytest.mark.parametrize("kinds", [("F", "P"), ("FP", "D"), ("P", "FP")])
def test_channel_qudits_are_interchangeable(d, kinds):
    rng = RngSeed(seed=d).generator(0)
    basis = max_entangled_basis(d)
    gamma = SchmidtChannel.maximally_entangled(d)
    p_in, p_a, p_b = rng.random(3)
    alice = NoiseSpec(kind=kinds[0], p=p_a)
    bob = NoiseSpec(kind=kinds[1], p=p_b)
    direct = fidelity_weyl_raw(basis, gamma, NoiseSpec(kind="D", p=p_in), alice, bob)
    swapped = fidelity_weyl_raw(basis, gamma, NoiseSpec(kind="D", p=p_in), bob, alice)
    assert direct == pytest.approx(swapped, abs=1e-10)


@pytest.mark.parametrize(
    "kinds",
    [
        ("none", "F", "F"),
        ("D", "AD", "P"),
        ("FP", "none", "AD"),
        ("AD", "D", "F"),
    ],
)
def test_oracle_monte_carlo_matches_closed_form(kinds):
    d = 3
    root = RngSeed(seed=17)
    rng = root.generator(0)
    gamma = sample_schmidt_channel(d, rng)
    basis = max_entangled_basis(d)
    scenario = ScenarioSpec.from_kinds(kinds, rng.random(3))
    estimate = mc_average_fidelity(gamma, basis, scenario, 2000, seed=root.child(1))
    expected = scenario_fidelity(scenario, d, basis, gamma)
    assert estimate.within(expected, sigmas=4.0)


def test_fidelities_stay_in_the_unit_interval():
    kinds = ["none", "F", "P", "FP", "D", "AD"]
    fractions = np.linspace(0, 1, 4)
    for d in (2, 3):
        for i, a, b in [(i, a, b) for i in kinds for a in kinds for b in kinds]:
            for p in fractions:
                scenario = ScenarioSpec.from_kinds((i, a, b), (p, 1 - p, p))
                value = scenario_fidelity(scenario, d)
                assert -1e-12 <= value <= 1 + 1e-12
