import numpy as np
import pytest

from quditport.closed_form import (
    ClosedFormError,
    boundary_state,
    classical_fidelity,
    fidelity_computational,
    fidelity_weyl_closed,
    fidelity_weyl_raw,
    input_noise_tolerance,
    noiseless_fidelity,
    normalized_quantum_contribution,
    optimal_phase_fidelity,
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
    NoiseSpecError,
    ScenarioSpec,
    kraus_operators,
    weyl_coefficients,
)
from quditport.qudit import (
    DimensionError,
    SchmidtChannel,
    max_entangled_basis,
    phased_basis,
)
from quditport.sampling import RngSeed, sample_schmidt_channel

WEYL_KINDS = ["none", "F", "P", "FP", "D"]


@pytest.mark.parametrize("d,expected", [(2, 2 / 3), (3, 0.5), (5, 1 / 3)])
def test_classical_fidelity(d, expected):
    assert classical_fidelity(d) == pytest.approx(expected)


@pytest.mark.parametrize("d", range(2, 9))
def test_noiseless_maximal_entanglement(d):
    basis, gamma = max_entangled_basis(d), SchmidtChannel.maximally_entangled(d)
    breakdown = noiseless_fidelity(basis, gamma)
    assert breakdown.total == pytest.approx(1.0, abs=1e-12)
    assert breakdown.quantum_part == pytest.approx((d - 1) / (d + 1), abs=1e-12)
    assert breakdown.classical_part + breakdown.quantum_part == pytest.approx(1.0)
    assert breakdown.tilde_f == pytest.approx(d * (d - 1), abs=1e-10)
    assert scenario_fidelity(ScenarioSpec(), d) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d", [3, 4, 6])
def test_tilde_f_identity(d):
    gamma = sample_schmidt_channel(d, RngSeed(seed=d).generator(0))
    basis = max_entangled_basis(d)
    f_q = quantum_contribution(basis, gamma)
    expected = (d - 1) * (1 + (d + 1) * f_q)
    assert tilde_f(basis, gamma) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_normalized_quantum_contribution_for_real_schmidt_vectors(d):
    gamma = sample_schmidt_channel(d, RngSeed(seed=10 + d).generator(0))
    expected = (abs(np.sum(gamma.gamma)) ** 2 - 1) / (d - 1)
    assert normalized_quantum_contribution(gamma) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("d,nu", [(3, 1), (3, 2), (5, 3), (6, 5)])
def test_rank_state_contribution(d, nu):
    assert normalized_quantum_contribution(rank_state(d, nu)) == pytest.approx(
        (nu - 1) / (d - 1), abs=1e-12
    )


def test_boundary_state_endpoints_are_rank_states():
    d = 5
    for mu in range(1, d - 1):
        end = boundary_state(d, mu, 1 / np.sqrt(mu + 1))
        assert np.allclose(end.gamma, rank_state(d, mu + 1).gamma)
    assert np.allclose(boundary_state(d, d - 1, 1 / np.sqrt(d)).gamma, 1 / np.sqrt(d))
    assert np.allclose(boundary_state(d, d - 1, 1.0).gamma, [1, 0, 0, 0, 0])


@pytest.mark.parametrize("mu,a", [(0, 0.5), (4, 0.5), (1, 0.8)])
def test_boundary_state_domain(mu, a):
    with pytest.raises(ClosedFormError):
        boundary_state(4, mu, a)


def test_rank_state_domain():
    with pytest.raises(ClosedFormError):
        rank_state(3, 3)


@pytest.mark.parametrize(
    "kind,d,p,expected",
    [
        ("D", 3, 0.3, 0.8),
        ("F", 2, 1.0, 1 / 3),
        ("P", 3, 0.0, 1.0),
        ("FP", 2, 0.5, 2 / 3),
        ("AD", 2, 1.0, 0.5),
    ],
)
def test_single_qudit_fidelity_values(kind, d, p, expected):
    assert single_qudit_fidelity(kind, p, d) == pytest.approx(expected, abs=1e-12)


def test_single_qudit_fidelity_needs_noise():
    with pytest.raises(ClosedFormError):
        single_qudit_fidelity("none", 0.2, 3)


def test_amplitude_damping_closed_form_requires_maximal_entanglement():
    with pytest.raises(ClosedFormError):
        single_qudit_fidelity("AD", 0.3, 3, gamma=rank_state(3, 2))


@pytest.mark.parametrize(
    "kind,expected",
    [
        ("F", lambda d: (d - 1) / d),
        ("P", lambda d: (d - 1) / d),
        ("FP", lambda d: (d - 1) / d),
        ("D", lambda d: d / (d + 1)),
        ("AD", lambda d: (d + 2 * np.sqrt(d)) / (np.sqrt(d) + 1) ** 2),
    ],
)
@pytest.mark.parametrize("d", range(2, 9))
def test_thresholds(kind, expected, d):
    report = threshold(kind, d)
    assert report.p_star == pytest.approx(expected(d), abs=1e-12)
    at_threshold = report.fidelity_at_threshold
    assert at_threshold == pytest.approx(classical_fidelity(d), abs=1e-12)


def test_amplitude_damping_qubit_threshold():
    assert threshold("AD", 2).p_star == pytest.approx(2 * np.sqrt(2) - 2, abs=1e-12)


def test_threshold_of_noiseless_channel():
    with pytest.raises(ClosedFormError):
        threshold("none", 3)


@pytest.mark.parametrize("d", range(2, 7))
def test_restoration_limit(d):
    for kind in ("F", "P"):
        scenario = ScenarioSpec.from_kinds(("none", kind, kind), (0.0, 1.0, 1.0))
        value = scenario_fidelity(scenario, d)
        assert value == pytest.approx(restoration_limit(d), abs=1e-12)
    assert restoration_limit(2) == pytest.approx(1.0)
    assert restoration_limit(3) == pytest.approx(5 / 8)


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("case", range(8))
def test_three_routes_agree(d, case):
    rng = RngSeed(seed=99).child(d).generator(case)
    kinds = [WEYL_KINDS[i] for i in rng.integers(0, len(WEYL_KINDS), 3)]
    specs = [
        NoiseSpec(kind=k, p=0.0 if k == "none" else float(rng.random()))
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
    channels = [kraus_operators(s, d) for s in specs]
    computational = fidelity_computational(basis, gamma, *channels)
    assert raw == pytest.approx(closed, abs=1e-10)
    assert raw == pytest.approx(computational, abs=1e-10)


def test_weyl_raw_rejects_amplitude_damping():
    d = 3
    with pytest.raises(NoiseSpecError):
        fidelity_weyl_raw(
            max_entangled_basis(d),
            SchmidtChannel.maximally_entangled(d),
            NoiseSpec(),
            NoiseSpec(kind="AD", p=0.2),
            NoiseSpec(),
        )


def test_basis_and_channel_dimension_must_match():
    with pytest.raises(DimensionError):
        quantum_contribution(
            max_entangled_basis(3), SchmidtChannel.maximally_entangled(2)
        )


@pytest.mark.parametrize("d", [2, 3, 5])
@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_amplitude_damping_computational_matches_closed_form(d, p):
    scenario = ScenarioSpec(bob=NoiseSpec(kind="AD", p=p))
    assert scenario_fidelity(scenario, d) == pytest.approx(
        single_qudit_fidelity("AD", p, d), abs=1e-10
    )


@pytest.mark.parametrize("register", ["input", "alice", "bob"])
def test_single_noise_does_not_depend_on_the_register(register):
    d, p = 3, 0.45
    scenario = ScenarioSpec(**{register: NoiseSpec(kind="FP", p=p)})
    assert scenario_fidelity(scenario, d) == pytest.approx(
        single_qudit_fidelity("FP", p, d), abs=1e-12
    )


@pytest.mark.parametrize(
    "fractions,above",
    [
        ((0.1, 0.1, 0.1), True),
        ((0.9, 0.1, 0.9), True),
        ((0.9, 0.1, 0.1), False),
        ((0.9, 0.9, 0.9), False),
    ],
)
def test_three_flip_regimes(fractions, above):
    scenario = ScenarioSpec.from_kinds(("F", "F", "F"), fractions)
    assert (scenario_fidelity(scenario, 3) > classical_fidelity(3)) is above


@pytest.mark.parametrize("d", range(2, 6))
def test_input_noise_tolerance(d):
    assert input_noise_tolerance("P", "F", d) == pytest.approx(1 / d, abs=1e-6)
    assert input_noise_tolerance("FP", "F", d) == pytest.approx(1 / d, abs=1e-6)
    expected = d / (d * d - d + 1)
    assert input_noise_tolerance("D", "F", d) == pytest.approx(expected, abs=1e-6)


def test_input_noise_tolerance_amplitude_damping_qubit():
    expected = 2 * np.sqrt(2) - 2
    assert input_noise_tolerance("AD", "F", 2) == pytest.approx(expected, abs=1e-6)


def test_input_noise_tolerance_extremes():
    assert input_noise_tolerance("F", "D", 3) == 0.0
    assert input_noise_tolerance("none", "F", 2) == 1.0


@pytest.mark.parametrize("d,p", [(2, 0.3), (2, 0.8), (3, 0.5), (3, 0.9)])
def test_optimal_phase_fidelity_pieces(d, p):
    p_star = (d - 1) / d
    expected = 1 - d * p / (d + 1) if p <= p_star else (d * p + d - 1) / (d * d - 1)
    assert optimal_phase_fidelity(d, p) == pytest.approx(expected)


def test_optimal_phase_fidelity_is_continuous_at_threshold():
    for d in range(2, 7):
        p_star = (d - 1) / d
        assert optimal_phase_fidelity(d, p_star - 1e-12) == pytest.approx(
            optimal_phase_fidelity(d, p_star + 1e-12), abs=1e-9
        )


def test_region_fraction_qubit():
    exact = -1 - np.sqrt(2) + 3 * np.log(1 + np.sqrt(2))
    value = region_fraction_below_classical(2, resolution=201)
    assert value == pytest.approx(exact, abs=5e-3)


def test_region_fraction_with_flip_noise():
    value = region_fraction_below_classical(
        3, resolution=60, alice_kind=NoiseKind.F, bob_kind=NoiseKind.F
    )
    assert 0.0 < value < 1.0


def test_region_fraction_resolution():
    with pytest.raises(ClosedFormError):
        region_fraction_below_classical(2, resolution=1)
