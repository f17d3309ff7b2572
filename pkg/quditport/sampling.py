"""Random states, Monte Carlo averages and the entanglement scatter.

Random streams use numpy's PCG64 bit generator seeded through
``SeedSequence(entropy=seed, spawn_key=stream + (index,))``, so that every
sample is a function of (seed, stream, sample index) alone and a run gives
the same numbers however it is split across workers.
"""
import logging
from math import comb, factorial
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from eliot import start_action
from pydantic import BaseModel, Field, conint, validator
from scipy.optimize import brentq

from quditport.closed_form import boundary_state, normalized_quantum_contribution
from quditport.evaluation_service import evaluate
from quditport.noise import KrausChannel, ScenarioSpec, kraus_operators
from quditport.oracle import fidelity_for_prepared, prepare_channel_state
from quditport.qudit import (
    DensityMatrix,
    MeasurementBasis,
    PureState,
    SchmidtChannel,
    check_dim,
    entanglement_entropy,
    max_entangled_basis,
)
from quditport.utils.constants import default_settings

logger = logging.getLogger(__name__)

SAMPLERS = ("gaussian", "angular")
SCHMIDT_MEASURE = "fubini-study moduli: |gamma_k|**2 uniform on the simplex"
# Entropy mismatch below which a family endpoint is taken as the boundary point.
ENDPOINT_TOL = 1e-12


class RngSeed(BaseModel):
    """Root seed plus a stream key for independent, reproducible streams."""

    seed: conint(ge=0, lt=2**64) = 0
    stream: Tuple[int, ...] = ()

    class Config:
        allow_mutation = False

    def child(self, *key: int) -> "RngSeed":
        return RngSeed(seed=self.seed, stream=self.stream + tuple(key))

    def generator(self, index: int) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            entropy=self.seed, spawn_key=self.stream + (index,)
        )
        return np.random.Generator(np.random.PCG64(sequence))


class McEstimate(BaseModel):
    mean: float
    std_error: float
    n_samples: conint(ge=2)

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> "McEstimate":
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        if n < 2:
            raise ValueError("At least two samples are needed for an estimate.")
        # np.sum reduces pairwise, so the mean only depends on sample order.
        mean = np.sum(samples) / n
        std_error = np.std(samples, ddof=1) / np.sqrt(n)
        return cls(mean=mean, std_error=std_error, n_samples=n)

    def within(self, value: float, sigmas: float = 3.0, floor: float = 1e-12) -> bool:
        return abs(self.mean - value) <= sigmas * self.std_error + floor


class ScatterRecord(BaseModel):
    entanglement: float
    fq_normalized: float

    @validator("entanglement", "fq_normalized")
    def finite(cls, value):
        if not np.isfinite(value):
            raise ValueError("scatter coordinates must be finite")
        return value

    @validator("fq_normalized")
    def in_unit_interval(cls, value):
        if not -1e-9 <= value <= 1 + 1e-9:
            raise ValueError(f"f'_Q = {value} is outside [0, 1]")
        return value


class ScatterResult(BaseModel):
    d: int
    n: int
    seed: int
    records: List[ScatterRecord]
    curves: Dict[int, List[Tuple[float, float]]] = Field(default_factory=dict)


def sample_input_states(
    d: int, n: int, rng: np.random.Generator, method: str = "gaussian"
) -> np.ndarray:
    """Draws n unitarily invariant pure states as rows of an (n, d) array.

    ``gaussian`` normalises vectors of independent standard complex normals.
    ``angular`` draws the hyperspherical angles directly: u_j = sin(theta_j)**2
    has density proportional to u**(d-j-2) and the phases are uniform.
    """
    d = check_dim(d)
    if method == "gaussian":
        vectors = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
        return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    if method == "angular":
        powers = d - 1 - np.arange(d - 1)
        u = rng.random((n, d - 1)) ** (1.0 / powers)
        sines, cosines = np.sqrt(u), np.sqrt(1 - u)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, (n, d - 1)))
        states = np.empty((n, d), dtype=complex)
        prefix = np.ones(n)
        states[:, 0] = cosines[:, 0]
        for j in range(1, d):
            prefix = prefix * sines[:, j - 1]
            radial = prefix * cosines[:, j] if j < d - 1 else prefix
            states[:, j] = radial * phases[:, j - 1]
        # Renormalize away rounding so every row passes the PureState check.
        return states / np.linalg.norm(states, axis=1, keepdims=True)
    raise ValueError(f"Unknown sampler {method!r}; expected one of {SAMPLERS}.")


def sample_input_state(
    d: int, rng: np.random.Generator, method: str = "gaussian"
) -> PureState:
    return PureState(amplitudes=sample_input_states(d, 1, rng, method)[0])


def sample_schmidt_channel(d: int, rng: np.random.Generator) -> SchmidtChannel:
    """Schmidt coefficients from a Fubini-Study point of the coefficient space.

    The moduli of a normalised complex Gaussian vector are kept, so the
    weights |gamma_k|**2 are uniform on the probability simplex.
    """
    d = check_dim(d)
    vector = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    moduli = np.abs(vector)
    return SchmidtChannel(gamma=moduli / np.linalg.norm(moduli))


def sample_density_matrix(
    d: int, registers: int, rng: np.random.Generator
) -> DensityMatrix:
    """Random full-rank density matrix G G^dagger / tr(G G^dagger)."""
    size = check_dim(d) ** registers
    ginibre = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    matrix = ginibre @ ginibre.conj().T
    matrix = (matrix + matrix.conj().T) / 2
    return DensityMatrix(matrix=matrix / np.trace(matrix).real, registers=registers)


def _fidelity_chunk(task) -> List[float]:
    seed, indices, d, method, channel_state, basis, input_channel = task
    values = []
    for index in indices:
        rng = seed.generator(index)
        phi = sample_input_state(d, rng, method)
        values.append(fidelity_for_prepared(phi, channel_state, basis, input_channel))
    return values


def mc_average_fidelity(
    gamma: SchmidtChannel,
    basis: MeasurementBasis,
    scenario: ScenarioSpec,
    n: int,
    seed: Union[int, RngSeed] = 0,
    workers: Optional[int] = 1,
    method: str = "gaussian",
) -> McEstimate:
    """Monte Carlo average of the oracle fidelity over random input states.

    Args:
        gamma: Channel Schmidt coefficients.
        basis: Alice's measurement basis.
        scenario: Noise on (I, A, B).
        n: Number of input states, at least 100.
        seed: Root seed or an ``RngSeed`` with its own stream key.
        workers: Worker processes; ``None`` reads the configured default.
        method: Input-state sampler.
    """
    if n < 100:
        raise ValueError(f"Monte Carlo averages need n >= 100, got {n}.")
    d = check_dim(gamma.d, cap=default_settings().oracle_max_dim)
    seed = seed if isinstance(seed, RngSeed) else RngSeed(seed=seed)
    channel_state = prepare_channel_state(gamma, scenario)
    input_channel: Optional[KrausChannel] = None
    if not scenario.input.is_noiseless:
        input_channel = kraus_operators(scenario.input, d)

    blocks = np.array_split(np.arange(n), max(1, min(n, 4 * (workers or 1))))
    tasks = [
        (seed, block.tolist(), d, method, channel_state, basis, input_channel)
        for block in blocks
    ]
    with start_action(
        action_type="mc_average_fidelity",
        d=d,
        n=n,
        seed=seed.seed,
        scenario=scenario.label,
    ):
        chunks = evaluate(_fidelity_chunk, tasks, workers)
        return McEstimate.from_samples(np.concatenate(chunks))


def volume(d: int) -> float:
    """Volume pi**(d-1) / (d-1)! of the pure states under the angular measure."""
    d = check_dim(d)
    return np.pi ** (d - 1) / factorial(d - 1)


def angular_integral(n: int, m: int) -> float:
    """int_0^{pi/2} sin(x)**m cos(x)**(n+1) dx for even n >= 0 and m > 0."""
    if n < 0 or n % 2:
        raise ValueError(f"n must be a non-negative even integer, got {n}.")
    if m <= 0:
        raise ValueError(f"m must be positive, got {m}.")
    half = n // 2
    return float(
        sum((-1) ** k * comb(half, k) / (2 * k + m + 1) for k in range(half + 1))
    )


def fourth_moment_from_angles(d: int) -> float:
    """<|alpha_0|**4> assembled from the angular integrals."""
    d = check_dim(d)
    value = 2 ** (d - 1) * factorial(d - 1) * angular_integral(4, 2 * d - 3)
    for j in range(1, d - 1):
        value *= angular_integral(0, 2 * d - 2 * j - 3)
    return value


def haar_moment(d: int, pattern: Tuple[int, int, int, int]) -> float:
    """Exact <alpha_j conj(alpha_k) alpha_r conj(alpha_m)> for uniform pure states."""
    j, k, r, m = pattern
    return ((j == k) * (r == m) + (j == m) * (k == r)) / (d * (d + 1))


def moment_estimate(
    states: np.ndarray, pattern: Tuple[int, int, int, int]
) -> McEstimate:
    """Sample estimate of Re <alpha_j conj(alpha_k) alpha_r conj(alpha_m)>."""
    j, k, r, m = pattern
    values = states[:, j] * states[:, k].conj() * states[:, r] * states[:, m].conj()
    return McEstimate.from_samples(np.real(values))


def _boundary_point(d: int, mu: int, a: float) -> Tuple[float, float]:
    gamma = boundary_state(d, mu, a)
    return entanglement_entropy(gamma), normalized_quantum_contribution(gamma)


def boundary_curve(d: int, mu: int, points: int = 201) -> List[Tuple[float, float]]:
    """(E, f'_Q) sampled along the boundary family mu over its whole a-range."""
    upper = 1.0 if mu == d - 1 else 1 / np.sqrt(mu + 1)
    return [_boundary_point(d, mu, a) for a in np.linspace(0.0, upper, points)]


def envelope_bounds(d: int, entropy: float) -> Tuple[float, float]:
    """Lower and upper f'_Q at a given normalised entanglement entropy.

    The lower boundary is made of the families mu with a <= 1/sqrt(mu + 1),
    each running from the rank-mu to the rank-(mu+1) state; the upper one is
    the family mu = d - 1 with a >= 1/sqrt(d). Entropy is monotone along each
    piece, so the boundary point is found by root finding in a.
    """
    d = check_dim(d)
    entropy = float(np.clip(entropy, 0.0, 1.0))

    def solve(mu: int, low: float, high: float) -> float:
        def excess(a: float) -> float:
            return _boundary_point(d, mu, a)[0] - entropy

        f_low, f_high = excess(low), excess(high)
        if abs(f_low) <= ENDPOINT_TOL:
            return _boundary_point(d, mu, low)[1]
        if abs(f_high) <= ENDPOINT_TOL:
            return _boundary_point(d, mu, high)[1]
        if np.sign(f_low) == np.sign(f_high):
            # Rounding at the ends of the piece: take the nearer endpoint.
            nearest = low if abs(f_low) < abs(f_high) else high
            return _boundary_point(d, mu, nearest)[1]
        return _boundary_point(d, mu, brentq(excess, low, high, xtol=1e-15))[1]

    upper = solve(d - 1, 1 / np.sqrt(d), 1.0)
    # A rank-nu entropy is the a = 0 end of family nu.
    rank = d**entropy
    nearest = np.round(rank)
    mu = nearest if abs(rank - nearest) <= 1e-9 else np.floor(rank)
    mu = int(np.clip(mu, 1, d - 1))
    lower = solve(mu, 0.0, 1 / np.sqrt(mu + 1))
    return lower, upper


def _scatter_chunk(task) -> List[Tuple[float, float]]:
    seed, indices, d = task
    basis = max_entangled_basis(d)
    points = []
    for index in indices:
        gamma = sample_schmidt_channel(d, seed.generator(index))
        points.append(
            (entanglement_entropy(gamma), normalized_quantum_contribution(gamma, basis))
        )
    return points


def scatter_experiment(
    d: int,
    n: int,
    seed: int = 0,
    curve_points: int = 201,
    workers: Optional[int] = 1,
) -> ScatterResult:
    """Random Schmidt channels mapped to (entanglement, f'_Q), plus the boundary.

    The measurement basis is the maximally entangled one.
    """
    d = check_dim(d)
    root = RngSeed(seed=seed)
    blocks = np.array_split(np.arange(n), max(1, min(n, 4 * (workers or 1))))
    with start_action(action_type="scatter_experiment", d=d, n=n, seed=seed):
        chunks = evaluate(
            _scatter_chunk, [(root, block.tolist(), d) for block in blocks], workers
        )
        records = [
            ScatterRecord(entanglement=e, fq_normalized=f)
            for chunk in chunks
            for e, f in chunk
        ]
        curves = {mu: boundary_curve(d, mu, curve_points) for mu in range(1, d)}
        return ScatterResult(d=d, n=n, seed=seed, records=records, curves=curves)
