"""Analytic average fidelities.

Three routes to the input-averaged fidelity live here and are required to
agree on their common domain:

* ``fidelity_weyl_raw``: the Haar-averaged double sum over Weyl weights of
  the three qudits, with the flip-index constraint q_A = q_I + q_B hoisted.
* ``fidelity_weyl_closed``: the same quantity reduced to the region
  coefficients (a0, af, ap, ac) of each qudit, f_Q and tilde_f.
* ``fidelity_computational``: the double sum over Kraus operators written
  in the computational basis, which also covers amplitude damping.

Register roles: coefficients ``a`` act on the input qudit, ``b`` on Alice's
channel qudit and ``c`` on Bob's.
"""
import logging
from typing import Optional, Tuple, Union

import numpy as np
from eliot import start_action
from pydantic import BaseModel
from scipy.optimize import brentq

from quditport.noise import (
    KrausChannel,
    NoiseKind,
    NoiseSpec,
    NoiseSpecError,
    ScenarioSpec,
    WeylCoefficients,
    coefficient_matrix,
    kraus_operators,
    weyl_coefficients,
)
from quditport.qudit import (
    DimensionError,
    MeasurementBasis,
    QuditError,
    SchmidtChannel,
    check_dim,
    is_maximally_entangled,
    max_entangled_basis,
)
from quditport.utils.constants import default_settings

logger = logging.getLogger(__name__)


class ClosedFormError(QuditError):
    """A closed form was applied outside its domain."""


class FidelityBreakdown(BaseModel):
    d: int
    total: float
    classical_part: float
    quantum_part: float
    tilde_f: float


class ThresholdReport(BaseModel):
    kind: NoiseKind
    d: int
    p_star: float
    fidelity_at_threshold: float


def _defaults(
    d: int, basis: Optional[MeasurementBasis], gamma: Optional[SchmidtChannel]
) -> Tuple[MeasurementBasis, SchmidtChannel]:
    if basis is None:
        basis = max_entangled_basis(d)
    if gamma is None:
        gamma = SchmidtChannel.maximally_entangled(d)
    return basis, gamma


def _check_pair(basis: MeasurementBasis, gamma: SchmidtChannel) -> int:
    if basis.d != gamma.d:
        raise DimensionError(
            f"Basis has d={basis.d} but the channel has d={gamma.d}."
        )
    return check_dim(basis.d)


def _phase_table(d: int) -> np.ndarray:
    """P[j, k, t] = omega**((k - j) * t)."""
    idx = np.arange(d)
    exponents = (idx[None, :, None] - idx[:, None, None]) * idx[None, None, :]
    return np.exp(2j * np.pi * np.mod(exponents, d) / d)


def _measurement_kernel(basis: MeasurementBasis) -> np.ndarray:
    """M[j, k] = sum_mu beta_j,mu conj(beta_k,mu) omega**(mu (k - j))."""
    beta = basis.beta
    return np.einsum("jm,km,jkm->jk", beta, beta.conj(), _phase_table(basis.d))


def _shifted_gamma(gamma: SchmidtChannel) -> np.ndarray:
    """G[j, k, q] = sum_nu gamma_{k+nu+q} conj(gamma_{j+nu+q})."""
    d = gamma.d
    idx = np.arange(d)
    shifted = gamma.gamma[
        (idx[:, None, None] + idx[None, :, None] + idx[None, None, :]) % d
    ]
    return np.einsum("knq,jnq->jkq", shifted, shifted.conj())


def classical_fidelity(d: int) -> float:
    """Best fidelity reachable without entanglement, 2 / (d + 1)."""
    d = check_dim(d)
    return 2.0 / (d + 1)


def quantum_contribution(basis: MeasurementBasis, gamma: SchmidtChannel) -> float:
    """Entanglement-dependent part f_Q of the noiseless fidelity.

    f_Q = 2/(d(d+1)) sum_{m,n; j>k} Re[omega**(m(k-j)) beta_jm conj(beta_km)
    gamma_{k+n} conj(gamma_{j+n})].
    """
    d = _check_pair(basis, gamma)
    kernel = _measurement_kernel(basis) * _shifted_gamma(gamma)[:, :, 0]
    lower = np.tril(np.ones((d, d), dtype=bool), k=-1)
    return float(2.0 / (d * (d + 1)) * np.sum(np.real(kernel[lower])))


def tilde_f(basis: MeasurementBasis, gamma: SchmidtChannel) -> float:
    """tilde_f = (1/d) sum_{j,k,mu,nu; q>=1} beta_j,mu conj(beta_k,mu)
    omega**(mu(k-j)) gamma_{k+nu+q} conj(gamma_{j+nu+q})."""
    d = _check_pair(basis, gamma)
    shifted = _shifted_gamma(gamma)[:, :, 1:]
    total = np.einsum("jk,jkq->", _measurement_kernel(basis), shifted)
    return float(np.real(total) / d)


def noiseless_fidelity(
    basis: MeasurementBasis, gamma: SchmidtChannel
) -> FidelityBreakdown:
    d = _check_pair(basis, gamma)
    f_c = classical_fidelity(d)
    kernel = _measurement_kernel(basis) * _shifted_gamma(gamma)[:, :, 0]
    lower = np.tril(np.ones((d, d), dtype=bool), k=-1)
    raw_sum = np.sum(np.real(kernel[lower]))
    return FidelityBreakdown(
        d=d,
        total=float(f_c * (1 + raw_sum / d)),
        classical_part=f_c,
        quantum_part=quantum_contribution(basis, gamma),
        tilde_f=tilde_f(basis, gamma),
    )


def normalized_quantum_contribution(
    gamma: SchmidtChannel, basis: Optional[MeasurementBasis] = None
) -> float:
    """f'_Q = (d + 1) f_Q / (d - 1), which lies in [0, 1] for Schmidt-form channels."""
    d = gamma.d
    basis, _ = _defaults(d, basis, gamma)
    return (d + 1) * quantum_contribution(basis, gamma) / (d - 1)


def boundary_state(d: int, mu: int, a: float) -> SchmidtChannel:
    """Family a|00> + sqrt((1 - a**2)/mu) (|11> + ... + |mu mu>).

    Args:
        d: Qudit dimension.
        mu: Family index, 1 <= mu <= d - 1.
        a: Weight of |00>; a in [0, 1/sqrt(mu + 1)] for mu < d - 1 and
            a in [0, 1] for mu = d - 1.
    """
    d = check_dim(d)
    if not 1 <= mu <= d - 1:
        raise ClosedFormError(f"Family index must lie in [1, {d - 1}], got {mu}.")
    upper = 1.0 if mu == d - 1 else 1 / np.sqrt(mu + 1)
    tol = default_settings().tolerances.construction
    if not -tol <= a <= upper + tol:
        raise ClosedFormError(f"a={a} is outside [0, {upper}] for mu={mu}.")
    a = float(np.clip(a, 0.0, upper))
    gamma = np.zeros(d)
    gamma[0] = a
    gamma[1 : mu + 1] = np.sqrt((1 - a * a) / mu)
    return SchmidtChannel(gamma=gamma)


def rank_state(d: int, nu: int) -> SchmidtChannel:
    """Maximally symmetric rank-nu state (|00> + ... + |nu-1 nu-1>)/sqrt(nu)."""
    d = check_dim(d)
    if not 1 <= nu <= d - 1:
        raise ClosedFormError(f"Rank must lie in [1, {d - 1}], got {nu}.")
    gamma = np.zeros(d)
    gamma[:nu] = 1 / np.sqrt(nu)
    return SchmidtChannel(gamma=gamma)


def single_qudit_fidelity(
    kind: Union[str, NoiseKind],
    p: float,
    d: int,
    basis: Optional[MeasurementBasis] = None,
    gamma: Optional[SchmidtChannel] = None,
) -> float:
    """Fidelity when exactly one of the three qudits is noisy.

    The result does not depend on which qudit carries the noise. Amplitude
    damping is only available here for maximal entanglement; other cases go
    through ``fidelity_computational``.
    """
    kind = NoiseKind.parse(kind)
    d = check_dim(d)
    basis, gamma = _defaults(d, basis, gamma)
    f_c = classical_fidelity(d)
    if kind is NoiseKind.NONE:
        raise ClosedFormError("single_qudit_fidelity needs a noisy kind.")
    if kind is NoiseKind.AD:
        if not is_maximally_entangled(basis, gamma):
            raise ClosedFormError(
                "The amplitude-damping closed form assumes maximal entanglement."
            )
        return f_c * (
            (d * d - d + 2) / (2 * d)
            - (d - 1) ** 2 / (2 * d) * p
            + (d - 1) / d * np.sqrt(1 - p)
        )
    f_q = quantum_contribution(basis, gamma)
    if kind in (NoiseKind.F, NoiseKind.FP):
        return f_c * (1 - p / 2) + f_q * (1 - p)
    if kind is NoiseKind.P:
        return f_c + f_q * (1 - d * p / (d - 1))
    return f_c * (1 - (d - 1) * p / (2 * d)) + f_q * (1 - p)


def threshold(kind: Union[str, NoiseKind], d: int) -> ThresholdReport:
    """Noise fraction at which single-qudit noise drops the fidelity to f_C.

    Maximal entanglement is assumed.
    """
    kind = NoiseKind.parse(kind)
    d = check_dim(d)
    if kind is NoiseKind.NONE:
        raise ClosedFormError("A noiseless channel has no threshold.")
    if kind is NoiseKind.D:
        p_star = d / (d + 1)
    elif kind is NoiseKind.AD:
        p_star = (d + 2 * np.sqrt(d)) / (np.sqrt(d) + 1) ** 2
    else:
        p_star = (d - 1) / d
    return ThresholdReport(
        kind=kind,
        d=d,
        p_star=p_star,
        fidelity_at_threshold=single_qudit_fidelity(kind, p_star, d),
    )


def restoration_limit(d: int) -> float:
    """Fidelity of (none, F, F) or (none, P, P) when both noise fractions are 1."""
    d = check_dim(d)
    return (2 * d - 1) / (d * d - 1)


def optimal_phase_fidelity(d: int, p: float) -> float:
    """Best single-qudit d-phase-flip fidelity over measurement phases."""
    d = check_dim(d)
    if p <= (d - 1) / d:
        return 1 - d * p / (d + 1)
    return (d * p + d - 1) / (d * d - 1)


def _weyl_transform(weights: np.ndarray) -> np.ndarray:
    """hat_x[j, k, q] = sum_p x_pq**2 omega**((k - j) p)."""
    d = weights.shape[0]
    return np.einsum("jkp,pq->jkq", _phase_table(d), weights)


def _as_weights(value: Union[np.ndarray, NoiseSpec], d: int) -> np.ndarray:
    if isinstance(value, NoiseSpec):
        if not value.kind.is_weyl:
            raise NoiseSpecError("Amplitude damping has no Weyl-coefficient form.")
        return coefficient_matrix(value, d)
    weights = np.asarray(value, dtype=float)
    if weights.shape != (d, d):
        raise NoiseSpecError(f"Expected {d}x{d} Weyl weights, got {weights.shape}.")
    return weights


def fidelity_weyl_raw(
    basis: MeasurementBasis,
    gamma: SchmidtChannel,
    a: Union[np.ndarray, NoiseSpec],
    b: Union[np.ndarray, NoiseSpec],
    c: Union[np.ndarray, NoiseSpec],
) -> float:
    """Average fidelity from the squared Weyl weights of the three qudits.

    <F> = 1/(d+1) {1 + 1/d sum beta_j,mu conj(beta_k,mu)
    omega**((k-j)(mu+p1+p2+p3)) gamma_{k+nu+q2} conj(gamma_{j+nu+q2})
    a_p1q1 b_p2q2 c_p3q3 delta(q2, q1+q3)}, with the delta hoisted out.

    Args:
        basis: Alice's measurement basis.
        gamma: Channel Schmidt coefficients.
        a, b, c: Squared weights a_mn**2 (or Weyl noise specs) of the
            input, Alice and Bob qudits.
    """
    d = _check_pair(basis, gamma)
    a, b, c = (_as_weights(x, d) for x in (a, b, c))
    with start_action(action_type="fidelity_weyl_raw", d=d):
        idx = np.arange(d)
        flips = (idx[:, None] + idx[None, :]) % d
        a_hat, b_hat, c_hat = (_weyl_transform(x) for x in (a, b, c))
        channel = b_hat * _shifted_gamma(gamma)
        inner = np.einsum("jkx,jky,jkxy->jk", a_hat, c_hat, channel[:, :, flips])
        total = np.sum(_measurement_kernel(basis) * inner)
        return float((1 + np.real(total) / d) / (d + 1))


def fidelity_weyl_closed(
    d: int,
    f_q: float,
    tilde: float,
    a: WeylCoefficients,
    b: WeylCoefficients,
    c: WeylCoefficients,
) -> float:
    """Region-coefficient closed form of the Weyl-noise fidelity.

    Args:
        d: Qudit dimension.
        f_q: Quantum contribution of the noiseless protocol.
        tilde: ``tilde_f`` of the basis and channel.
        a, b, c: Region coefficients on the input, Alice and Bob qudits.
    """
    a0, af, ap, ac = a.squares()
    b0, bf, bp, bc = b.squares()
    c0, cf, cp, cc = c.squares()

    flips_free = d * (
        bp * (a0 * c0 + (d - 1) * af * cf)
        + (b0 + (d - 2) * bp)
        * (ap * c0 + a0 * cp + (d - 1) * (af * cc + ac * cf))
        + ((d - 2) * b0 + (d * d - 3 * d + 3) * bp) * (ap * cp + (d - 1) * ac * cc)
    )
    flips_paired = (
        d
        * (d - 1)
        * (
            ((d - 2) * bf + (d * d - 3 * d + 3) * bc)
            * (ap * cc + ac * cp + (d - 2) * ac * cc)
            + bc * (af * c0 + a0 * cf + (d - 2) * af * cf)
            + (bf + (d - 2) * bc)
            * (
                ac * c0
                + a0 * cc
                + af * cp
                + ap * cf
                + (d - 2) * (af * cc + ac * cf)
            )
        )
    )
    quantum = (
        (b0 - bp)
        * ((a0 - ap) * (c0 - cp) + (d - 1) * (af - ac) * (cf - cc))
        * (1 + (d + 1) * f_q)
    )
    crossed = (
        (bf - bc)
        * (
            (a0 - ap) * (cf - cc)
            + (af - ac) * (c0 - cp)
            + (d - 2) * (af - ac) * (cf - cc)
        )
        * tilde
    )
    return float((1 + flips_free + flips_paired + quantum + crossed) / (d + 1))


def _shift_pairs(tensor: np.ndarray) -> np.ndarray:
    """S[n, x, l, y, q] = T[x+n, l, y+n, q]."""
    d = tensor.shape[0]
    idx = np.arange(d)
    shifted = (idx[:, None] + idx[None, :]) % d
    return tensor[
        shifted[:, :, None, None, None],
        idx[None, None, :, None, None],
        shifted[:, None, None, :, None],
        idx[None, None, None, None, :],
    ]


def _bob_kernels(
    basis: MeasurementBasis,
    gamma: SchmidtChannel,
    input_transfer: np.ndarray,
    alice_transfer: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Everything in the computational-basis fidelity except Bob's channel.

    The fidelity is (sum(Y1 * S_c) + sum(Y2 * D_c)).real / (d (d + 1)) where
    S_c = _shift_pairs(T_c) and D_c[n, l, q] = sum_r T_c[r+n, l, r+n, q].
    """
    d = basis.d
    beta, g = basis.beta, gamma.gamma
    idx = np.arange(d)
    exponents = idx[:, None, None] * (idx[None, :, None] - idx[None, None, :])
    phases = np.exp(2j * np.pi * np.mod(exponents, d) / d)
    alice = _shift_pairs(alice_transfer)
    swapped = np.einsum(
        "km,jm,kajb,l,q,nkljq,mab->nalbq",
        beta.conj(),
        beta,
        input_transfer,
        g,
        g.conj(),
        alice,
        phases,
        optimize="greedy",
    )
    direct = np.einsum(
        "km,jm,kj,l,q,nkljq->nlq",
        beta.conj(),
        beta,
        np.einsum("kaja->kj", input_transfer),
        g,
        g.conj(),
        alice,
        optimize="greedy",
    )
    return swapped, direct


def _bob_factors(bob_transfer: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    shifted = _shift_pairs(bob_transfer)
    diagonal = np.einsum("nrlrq->nlq", shifted)
    return shifted, diagonal


def fidelity_computational(
    basis: MeasurementBasis,
    gamma: SchmidtChannel,
    input_channel: KrausChannel,
    alice_channel: KrausChannel,
    bob_channel: KrausChannel,
) -> float:
    """Average fidelity from Kraus operators in the computational basis.

    <F> = 1/(d(d+1)) sum beta_j,mu conj(beta_k,mu) gamma_l conj(gamma_q)
    a_{k,n1} b_{k+nu,l} conj(b_{j+nu,q}) conj(c_{m+nu,q})
    [conj(a_{j,n1}) c_{m+nu,l} + omega**(mu(n1-m)) conj(a_{j,m}) c_{n1+nu,l}],
    summed over all indices and all Kraus operators. Works for every noise
    kind, amplitude damping included.
    """
    d = _check_pair(basis, gamma)
    check_dim(d, cap=default_settings().oracle_max_dim)
    for channel in (input_channel, alice_channel, bob_channel):
        if channel.d != d:
            raise DimensionError(
                f"Channel dimension {channel.d} does not match d={d}."
            )
    with start_action(action_type="fidelity_computational", d=d):
        swapped, direct = _bob_kernels(
            basis,
            gamma,
            input_channel.transfer_tensor(),
            alice_channel.transfer_tensor(),
        )
        shifted, diagonal = _bob_factors(bob_channel.transfer_tensor())
        total = np.sum(swapped * shifted) + np.sum(direct * diagonal)
        return float(np.real(total) / (d * (d + 1)))


def scenario_fidelity(
    scenario: ScenarioSpec,
    d: int,
    basis: Optional[MeasurementBasis] = None,
    gamma: Optional[SchmidtChannel] = None,
) -> float:
    """Average fidelity of a scenario by the fastest applicable closed form."""
    d = check_dim(d)
    basis, gamma = _defaults(d, basis, gamma)
    if scenario.is_weyl:
        coefficients = [weyl_coefficients(s.kind, s.p, d) for s in scenario.specs]
        return fidelity_weyl_closed(
            d,
            quantum_contribution(basis, gamma),
            tilde_f(basis, gamma),
            *coefficients,
        )
    channels = [kraus_operators(spec, d) for spec in scenario.specs]
    return fidelity_computational(basis, gamma, *channels)


def input_noise_tolerance(
    input_kind: Union[str, NoiseKind],
    channel_kind: Union[str, NoiseKind],
    d: int,
    basis: Optional[MeasurementBasis] = None,
    gamma: Optional[SchmidtChannel] = None,
) -> float:
    """Largest input noise fraction keeping (X, Y, Y) with p_Y = 1 above f_C.

    Returns 0.0 when the fidelity is never above f_C and 1.0 when it always is.
    """
    d = check_dim(d)
    f_c = classical_fidelity(d)

    def excess(p: float) -> float:
        scenario = ScenarioSpec.from_kinds(
            (input_kind, channel_kind, channel_kind), (p, 1.0, 1.0)
        )
        return scenario_fidelity(scenario, d, basis, gamma) - f_c

    low, high = excess(0.0), excess(1.0)
    if low <= 0:
        return 0.0
    if high > 0:
        return 1.0
    return float(brentq(excess, 0.0, 1.0, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def region_fraction_below_classical(
    d: int,
    resolution: int = 401,
    alice_kind: Union[str, NoiseKind] = NoiseKind.AD,
    bob_kind: Union[str, NoiseKind] = NoiseKind.AD,
    input_spec: Optional[NoiseSpec] = None,
    basis: Optional[MeasurementBasis] = None,
    gamma: Optional[SchmidtChannel] = None,
) -> float:
    """Fraction of the (p_A, p_B) unit square where <F> < f_C.

    The square is sampled on a ``resolution`` x ``resolution`` midpoint grid.
    The fidelity is linear in Bob's transfer tensor, so the grid reduces to
    one matrix product between per-p_A kernels and per-p_B factors.
    """
    d = check_dim(d, cap=default_settings().oracle_max_dim)
    if resolution < 2:
        raise ClosedFormError("resolution must be at least 2.")
    basis, gamma = _defaults(d, basis, gamma)
    input_spec = input_spec or NoiseSpec()
    fractions = (np.arange(resolution) + 0.5) / resolution
    f_c = classical_fidelity(d)
    with start_action(
        action_type="region_fraction_below_classical", d=d, resolution=resolution
    ):
        input_transfer = kraus_operators(input_spec, d).transfer_tensor()
        kernels, factors = [], []
        for p in fractions:
            alice = kraus_operators(NoiseSpec(kind=alice_kind, p=p), d)
            swapped, direct = _bob_kernels(
                basis, gamma, input_transfer, alice.transfer_tensor()
            )
            kernels.append(np.concatenate([swapped.ravel(), direct.ravel()]))
            bob = kraus_operators(NoiseSpec(kind=bob_kind, p=p), d)
            shifted, diagonal = _bob_factors(bob.transfer_tensor())
            factors.append(np.concatenate([shifted.ravel(), diagonal.ravel()]))
        grid = np.real(np.stack(kernels) @ np.stack(factors).T) / (d * (d + 1))
        fraction = float(np.mean(grid < f_c))
        logger.debug(f"Below-classical fraction for d={d}: {fraction}")
        return fraction
