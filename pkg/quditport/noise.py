"""Noise channels on single qudits.

Every channel is a Kraus map. The Weyl-diagonal kinds (dit-flip F,
d-phase-flip P, dit-phase-flip FP and depolarizing D) are also available in
coefficient form: the squared weights a_mn**2 of the Weyl operators U_mn.
Amplitude damping (AD) only exists in computational-basis form.

The name with which a builder is registered is the ``NoiseKind`` it builds.
"""
import logging
from enum import Enum
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, confloat, conint, root_validator, validator

from quditport.qudit import (
    ArrayModel,
    DensityMatrix,
    QuditError,
    check_dim,
    resolve_register,
    weyl_operator,
)
from quditport.utils.constants import default_settings

logger = logging.getLogger(__name__)

noise_registry: Dict["NoiseKind", Callable[["NoiseSpec", int], np.ndarray]] = {}


class NoiseSpecError(QuditError):
    """A noise specification is invalid for the requested operation."""


class NoiseKind(str, Enum):
    NONE = "none"
    F = "F"
    P = "P"
    FP = "FP"
    D = "D"
    AD = "AD"

    @property
    def is_weyl(self) -> bool:
        return self is not NoiseKind.AD

    @property
    def symbol(self) -> str:
        return "∅" if self is NoiseKind.NONE else self.value

    @classmethod
    def parse(cls, text: Union[str, "NoiseKind"]) -> "NoiseKind":
        if isinstance(text, NoiseKind):
            return text
        token = str(text).strip()
        if token.lower() in ("none", "∅", "0", ""):
            return cls.NONE
        try:
            return cls(token.upper())
        except ValueError:
            raise NoiseSpecError(
                f"Unknown noise kind {text!r}; expected one of "
                f"{', '.join(k.value for k in cls)}."
            )


class NoiseSpec(BaseModel):
    """A noise kind with its noise fraction p."""

    kind: NoiseKind = NoiseKind.NONE
    p: confloat(ge=0.0, le=1.0) = 0.0

    class Config:
        allow_mutation = False

    @validator("kind", pre=True)
    def parse_kind(cls, value):
        return NoiseKind.parse(value)

    @property
    def is_noiseless(self) -> bool:
        return self.kind is NoiseKind.NONE or self.p == 0.0

    @property
    def label(self) -> str:
        if self.kind is NoiseKind.NONE:
            return "none"
        return f"{self.kind.value}:{self.p:g}"


class ScenarioSpec(BaseModel):
    """Noise on the input qudit, Alice's channel qudit and Bob's channel qudit."""

    input: NoiseSpec = NoiseSpec()
    alice: NoiseSpec = NoiseSpec()
    bob: NoiseSpec = NoiseSpec()

    class Config:
        allow_mutation = False

    @property
    def specs(self) -> Tuple[NoiseSpec, NoiseSpec, NoiseSpec]:
        return self.input, self.alice, self.bob

    @property
    def kinds(self) -> Tuple[NoiseKind, NoiseKind, NoiseKind]:
        return tuple(spec.kind for spec in self.specs)

    @property
    def is_weyl(self) -> bool:
        return all(spec.kind.is_weyl for spec in self.specs)

    @property
    def label(self) -> str:
        return "(" + ",".join(kind.symbol for kind in self.kinds) + ")"

    @classmethod
    def from_kinds(
        cls,
        kinds: Tuple[Union[str, NoiseKind], ...],
        fractions: Tuple[float, float, float],
    ) -> "ScenarioSpec":
        specs = [NoiseSpec(kind=k, p=p) for k, p in zip(kinds, fractions)]
        return cls(input=specs[0], alice=specs[1], bob=specs[2])


class WeylCoefficients(BaseModel):
    """Region coefficients of a Weyl-diagonal channel.

    a0 weighs U_00, af the flips U_0n, ap the phase shifts U_m0 and ac the
    combined errors U_mn with m, n >= 1.
    """

    d: conint(ge=2)
    a0: confloat(ge=0.0)
    af: confloat(ge=0.0) = 0.0
    ap: confloat(ge=0.0) = 0.0
    ac: confloat(ge=0.0) = 0.0

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def normalized(cls, values):
        d = values["d"]
        a0, af, ap, ac = (values[k] for k in ("a0", "af", "ap", "ac"))
        total = a0**2 + (d - 1) * af**2 + (d - 1) * ap**2 + (d - 1) ** 2 * ac**2
        if abs(total - 1.0) > default_settings().tolerances.construction:
            raise ValueError(f"Weyl coefficients are not normalized (sum {total!r})")
        return values

    def squares(self) -> Tuple[float, float, float, float]:
        return self.a0**2, self.af**2, self.ap**2, self.ac**2

    def matrix(self) -> np.ndarray:
        """The d x d matrix of squared weights a_mn**2."""
        a0, af, ap, ac = self.squares()
        matrix = np.full((self.d, self.d), ac)
        matrix[0, :] = af
        matrix[:, 0] = ap
        matrix[0, 0] = a0
        return matrix

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "WeylCoefficients":
        """Reads region coefficients back from a squared-weight matrix.

        Raises:
            NoiseSpecError: if the weights are not constant on each region.
        """
        matrix = np.asarray(matrix, dtype=float)
        d = matrix.shape[0]
        regions = (matrix[0, 1:], matrix[1:, 0], matrix[1:, 1:])
        tol = default_settings().tolerances.construction
        for region in regions:
            if np.ptp(region) > tol:
                raise NoiseSpecError("Weights are not uniform over the Weyl regions.")
        return cls(
            d=d,
            a0=np.sqrt(matrix[0, 0]),
            af=np.sqrt(matrix[0, 1]),
            ap=np.sqrt(matrix[1, 0]),
            ac=np.sqrt(matrix[1, 1]),
        )


class KrausChannel(ArrayModel):
    """Kraus operators stacked along the first axis, shape (K, d, d)."""

    operators: np.ndarray
    kind: NoiseKind = NoiseKind.NONE
    p: float = 0.0

    @validator("operators", pre=True)
    def as_operator_stack(cls, value):
        array = np.array(value, dtype=complex, copy=True)
        if array.ndim != 3 or array.shape[1] != array.shape[2]:
            raise ValueError("operators must have shape (K, d, d)")
        array.setflags(write=False)
        return array

    @validator("operators")
    def complete(cls, value):
        d = value.shape[1]
        completeness = np.einsum("kba,kbc->ac", value.conj(), value)
        deviation = np.max(np.abs(completeness - np.eye(d)))
        if deviation > default_settings().tolerances.construction:
            raise ValueError(
                f"Kraus operators violate completeness (deviation {deviation:.3e})"
            )
        return value

    @property
    def d(self) -> int:
        return self.operators.shape[1]

    def transfer_tensor(self) -> np.ndarray:
        """T[x, l, y, q] = sum_k E_k[x, l] * conj(E_k[y, q])."""
        return np.einsum("kxl,kyq->xlyq", self.operators, self.operators.conj())


def register_noise(kind: NoiseKind):
    """Register a Kraus builder for a noise kind."""

    def decorator(func: Callable[[NoiseSpec, int], np.ndarray]):
        noise_registry[kind] = func
        return func

    return decorator


def weyl_coefficients(
    kind: Union[str, NoiseKind], p: float, d: int
) -> WeylCoefficients:
    """Region coefficients of a Weyl-diagonal noise kind.

    Args:
        kind: Any kind except AD.
        p: Noise fraction in [0, 1].
        d: Qudit dimension.

    Returns:
        The ``WeylCoefficients`` of the channel.
    """
    kind = NoiseKind.parse(kind)
    d = check_dim(d)
    if not 0.0 <= p <= 1.0:
        raise NoiseSpecError(f"Noise fraction must lie in [0, 1], got {p}.")
    if kind is NoiseKind.AD:
        raise NoiseSpecError("Amplitude damping has no Weyl-coefficient form.")
    if kind is NoiseKind.NONE:
        return WeylCoefficients(d=d, a0=1.0)
    if kind is NoiseKind.D:
        return WeylCoefficients(
            d=d,
            a0=np.sqrt(max(0.0, 1 - (d * d - 1) * p / (d * d))),
            af=np.sqrt(p) / d,
            ap=np.sqrt(p) / d,
            ac=np.sqrt(p) / d,
        )
    a0 = np.sqrt(1 - p)
    if kind is NoiseKind.F:
        return WeylCoefficients(d=d, a0=a0, af=np.sqrt(p / (d - 1)))
    if kind is NoiseKind.P:
        return WeylCoefficients(d=d, a0=a0, ap=np.sqrt(p / (d - 1)))
    return WeylCoefficients(d=d, a0=a0, ac=np.sqrt(p) / (d - 1))


def coefficient_matrix(spec: NoiseSpec, d: int) -> np.ndarray:
    """Squared Weyl weights a_mn**2 of a noise spec, shape (d, d)."""
    return weyl_coefficients(spec.kind, spec.p, d).matrix()


def _weyl_kraus(spec: NoiseSpec, d: int) -> np.ndarray:
    weights = coefficient_matrix(spec, d)
    operators = [
        np.sqrt(weights[m, n]) * weyl_operator(d, (m, n))
        for m in range(d)
        for n in range(d)
        if weights[m, n] > 0
    ]
    return np.stack(operators)


for _kind in (NoiseKind.NONE, NoiseKind.F, NoiseKind.P, NoiseKind.FP, NoiseKind.D):
    register_noise(_kind)(_weyl_kraus)


@register_noise(NoiseKind.AD)
def _amplitude_damping_kraus(spec: NoiseSpec, d: int) -> np.ndarray:
    operators = np.zeros((d, d, d), dtype=complex)
    operators[0] = np.diag([1.0] + [np.sqrt(1 - spec.p)] * (d - 1))
    for j in range(1, d):
        operators[j, 0, j] = np.sqrt(spec.p)
    return operators


def kraus_operators(spec: NoiseSpec, d: int) -> KrausChannel:
    """Kraus operators of a noise spec in canonical order.

    Weyl kinds list sqrt(a_mn**2) U_mn in (m, n) lexicographic order,
    skipping zero weights; AD lists E_0 .. E_{d-1}.
    """
    d = check_dim(d)
    builder = noise_registry[spec.kind]
    return KrausChannel(operators=builder(spec, d), kind=spec.kind, p=spec.p)


def _local_sandwich(
    tensor: np.ndarray, operators: np.ndarray, axis: int, registers: int
) -> np.ndarray:
    """sum_k E_k rho E_k^dagger with E_k acting on one register."""
    letters = "abcdefgh"
    kets = list(letters[:registers])
    bras = list(letters[registers : 2 * registers])
    out_kets, out_bras = kets.copy(), bras.copy()
    out_kets[axis], out_bras[axis] = "x", "y"
    subscripts = (
        f"kx{kets[axis]},{''.join(kets + bras)},ky{bras[axis]}"
        f"->{''.join(out_kets + out_bras)}"
    )
    return np.einsum(subscripts, operators, tensor, operators.conj(), optimize=True)


def apply_channel(
    rho: DensityMatrix, channel: KrausChannel, register: Union[int, str]
) -> DensityMatrix:
    """Applies a single-qudit channel to one register of ``rho``.

    Args:
        rho: Density matrix on 1 to 3 registers.
        channel: The Kraus channel; its dimension must match ``rho.d``.
        register: Target register index or name.

    Returns:
        The transformed density matrix; other registers are untouched.
    """
    axis = resolve_register(register, rho.registers)
    if channel.d != rho.d:
        raise NoiseSpecError(
            f"Channel dimension {channel.d} does not match state dimension {rho.d}."
        )
    tensor = _local_sandwich(rho.tensor(), channel.operators, axis, rho.registers)
    return DensityMatrix.from_tensor(
        tensor, registers=rho.registers, normalized=rho.normalized
    )


def apply_weyl_coefficient_form(
    rho: DensityMatrix, weights: np.ndarray, register: Union[int, str]
) -> DensityMatrix:
    """Applies a Weyl-diagonal channel through its coefficient update.

    On the target register rho'_mn = sum_kl omega**(k(m-n)) rho_{m+l, n+l} a_kl**2,
    written without any Kraus matrix.

    Args:
        rho: Density matrix on 1 to 3 registers.
        weights: Squared Weyl weights a_kl**2, shape (d, d).
        register: Target register index or name.
    """
    d, registers = rho.d, rho.registers
    axis = resolve_register(register, registers)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (d, d):
        raise NoiseSpecError(f"Expected a {d}x{d} weight matrix, got {weights.shape}.")
    tensor = rho.tensor()
    ket_axis, bra_axis = axis, registers + axis

    index = np.arange(d)
    shape = [1] * (2 * registers)
    shape[ket_axis] = d
    ket_index = index.reshape(shape)
    shape[ket_axis], shape[bra_axis] = 1, d
    bra_index = index.reshape(shape)

    result = np.zeros_like(tensor)
    for k in range(d):
        phase = np.exp(2j * np.pi * np.mod(k * (ket_index - bra_index), d) / d)
        for shift in range(d):
            if weights[k, shift] == 0:
                continue
            shifted = np.roll(tensor, -shift, axis=(ket_axis, bra_axis))
            result += weights[k, shift] * phase * shifted
    return DensityMatrix.from_tensor(
        result, registers=registers, normalized=rho.normalized
    )


def is_unital(channel: KrausChannel, tol: Optional[float] = None) -> bool:
    """True when the channel maps I/d to I/d."""
    if tol is None:
        tol = default_settings().tolerances.construction
    image = np.einsum("kab,kcb->ac", channel.operators, channel.operators.conj())
    return bool(np.max(np.abs(image - np.eye(channel.d))) <= tol)
