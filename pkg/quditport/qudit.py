"""Qudit states, Weyl operators and Bell-like measurement bases.

Every multi-qudit object in the package uses the register order (I, A, B):
the input qudit, Alice's half of the channel and Bob's half. A basis index
of a three-register state is ``j = i_I * d**2 + i_A * d + i_B``; two- and
one-register states drop the leading registers.
"""
import logging
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, conint, root_validator, validator

from quditport.utils.constants import default_settings

logger = logging.getLogger(__name__)

REGISTER_NAMES = ("I", "A", "B")


class QuditError(Exception):
    """Base class for all quditport errors."""


class DimensionError(QuditError):
    """A dimension is outside the supported range."""


class InvariantError(QuditError):
    """A construction invariant does not hold."""


class RegisterError(QuditError):
    """A register index or subset is invalid for the given layout."""


class ArrayModel(BaseModel):
    """Immutable model holding numpy arrays."""

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex, copy=True)
    array.setflags(write=False)
    return array


def check_dim(d: int, cap: Optional[int] = None) -> int:
    """Checks that ``d`` is a supported qudit dimension.

    Args:
        d: The dimension of one qudit.
        cap: Upper bound. Defaults to the configured ``max_dim``.

    Returns:
        ``d`` as an int.
    """
    if cap is None:
        cap = default_settings().max_dim
    if int(d) != d or d < 2:
        raise DimensionError(f"Qudit dimension must be an integer >= 2, got {d}.")
    if d > cap:
        raise DimensionError(f"Qudit dimension {d} exceeds the configured cap {cap}.")
    return int(d)


def omega(d: int) -> complex:
    """Primitive d-th root of unity exp(2*pi*i/d)."""
    return np.exp(2j * np.pi / d)


def _root_powers(d: int, exponents: np.ndarray) -> np.ndarray:
    # Reducing the exponent first keeps every entry an exact root of unity.
    return np.exp(2j * np.pi * (np.mod(exponents, d) / d))


class PureState(ArrayModel):
    """Single-qudit pure state sum_j alpha_j |j>."""

    amplitudes: np.ndarray

    @validator("amplitudes", pre=True)
    def as_complex_vector(cls, value):
        array = np.asarray(value, dtype=complex)
        if array.ndim != 1 or array.shape[0] < 2:
            raise ValueError("amplitudes must be a vector of length >= 2")
        return _frozen(array)

    @validator("amplitudes")
    def normalized(cls, value):
        tol = default_settings().tolerances.construction
        norm = np.sum(np.abs(value) ** 2)
        if abs(norm - 1.0) > tol:
            raise ValueError(f"state is not normalized (norm**2 = {norm!r})")
        return value

    @property
    def d(self) -> int:
        return self.amplitudes.shape[0]

    @classmethod
    def computational(cls, d: int, j: int) -> "PureState":
        amplitudes = np.zeros(check_dim(d), dtype=complex)
        amplitudes[j % d] = 1.0
        return cls(amplitudes=amplitudes)

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(
            matrix=np.outer(self.amplitudes, self.amplitudes.conj()), registers=1
        )


class SchmidtChannel(ArrayModel):
    """Two-qudit channel state sum_k gamma_k |kk> in Schmidt form."""

    gamma: np.ndarray

    @validator("gamma", pre=True)
    def as_complex_vector(cls, value):
        array = np.asarray(value, dtype=complex)
        if array.ndim != 1 or array.shape[0] < 2:
            raise ValueError("gamma must be a vector of length >= 2")
        return _frozen(array)

    @validator("gamma")
    def normalized(cls, value):
        tol = default_settings().tolerances.construction
        norm = np.sum(np.abs(value) ** 2)
        if abs(norm - 1.0) > tol:
            raise ValueError(f"Schmidt vector is not normalized (norm**2 = {norm!r})")
        return value

    @property
    def d(self) -> int:
        return self.gamma.shape[0]

    @classmethod
    def maximally_entangled(cls, d: int) -> "SchmidtChannel":
        d = check_dim(d)
        return cls(gamma=np.full(d, 1 / np.sqrt(d)))

    def state_vector(self) -> np.ndarray:
        """The length-d**2 vector of the channel state on registers (A, B)."""
        d = self.d
        vector = np.zeros(d * d, dtype=complex)
        vector[np.arange(d) * (d + 1)] = self.gamma
        return vector

    def density_matrix(self) -> "DensityMatrix":
        vector = self.state_vector()
        return DensityMatrix(matrix=np.outer(vector, vector.conj()), registers=2)


class WeylIndex(BaseModel):
    """Index (m, n) of the Weyl operator U_mn, reduced mod d."""

    m: conint(ge=0)
    n: conint(ge=0)

    class Config:
        allow_mutation = False

    @classmethod
    def of(cls, d: int, m: int, n: int) -> "WeylIndex":
        return cls(m=m % d, n=n % d)

    def as_tuple(self) -> Tuple[int, int]:
        return self.m, self.n


IndexLike = Union[WeylIndex, Tuple[int, int]]


def _reduce_index(d: int, idx: IndexLike) -> Tuple[int, int]:
    m, n = idx.as_tuple() if isinstance(idx, WeylIndex) else idx
    return int(m) % d, int(n) % d


class MeasurementBasis(ArrayModel):
    """Coefficients beta_km of the Bell-like basis Phi_mn = sum_k beta_km |k, k+n>.

    Columns of ``beta`` must be orthonormal. ``phases`` is set when the basis
    was built by ``phased_basis``.
    """

    beta: np.ndarray
    phases: Optional[np.ndarray] = None

    @validator("beta", pre=True)
    def as_complex_matrix(cls, value):
        array = np.asarray(value, dtype=complex)
        if array.ndim != 2 or array.shape[0] != array.shape[1] or array.shape[0] < 2:
            raise ValueError("beta must be a square matrix of size >= 2")
        return _frozen(array)

    @validator("beta")
    def columns_orthonormal(cls, value):
        tol = default_settings().tolerances.construction
        gram = value.conj().T @ value
        deviation = np.max(np.abs(gram - np.eye(value.shape[0])))
        if deviation > tol:
            raise ValueError(
                f"basis columns are not orthonormal (max deviation {deviation:.3e})"
            )
        return value

    @validator("phases", pre=True)
    def as_real_vector(cls, value):
        if value is None:
            return None
        array = np.array(value, dtype=float, copy=True)
        array.setflags(write=False)
        return array

    @property
    def d(self) -> int:
        return self.beta.shape[0]

    def bell_states(self) -> np.ndarray:
        """All d**2 states Phi_mn stacked as rows, row index m*d + n."""
        return bell_basis(self)


class DensityMatrix(ArrayModel):
    """Density matrix on 1 to 3 registers of equal dimension d.

    ``normalized=False`` marks unnormalized post-measurement states, for
    which the unit-trace invariant is not enforced.
    """

    registers: conint(ge=1, le=3)
    normalized: bool = True
    matrix: np.ndarray

    @validator("matrix", pre=True)
    def as_complex_matrix(cls, value):
        array = np.asarray(value, dtype=complex)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise ValueError("density matrix must be square")
        return _frozen(array)

    @root_validator(skip_on_failure=True)
    def layout_and_invariants(cls, values):
        matrix, registers = values["matrix"], values["registers"]
        size = matrix.shape[0]
        d = int(round(size ** (1.0 / registers)))
        if d < 2 or d**registers != size:
            raise ValueError(
                f"size {size} is not d**{registers} for an integer d >= 2"
            )
        tol = default_settings().tolerances.derived
        if np.max(np.abs(matrix - matrix.conj().T)) > tol:
            raise ValueError("density matrix is not Hermitian")
        if values.get("normalized", True):
            trace = np.trace(matrix).real
            if abs(trace - 1.0) > tol:
                raise ValueError(f"density matrix trace is {trace!r}, expected 1")
        return values

    @property
    def d(self) -> int:
        return int(round(self.matrix.shape[0] ** (1.0 / self.registers)))

    def tensor(self) -> np.ndarray:
        """The matrix reshaped to (d,)*registers kets followed by bras."""
        return self.matrix.reshape((self.d,) * (2 * self.registers))

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def is_physical(self, tol: Optional[float] = None) -> bool:
        if tol is None:
            tol = default_settings().tolerances.eigenvalue
        return self.min_eigenvalue() >= -tol

    @classmethod
    def from_tensor(
        cls, tensor: np.ndarray, registers: int, normalized: bool = True
    ) -> "DensityMatrix":
        size = int(round(np.sqrt(tensor.size)))
        return cls(
            matrix=tensor.reshape(size, size),
            registers=registers,
            normalized=normalized,
        )


def weyl_operator(d: int, idx: IndexLike) -> np.ndarray:
    """Weyl operator U_mn = sum_j omega**(j*m) |j><j+n|.

    Args:
        d: Qudit dimension.
        idx: The (m, n) index, reduced mod d.

    Returns:
        The d x d unitary matrix.
    """
    d = check_dim(d)
    m, n = _reduce_index(d, idx)
    j = np.arange(d)
    operator = np.zeros((d, d), dtype=complex)
    operator[j, (j + n) % d] = _root_powers(d, j * m)
    return operator


def weyl_basis(d: int) -> np.ndarray:
    """All d**2 Weyl operators, shape (d**2, d, d), in (m, n) lexicographic order."""
    d = check_dim(d)
    return np.stack([weyl_operator(d, (m, n)) for m in range(d) for n in range(d)])


def weyl_decompose(matrix: np.ndarray) -> np.ndarray:
    """Coefficients c_mn = tr(U_mn^dagger X) / d of a d x d matrix."""
    matrix = np.asarray(matrix, dtype=complex)
    d = matrix.shape[0]
    coefficients = np.einsum("xab,ab->x", weyl_basis(d).conj(), matrix) / d
    return coefficients.reshape(d, d)


def weyl_reconstruct(coefficients: np.ndarray) -> np.ndarray:
    """Inverse of ``weyl_decompose``."""
    coefficients = np.asarray(coefficients, dtype=complex)
    d = coefficients.shape[0]
    return np.einsum("x,xab->ab", coefficients.reshape(-1), weyl_basis(d))


def max_entangled_basis(d: int) -> MeasurementBasis:
    """The Fourier basis beta_km = omega**(k*m) / sqrt(d)."""
    d = check_dim(d)
    k = np.arange(d)
    return MeasurementBasis(beta=_root_powers(d, np.outer(k, k)) / np.sqrt(d))


def phased_basis(d: int, phases: Sequence[float]) -> MeasurementBasis:
    """Maximally entangled basis with row phases.

    beta_jm = exp(i*phi_j) * omega**(j*m) / sqrt(d), with phi_0 = 0.

    Args:
        d: Qudit dimension.
        phases: phi_1 .. phi_{d-1}.
    """
    d = check_dim(d)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (d - 1,):
        raise InvariantError(f"Expected {d - 1} phases for d={d}, got {phases.shape}.")
    row_phases = np.exp(1j * np.concatenate([[0.0], phases]))
    fourier = max_entangled_basis(d).beta
    return MeasurementBasis(beta=row_phases[:, None] * fourier, phases=phases)


def bell_state(basis: MeasurementBasis, idx: IndexLike) -> np.ndarray:
    """Phi_mn = sum_k beta_km |k> (x) |k+n>, a length-d**2 vector."""
    d = basis.d
    m, n = _reduce_index(d, idx)
    k = np.arange(d)
    vector = np.zeros(d * d, dtype=complex)
    vector[k * d + (k + n) % d] = basis.beta[:, m]
    return vector


def bell_basis(basis: MeasurementBasis) -> np.ndarray:
    d = basis.d
    return np.stack([bell_state(basis, (m, n)) for m in range(d) for n in range(d)])


def resolve_register(register: Union[int, str], registers: int) -> int:
    """Maps a register index or name (I, A, B) onto an axis of the layout."""
    if isinstance(register, str):
        name = register.upper()
        if name not in REGISTER_NAMES:
            raise RegisterError(f"Unknown register {register!r}.")
        # Layouts with fewer than three registers drop the leading ones.
        index = REGISTER_NAMES.index(name) - (3 - registers)
    else:
        index = int(register)
    if not 0 <= index < registers:
        raise RegisterError(
            f"Register {register!r} is out of range for {registers} register(s)."
        )
    return index


def partial_trace(
    rho: DensityMatrix, keep: Iterable[Union[int, str]]
) -> DensityMatrix:
    """Traces out every register not listed in ``keep``.

    Args:
        rho: A density matrix on 1 to 3 registers.
        keep: Register indices or names to keep, in any order.

    Returns:
        The reduced density matrix on the kept registers, in layout order.
    """
    registers = rho.registers
    kept = sorted({resolve_register(r, registers) for r in keep})
    if not kept:
        raise RegisterError("At least one register must be kept.")
    letters = "abcdefghijkl"
    kets = list(letters[:registers])
    bras = [
        kets[i] if i not in kept else letters[registers + i] for i in range(registers)
    ]
    out = [kets[i] for i in kept] + [bras[i] for i in kept]
    reduced = np.einsum(f"{''.join(kets + bras)}->{''.join(out)}", rho.tensor())
    return DensityMatrix.from_tensor(
        reduced, registers=len(kept), normalized=rho.normalized
    )


def tensor_product(*states: DensityMatrix) -> DensityMatrix:
    """Kronecker product of density matrices of the same dimension d."""
    if not states:
        raise RegisterError("tensor_product needs at least one state.")
    if len({s.d for s in states}) != 1:
        raise DimensionError("All factors must share the same qudit dimension.")
    matrix = states[0].matrix
    for state in states[1:]:
        matrix = np.kron(matrix, state.matrix)
    return DensityMatrix(
        matrix=matrix,
        registers=sum(s.registers for s in states),
        normalized=all(s.normalized for s in states),
    )


def entanglement_entropy(gamma: SchmidtChannel) -> float:
    """Entropy of entanglement of the channel, normalized to log d."""
    weights = np.abs(gamma.gamma) ** 2
    weights = weights[weights > 0]
    entropy = -np.sum(weights * np.log(weights)) / np.log(gamma.d)
    return float(np.clip(entropy, 0.0, 1.0))


def is_maximally_entangled(
    basis: MeasurementBasis, gamma: SchmidtChannel, tol: Optional[float] = None
) -> bool:
    """True when both the basis and the channel are the standard maximal ones."""
    if tol is None:
        tol = default_settings().tolerances.derived
    d = basis.d
    reference = max_entangled_basis(d).beta
    return bool(
        gamma.d == d
        and np.max(np.abs(basis.beta - reference)) <= tol
        and np.max(np.abs(gamma.gamma - 1 / np.sqrt(d))) <= tol
    )
