"""Parsers for the command-line grammar.

Noise terms read ``REGISTER=KIND:p`` with REGISTER in I, A, B (input, Alice,
Bob) and KIND in F, P, FP, D, AD; sweeps use ``REGISTER=KIND:start:stop:steps``.
Unlisted registers are noiseless and the single term ``none`` makes every
register noiseless.

Channel and basis presets are ``max``, ``rank:nu``, ``boundary:mu:a`` and
``phased:phi1,phi2,...``; anything else is read as a file of complex values.
"""
import logging
import os
from typing import Dict, Iterable, List, Tuple

import numpy as np

from quditport.closed_form import boundary_state, rank_state
from quditport.noise import NoiseKind, NoiseSpec, NoiseSpecError, ScenarioSpec
from quditport.qudit import (
    MeasurementBasis,
    QuditError,
    SchmidtChannel,
    max_entangled_basis,
    phased_basis,
)
from quditport.utils.casting_utils import to_complex, to_float, to_int

logger = logging.getLogger(__name__)

REGISTERS = ("I", "A", "B")

NoiseTerms = Dict[str, Tuple[NoiseKind, Tuple[float, ...]]]


class ParseError(QuditError):
    """A command-line value does not follow the grammar."""


def split_terms(terms: Iterable[str]) -> List[str]:
    """Flattens repeated and comma-separated terms."""
    tokens = []
    for term in terms or []:
        tokens.extend(t.strip() for t in str(term).split(",") if t.strip())
    return tokens


def parse_fraction(token: str) -> float:
    value = to_float(token)
    if value is None or not 0.0 <= value <= 1.0:
        raise ParseError(f"Noise fraction {token!r} is not a number in [0, 1].")
    return value


def parse_noise_term(term: str) -> Tuple[str, NoiseKind, Tuple[float, ...]]:
    """Parses ``B=D:0.3`` or ``B=D:0:1:41``.

    Returns:
        The register letter, the noise kind and either ``(p,)`` or
        ``(start, stop, steps)``.
    """
    register, sep, rest = term.partition("=")
    register = register.strip().upper()
    if not sep or register not in REGISTERS:
        raise ParseError(
            f"Noise term {term!r} must look like REGISTER=KIND:p"
            " with REGISTER in I, A, B."
        )
    parts = rest.split(":")
    try:
        kind = NoiseKind.parse(parts[0])
    except NoiseSpecError as e:
        raise ParseError(str(e))
    if kind is NoiseKind.NONE:
        if len(parts) > 1:
            raise ParseError(
                f"Noise term {term!r} gives a fraction to a noiseless qudit."
            )
        return register, kind, (0.0,)
    if len(parts) == 2:
        return register, kind, (parse_fraction(parts[1]),)
    if len(parts) == 4:
        start, stop = parse_fraction(parts[1]), parse_fraction(parts[2])
        steps = to_int(parts[3])
        if steps is None or steps < 1:
            raise ParseError(f"Step count in {term!r} must be a positive integer.")
        return register, kind, (start, stop, steps)
    raise ParseError(
        f"Noise term {term!r} must look like REGISTER=KIND:p or "
        "REGISTER=KIND:start:stop:steps."
    )


def parse_noise_terms(terms: Iterable[str]) -> NoiseTerms:
    tokens = split_terms(terms)
    if len(tokens) == 1 and tokens[0].lower() == "none":
        return {}
    parsed: NoiseTerms = {}
    for token in tokens:
        register, kind, values = parse_noise_term(token)
        if register in parsed:
            raise ParseError(f"Register {register} is given more than once.")
        parsed[register] = (kind, values)
    return parsed


def parse_scenario(terms: Iterable[str]) -> ScenarioSpec:
    """Builds a fixed-fraction scenario from noise terms."""
    specs = {}
    for register, (kind, values) in parse_noise_terms(terms).items():
        if len(values) != 1:
            raise ParseError(f"Register {register} needs a single noise fraction here.")
        specs[register] = NoiseSpec(kind=kind, p=values[0])
    return ScenarioSpec(
        input=specs.get("I", NoiseSpec()),
        alice=specs.get("A", NoiseSpec()),
        bob=specs.get("B", NoiseSpec()),
    )


def parse_angle(token: str) -> float:
    """Parses ``1.2``, ``pi``, ``2pi/3`` or ``-pi/2``."""
    text = token.strip().lower().replace("π", "pi")
    if "pi" not in text:
        value = to_float(text)
        if value is None:
            raise ParseError(f"Angle {token!r} is not a number.")
        return value
    numerator, _, denominator = text.partition("/")
    factor_text = numerator.replace("pi", "").replace("*", "")
    if factor_text in ("", "+"):
        factor = 1.0
    elif factor_text == "-":
        factor = -1.0
    else:
        factor = to_float(factor_text)
    divisor = to_float(denominator) if denominator else 1.0
    if factor is None or not divisor:
        raise ParseError(f"Angle {token!r} is not of the form [a]pi[/b].")
    return factor * np.pi / divisor


def load_complex_values(path: str) -> np.ndarray:
    """Reads whitespace- or comma-separated complex values, one row per line."""
    if not os.path.isfile(path):
        raise ParseError(f"No such preset or file: {path!r}.")
    rows = []
    with open(path, "r") as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.replace(",", " ").split()
            values = [to_complex(t) for t in tokens]
            if any(v is None for v in values):
                raise ParseError(
                    f"Could not parse complex values in {path!r}: {line!r}"
                )
            rows.append(values)
    if not rows or len({len(r) for r in rows}) != 1:
        raise ParseError(f"{path!r} must hold a non-empty, rectangular table.")
    return np.array(rows, dtype=complex)


def parse_gamma_spec(text: str, d: int) -> SchmidtChannel:
    """Channel Schmidt coefficients from a preset or a file."""
    parts = text.strip().split(":")
    name = parts[0].lower()
    try:
        if name == "max" and len(parts) == 1:
            return SchmidtChannel.maximally_entangled(d)
        if name == "rank" and len(parts) == 2:
            nu = to_int(parts[1])
            if nu is None:
                raise ParseError(f"Rank in {text!r} must be an integer.")
            return rank_state(d, nu)
        if name == "boundary" and len(parts) == 3:
            mu, a = to_int(parts[1]), to_float(parts[2])
            if mu is None or a is None:
                raise ParseError(f"{text!r} must look like boundary:mu:a.")
            return boundary_state(d, mu, a)
    except ParseError:
        raise
    except QuditError as e:
        raise ParseError(str(e))
    values = load_complex_values(text).ravel()
    if values.size != d:
        raise ParseError(f"{text!r} holds {values.size} coefficients, expected {d}.")
    norm = np.linalg.norm(values)
    if abs(norm - 1) > 1e-12:
        logger.debug(f"Normalizing Schmidt coefficients from {text} (norm {norm})")
    return SchmidtChannel(gamma=values / norm)


def parse_basis_spec(text: str, d: int) -> MeasurementBasis:
    """Measurement basis from a preset or a d x d file of complex values."""
    parts = text.strip().split(":", 1)
    name = parts[0].lower()
    if name == "max" and len(parts) == 1:
        return max_entangled_basis(d)
    if name == "phased" and len(parts) == 2:
        phases = [parse_angle(t) for t in split_terms([parts[1]])]
        try:
            return phased_basis(d, phases)
        except QuditError as e:
            raise ParseError(str(e))
    values = load_complex_values(text)
    if values.shape != (d, d):
        raise ParseError(f"{text!r} holds a {values.shape} table, expected ({d}, {d}).")
    try:
        return MeasurementBasis(beta=values)
    except ValueError as e:
        raise ParseError(f"{text!r} is not a valid measurement basis: {e}")
