"""Parameter sweeps over the noise fractions of a scenario.

A grid fixes the noise kind of each qudit and either a fixed fraction or a
linear range of fractions; grid points are visited in lexicographic order of
their (input, Alice, Bob) indices, which is also the row order of the output.
"""
import itertools
import logging
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
from eliot import start_action
from pydantic import BaseModel, conint, root_validator, validator

from quditport.closed_form import classical_fidelity, scenario_fidelity
from quditport.evaluation_service import evaluate
from quditport.noise import NoiseKind, NoiseSpec, ScenarioSpec
from quditport.qudit import MeasurementBasis, SchmidtChannel, check_dim
from quditport.sampling import RngSeed, mc_average_fidelity
from quditport.utils.constants import default_settings
from quditport.utils.parsing_utils import (
    REGISTERS,
    ParseError,
    parse_basis_spec,
    parse_gamma_spec,
    parse_noise_terms,
)
from quditport.version import __version__

logger = logging.getLogger(__name__)

RECORD_COLUMNS = [
    "index",
    "p_input",
    "p_alice",
    "p_bob",
    "fidelity",
    "mc_fidelity",
    "std_error",
    "f_c",
    "above_classical",
]


class SweepMethod(str, Enum):
    CLOSED = "closed"
    ORACLE_MC = "oracle-mc"
    BOTH = "both"


class SweepAxis(BaseModel):
    """Noise on one qudit: a fixed fraction (steps == 1) or a linear range."""

    kind: NoiseKind = NoiseKind.NONE
    start: float = 0.0
    stop: float = 0.0
    steps: conint(ge=1) = 1

    class Config:
        allow_mutation = False

    @validator("start", "stop")
    def in_unit_interval(cls, value):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"Noise fraction {value} is outside [0, 1].")
        return value

    @root_validator(skip_on_failure=True)
    def consistent(cls, values):
        if values["steps"] == 1 and values["start"] != values["stop"]:
            raise ValueError(
                "A fixed axis needs start == stop; use steps >= 2 to sweep."
            )
        swept = values["start"] or values["steps"] > 1
        if values["kind"] is NoiseKind.NONE and swept:
            raise ValueError("A noiseless qudit has no noise fraction to sweep.")
        return values

    @property
    def swept(self) -> bool:
        return self.steps >= 2

    def values(self) -> np.ndarray:
        if not self.swept:
            return np.array([self.start])
        return np.linspace(self.start, self.stop, self.steps)


class SweepGrid(BaseModel):
    d: conint(ge=2)
    axes: Tuple[SweepAxis, SweepAxis, SweepAxis]
    method: SweepMethod = SweepMethod.CLOSED
    seed: conint(ge=0) = 0
    n_samples: conint(ge=100) = 10000
    gamma_spec: str = "max"
    basis_spec: str = "max"

    class Config:
        allow_mutation = False

    @classmethod
    def from_terms(cls, d: int, terms: Iterable[str], **kwargs: Any) -> "SweepGrid":
        """Builds a grid from ``REGISTER=KIND:p`` and ``REGISTER=KIND:a:b:n`` terms."""
        parsed = parse_noise_terms(terms)
        axes = []
        for register in REGISTERS:
            if register not in parsed:
                axes.append(SweepAxis())
                continue
            kind, values = parsed[register]
            if len(values) == 1:
                axes.append(SweepAxis(kind=kind, start=values[0], stop=values[0]))
                continue
            start, stop, steps = values
            if steps < 2:
                raise ParseError(
                    f"Register {register} needs at least 2 steps to sweep."
                )
            axes.append(SweepAxis(kind=kind, start=start, stop=stop, steps=int(steps)))
        return cls(d=d, axes=tuple(axes), **kwargs)

    @property
    def kinds(self) -> Tuple[NoiseKind, NoiseKind, NoiseKind]:
        return tuple(axis.kind for axis in self.axes)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(axis.steps for axis in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def scenario_label(self) -> str:
        return "(" + ",".join(kind.symbol for kind in self.kinds) + ")"

    def points(self) -> List[Tuple[int, Tuple[float, float, float]]]:
        """(flat index, fractions) in lexicographic order of the grid indices."""
        values = [axis.values() for axis in self.axes]
        points = []
        for index, idx in enumerate(itertools.product(*(range(s) for s in self.shape))):
            fractions = tuple(float(values[r][i]) for r, i in enumerate(idx))
            points.append((index, fractions))
        return points

    def scenario_at(self, fractions: Tuple[float, float, float]) -> ScenarioSpec:
        specs = [
            NoiseSpec()
            if axis.kind is NoiseKind.NONE
            else NoiseSpec(kind=axis.kind, p=p)
            for axis, p in zip(self.axes, fractions)
        ]
        return ScenarioSpec(input=specs[0], alice=specs[1], bob=specs[2])

    def header(self) -> Dict[str, Any]:
        return {
            "command": "sweep",
            "version": __version__,
            "d": self.d,
            "scenario": self.scenario_label,
            "axes": [axis.dict() for axis in self.axes],
            "method": self.method,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "gamma": self.gamma_spec,
            "basis": self.basis_spec,
        }


class SweepRecord(BaseModel):
    index: int
    p_input: float
    p_alice: float
    p_bob: float
    fidelity: float
    mc_fidelity: Optional[float] = None
    std_error: Optional[float] = None
    f_c: float
    above_classical: Optional[bool] = None

    @root_validator(skip_on_failure=True)
    def classical_flag(cls, values):
        above = values["fidelity"] > values["f_c"]
        if values.get("above_classical") is None:
            values["above_classical"] = above
        elif values["above_classical"] != above:
            raise ValueError("above_classical must equal fidelity > f_c")
        return values


def _evaluate_point(task) -> SweepRecord:
    grid, gamma, basis, index, fractions = task
    scenario = grid.scenario_at(fractions)
    mc_fidelity = std_error = None
    if grid.method is SweepMethod.ORACLE_MC:
        fidelity = None
    else:
        fidelity = scenario_fidelity(scenario, grid.d, basis, gamma)
    if grid.method is not SweepMethod.CLOSED:
        estimate = mc_average_fidelity(
            gamma,
            basis,
            scenario,
            grid.n_samples,
            seed=RngSeed(seed=grid.seed).child(index),
            workers=1,
        )
        mc_fidelity, std_error = estimate.mean, estimate.std_error
        if fidelity is None:
            fidelity = mc_fidelity
    return SweepRecord(
        index=index,
        p_input=fractions[0],
        p_alice=fractions[1],
        p_bob=fractions[2],
        fidelity=fidelity,
        mc_fidelity=mc_fidelity,
        std_error=std_error,
        f_c=classical_fidelity(grid.d),
    )


def resolve_channel(
    grid: SweepGrid,
) -> Tuple[SchmidtChannel, MeasurementBasis]:
    gamma = parse_gamma_spec(grid.gamma_spec, grid.d)
    return gamma, parse_basis_spec(grid.basis_spec, grid.d)


def run_sweep(grid: SweepGrid, workers: Optional[int] = None) -> List[SweepRecord]:
    """Evaluates every grid point; the result is independent of ``workers``."""
    cap = None
    if grid.method is not SweepMethod.CLOSED or not all(k.is_weyl for k in grid.kinds):
        cap = default_settings().oracle_max_dim
    check_dim(grid.d, cap=cap)
    gamma, basis = resolve_channel(grid)
    tasks = [
        (grid, gamma, basis, index, fractions) for index, fractions in grid.points()
    ]
    with start_action(
        action_type="run_sweep",
        d=grid.d,
        scenario=grid.scenario_label,
        points=len(tasks),
        method=grid.method.value,
    ):
        records = evaluate(_evaluate_point, tasks, workers)
        above = sum(r.above_classical for r in records)
        logger.debug(f"{above} of {len(records)} grid points above f_C")
        return records
