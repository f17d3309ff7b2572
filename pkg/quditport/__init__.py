# Set up __init__.py so that users can do from quditport import scenario_fidelity, etc.

from quditport.closed_form import (
    classical_fidelity,
    fidelity_computational,
    fidelity_weyl_closed,
    fidelity_weyl_raw,
    scenario_fidelity,
    single_qudit_fidelity,
    threshold,
)
from quditport.logging_utils import configure_logging
from quditport.noise import NoiseKind, NoiseSpec, ScenarioSpec, kraus_operators
from quditport.optimization import optimize_phases
from quditport.oracle import fidelity_for_input, run_protocol
from quditport.qudit import (
    DensityMatrix,
    MeasurementBasis,
    PureState,
    QuditError,
    SchmidtChannel,
    max_entangled_basis,
    phased_basis,
)
from quditport.sampling import mc_average_fidelity, scatter_experiment
from quditport.sweep import SweepGrid, run_sweep
from quditport.utils import constants

__all__ = [
    "DensityMatrix",
    "MeasurementBasis",
    "PureState",
    "QuditError",
    "SchmidtChannel",
    "max_entangled_basis",
    "phased_basis",
    "NoiseKind",
    "NoiseSpec",
    "ScenarioSpec",
    "kraus_operators",
    "run_protocol",
    "fidelity_for_input",
    "classical_fidelity",
    "fidelity_weyl_raw",
    "fidelity_weyl_closed",
    "fidelity_computational",
    "scenario_fidelity",
    "single_qudit_fidelity",
    "threshold",
    "optimize_phases",
    "mc_average_fidelity",
    "scatter_experiment",
    "SweepGrid",
    "run_sweep",
    "constants",
    "configure_logging",
]
