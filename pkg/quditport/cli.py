import logging
from contextlib import contextmanager
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import rich
import typer

from quditport.check_service import run_checks
from quditport.checks import CheckLevel
from quditport.closed_form import (
    classical_fidelity,
    input_noise_tolerance,
    restoration_limit,
    scenario_fidelity,
    threshold,
)
from quditport.logging_utils import configure_logging
from quditport.noise import NoiseKind
from quditport.optimization import optimize_phases
from quditport.qudit import DimensionError, QuditError, check_dim
from quditport.sampling import (
    SCHMIDT_MEASURE,
    RngSeed,
    mc_average_fidelity,
    scatter_experiment,
)
from quditport.sweep import RECORD_COLUMNS, SweepGrid, SweepMethod, run_sweep
from quditport.utils.casting_utils import to_int
from quditport.utils.constants import (
    apply_settings,
    default_settings,
    load_settings,
    read_config_file,
)
from quditport.utils.io_utils import OutputError, OutputFormat, dumps, write_records
from quditport.utils.logs_utils import record_table, threshold_table
from quditport.utils.parsing_utils import (
    parse_basis_spec,
    parse_gamma_spec,
    parse_scenario,
)
from quditport.version import __version__

logger = logging.getLogger(__name__)

cli = typer.Typer(
    help="Average fidelity of qudit teleportation under local noise.",
    add_completion=False,
)

EXIT_FAILED = 1
EXIT_DIMENSION = 3

SCATTER_COLUMNS = ["series", "mu", "entanglement", "fq_normalized"]


class TextFormat(str, Enum):
    TEXT = "text"
    JSON = "json"


def _dim_option():
    # d < 2 is a bad flag (exit 2); the upper caps raise DimensionError (exit 3).
    return typer.Option(..., "--d", "-d", min=2, help="Qudit dimension.")


def _noise_option():
    return typer.Option(
        [],
        "--noise",
        "-n",
        help="Noise term REGISTER=KIND:p (REGISTER in I, A, B). Repeatable.",
    )


def _extra_terms():
    return typer.Argument(None, help="More noise terms, e.g. `--noise A=F:1 B=F:1`.")


def _config_option():
    return typer.Option(None, "--config", help="Plain key=value config file.")


def _log_level_option():
    return typer.Option(None, "--log-level", help="Log level, e.g. DEBUG or INFO.")


def _workers_option():
    return typer.Option(
        None, "--workers", "-w", help="Worker processes; results do not depend on it."
    )


@contextmanager
def _exit_codes():
    """Maps library errors onto the command exit codes."""
    try:
        yield
    except DimensionError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_DIMENSION)
    except OutputError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_FAILED)
    except (QuditError, ValueError, FileNotFoundError) as e:
        raise typer.BadParameter(str(e))


def _setup(
    config: Optional[str], log_level: Optional[str], workers: Optional[int]
) -> Tuple[Dict[str, Any], int]:
    """Applies logging and settings; returns the raw config values and workers."""
    if log_level is not None:
        configure_logging(log_level=log_level.upper())
    settings = load_settings(config, workers=workers)
    apply_settings(settings)
    values: Dict[str, Any] = {}
    if config is not None:
        values = read_config_file(config)
    return values, settings.workers


def _pick(
    flag: Any, values: Dict[str, Any], key: str, default: Any, cast: Callable = str
) -> Any:
    """Flag value, else the config-file value, else the default."""
    if flag is not None:
        return flag
    if key in values:
        value = cast(values[key])
        if value is None:
            raise ValueError(f"Config value {key}={values[key]!r} is not valid.")
        return value
    return default


def _emit(output_format: TextFormat, title: str, record: Dict[str, Any]) -> None:
    if output_format is TextFormat.JSON:
        typer.echo(dumps(record))
    else:
        rich.print(record_table(title, record))


@cli.command()
def fidelity(
    d: int = _dim_option(),
    noise: List[str] = _noise_option(),
    extra: Optional[List[str]] = _extra_terms(),
    gamma: str = typer.Option(
        "max", "--gamma", help="max, rank:nu, boundary:mu:a or a file."
    ),
    basis: str = typer.Option("max", "--basis", help="max, phased:phi1,... or a file."),
    method: SweepMethod = typer.Option(SweepMethod.CLOSED, "--method"),
    samples: Optional[int] = typer.Option(
        None, "--samples", help="Monte Carlo inputs."
    ),
    seed: Optional[int] = typer.Option(None, "--seed"),
    output_format: TextFormat = typer.Option(TextFormat.TEXT, "--format"),
    config: Optional[str] = _config_option(),
    log_level: Optional[str] = _log_level_option(),
    workers: Optional[int] = _workers_option(),
):
    """Average fidelity of one scenario."""
    with _exit_codes():
        values, workers = _setup(config, log_level, workers)
        samples = _pick(samples, values, "n_samples", 10000, to_int)
        seed = _pick(seed, values, "seed", 0, to_int)
        d = check_dim(d)
        scenario = parse_scenario(list(noise) + list(extra or []))
        channel = parse_gamma_spec(gamma, d)
        measurement = parse_basis_spec(basis, d)

        record: Dict[str, Any] = {
            "version": __version__,
            "d": d,
            "scenario": scenario.label,
            "noise": ",".join(spec.label for spec in scenario.specs),
            "method": method.value,
        }
        if method is not SweepMethod.ORACLE_MC:
            record["fidelity"] = scenario_fidelity(scenario, d, measurement, channel)
        if method is not SweepMethod.CLOSED:
            estimate = mc_average_fidelity(
                channel,
                measurement,
                scenario,
                samples,
                seed=RngSeed(seed=seed),
                workers=workers,
            )
            record.update(
                seed=seed,
                n_samples=samples,
                mc_fidelity=estimate.mean,
                std_error=estimate.std_error,
            )
            record.setdefault("fidelity", estimate.mean)
        f_c = classical_fidelity(d)
        record["f_c"] = f_c
        record["above_classical"] = record["fidelity"] > f_c
        for name, spec in zip("IAB", scenario.specs):
            if not spec.is_noiseless:
                record[f"p_star_{name}"] = threshold(spec.kind, d).p_star
        _emit(output_format, f"Fidelity {scenario.label}, d={d}", record)


@cli.command()
def sweep(
    d: int = _dim_option(),
    noise: List[str] = typer.Option(
        [],
        "--noise",
        "-n",
        help="REGISTER=KIND:p or REGISTER=KIND:start:stop:steps. Repeatable.",
    ),
    extra: Optional[List[str]] = _extra_terms(),
    out: str = typer.Option(..., "--out", "-o", help="Output file."),
    output_format: OutputFormat = typer.Option(OutputFormat.CSV, "--format"),
    method: Optional[SweepMethod] = typer.Option(None, "--method"),
    samples: Optional[int] = typer.Option(None, "--samples"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    gamma: str = typer.Option("max", "--gamma"),
    basis: str = typer.Option("max", "--basis"),
    config: Optional[str] = _config_option(),
    log_level: Optional[str] = _log_level_option(),
    workers: Optional[int] = _workers_option(),
):
    """Evaluate a scenario on a grid of noise fractions and write one row per point."""
    with _exit_codes():
        values, workers = _setup(config, log_level, workers)
        grid = SweepGrid.from_terms(
            d,
            list(noise) + list(extra or []),
            method=_pick(method, values, "method", SweepMethod.CLOSED, SweepMethod),
            seed=_pick(seed, values, "seed", 0, to_int),
            n_samples=_pick(samples, values, "n_samples", 10000, to_int),
            gamma_spec=gamma,
            basis_spec=basis,
        )
        records = run_sweep(grid, workers)
        write_records(
            out,
            output_format,
            grid.header(),
            RECORD_COLUMNS,
            [record.dict() for record in records],
        )
        above = sum(record.above_classical for record in records)
        typer.echo(f"Wrote {len(records)} records to {out} ({above} above f_C).")


@cli.command()
def optimize(
    d: int = _dim_option(),
    p: float = typer.Option(..., "--p", "-p", help="d-phase-flip noise fraction."),
    starts: Optional[int] = typer.Option(None, "--starts", help="Random starts."),
    seed: int = typer.Option(0, "--seed"),
    output_format: TextFormat = typer.Option(TextFormat.TEXT, "--format"),
    config: Optional[str] = _config_option(),
    log_level: Optional[str] = _log_level_option(),
):
    """Optimal measurement phases under single-qudit d-phase-flip noise."""
    with _exit_codes():
        _setup(config, log_level, None)
        result = optimize_phases(d, p, starts=starts, seed=seed)
        record = {
            "d": result.d,
            "p": result.p,
            "phases": ",".join(format(x, ".17g") for x in result.phases),
            "value": result.value,
            "prediction": result.prediction,
            "difference": result.difference,
        }
        _emit(output_format, f"Optimal phases, d={d}, p={p}", record)


@cli.command()
def validate(
    level: CheckLevel = typer.Option(CheckLevel.FAST, "--level"),
    output_format: TextFormat = typer.Option(TextFormat.TEXT, "--format"),
    config: Optional[str] = _config_option(),
    log_level: Optional[str] = _log_level_option(),
    workers: Optional[int] = _workers_option(),
):
    """Run the invariant checks; exit 1 if any of them fails."""
    with _exit_codes():
        _, workers = _setup(config, log_level, workers)
        report = run_checks(level, workers)
    if output_format is TextFormat.JSON:
        for line in report.json_lines():
            typer.echo(line)
    else:
        rich.print(report.rich_group)
    if not report.passed:
        raise typer.Exit(EXIT_FAILED)


@cli.command()
def scatter(
    d: int = _dim_option(),
    n: int = typer.Option(10000, "--n", help="Number of random channels."),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out: str = typer.Option(..., "--out", "-o", help="Output file."),
    output_format: OutputFormat = typer.Option(OutputFormat.CSV, "--format"),
    curve_points: int = typer.Option(201, "--curve-points"),
    config: Optional[str] = _config_option(),
    log_level: Optional[str] = _log_level_option(),
    workers: Optional[int] = _workers_option(),
):
    """Entanglement against normalised quantum contribution for random channels."""
    with _exit_codes():
        values, workers = _setup(config, log_level, workers)
        seed = _pick(seed, values, "seed", 0, to_int)
        result = scatter_experiment(
            d, n, seed=seed, curve_points=curve_points, workers=workers
        )
        rows = [
            {
                "series": "scatter",
                "mu": None,
                "entanglement": record.entanglement,
                "fq_normalized": record.fq_normalized,
            }
            for record in result.records
        ]
        for mu, curve in sorted(result.curves.items()):
            rows.extend(
                {
                    "series": f"boundary:{mu}",
                    "mu": mu,
                    "entanglement": e,
                    "fq_normalized": f,
                }
                for e, f in curve
            )
        header = {
            "command": "scatter",
            "version": __version__,
            "d": d,
            "n": n,
            "seed": seed,
            "curve_points": curve_points,
            "basis": "max",
            "schmidt_measure": SCHMIDT_MEASURE,
        }
        write_records(out, output_format, header, SCATTER_COLUMNS, rows)
        typer.echo(
            f"Wrote {len(result.records)} points and {len(result.curves)} boundary"
            f" families to {out}."
        )


@cli.command()
def thresholds(
    d: int = _dim_option(),
    output_format: TextFormat = typer.Option(TextFormat.TEXT, "--format"),
    config: Optional[str] = _config_option(),
    log_level: Optional[str] = _log_level_option(),
):
    """Single-qudit thresholds of every noise kind, with maximal entanglement."""
    with _exit_codes():
        _setup(config, log_level, None)
        d = check_dim(d)
        kinds = [k for k in NoiseKind if k is not NoiseKind.NONE]
        reports = [threshold(kind, d) for kind in kinds]
        restoration = restoration_limit(d)
        tolerances = {}
        if d <= default_settings().oracle_max_dim:
            for kind in kinds:
                tolerances[f"({kind.symbol},F,F)"] = input_noise_tolerance(
                    kind, NoiseKind.F, d
                )
    if output_format is TextFormat.JSON:
        for report in reports:
            typer.echo(dumps(report.dict()))
        typer.echo(dumps({"d": d, "restoration_limit": restoration}))
        if tolerances:
            typer.echo(dumps({"d": d, "input_noise_tolerance": tolerances}))
    else:
        rich.print(threshold_table(reports, restoration))
        if tolerances:
            title = "Input noise tolerance with p_A = p_B = 1"
            rich.print(record_table(title, tolerances))


if __name__ == "__main__":
    cli()
