import csv
import json
import os
import subprocess
import sys
from tempfile import TemporaryDirectory

import pytest
from typer.testing import CliRunner

from quditport.checks import FailResult, PassResult
from quditport.cli import cli
from quditport.utils.constants import default_settings
from quditport.utils.logs_utils import CheckLogs, ValidationReport

runner = CliRunner()

ENV_KEYS = (
    "QUDITPORT_MAX_DIM",
    "QUDITPORT_ORACLE_MAX_DIM",
    "QUDITPORT_WORKERS",
    "QUDITPORT_TOLERANCES",
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    # Commands export their settings into the environment.
    for key in ENV_KEYS:
        monkeypatch.setenv(key, "")
        monkeypatch.delenv(key)
    default_settings.cache_clear()
    yield
    default_settings.cache_clear()


def _json(result):
    assert result.exit_code == 0, result.output
    return json.loads(result.stdout.strip().splitlines()[-1])


def _read_csv(path):
    with open(path, "r", newline="") as f:
        header = json.loads(f.readline()[2:])
        rows = list(csv.DictReader(f))
    return header, rows


@pytest.mark.parametrize(
    "args,expected",
    [
        (["--d", "3", "--noise", "B=D:0.3"], 0.8),
        (["--d", "2", "--noise", "A=F:1", "B=F:1"], 1.0),
        (["--d", "3", "--noise", "A=F:1,B=F:1"], 5 / 8),
        (["--d", "3", "--noise", "none"], 1.0),
    ],
)
def test_fidelity(args, expected):
    record = _json(runner.invoke(cli, ["fidelity", *args, "--format", "json"]))
    assert record["fidelity"] == pytest.approx(expected, abs=1e-12)
    assert record["f_c"] == pytest.approx(2 / (record["d"] + 1))
    assert record["above_classical"] == (expected > record["f_c"])


def test_fidelity_reports_thresholds():
    record = _json(
        runner.invoke(cli, ["fidelity", "-d", "3", "-n", "B=D:0.3", "--format", "json"])
    )
    assert record["scenario"] == "(∅,∅,D)"
    assert record["p_star_B"] == pytest.approx(3 / 4)
    assert "p_star_A" not in record


@pytest.mark.parametrize("noise", ["B=D:0.3", "B=AD:0.4"])
def test_fidelity_monte_carlo(noise):
    args = ["fidelity", "--d", "2", "--noise", noise, "--method", "both"]
    args += ["--samples", "2000", "--seed", "3", "--format", "json"]
    record = _json(runner.invoke(cli, args))
    # Input-independent fidelities have a vanishing standard error.
    band = 4 * record["std_error"] + 1e-12
    assert abs(record["mc_fidelity"] - record["fidelity"]) <= band
    assert record["seed"] == 3
    assert record["n_samples"] == 2000


def test_fidelity_text_output():
    result = runner.invoke(cli, ["fidelity", "--d", "3", "--noise", "B=D:0.3"])
    assert result.exit_code == 0
    assert "fidelity" in result.stdout


def test_fidelity_reads_config_file(tmp_path):
    config = tmp_path / "quditport.env"
    config.write_text("seed=5\nn_samples=300\n")
    args = ["fidelity", "--d", "2", "--noise", "A=F:0.2", "--method", "oracle-mc"]
    args += ["--config", str(config), "--format", "json"]
    record = _json(runner.invoke(cli, args))
    assert record["seed"] == 5
    assert record["n_samples"] == 300


@pytest.mark.parametrize(
    "args",
    [
        ["fidelity", "--d", "3", "--noise", "B=Q:0.3"],
        ["fidelity", "--d", "3", "--noise", "B=D:1.3"],
        ["fidelity", "--d", "3", "--gamma", "rank:7"],
        ["fidelity", "--d", "3", "--workers", "0"],
        ["fidelity", "--d", "3", "--config", "missing.env"],
        ["validate", "--level", "medium"],
        ["sweep", "--d", "3", "--noise", "B=D:0:1:1", "--out", "unused.csv"],
        ["fidelity", "--d", "1", "--noise", "B=D:0.3"],
        ["sweep", "--d", "0", "--noise", "B=D:0:1:3", "--out", "unused.csv"],
        ["thresholds", "--d", "1"],
    ],
)
def test_invalid_flags_exit_2(args):
    assert runner.invoke(cli, args).exit_code == 2


@pytest.mark.parametrize(
    "args",
    [
        ["fidelity", "--d", "65"],
        ["fidelity", "--d", "11", "--noise", "B=AD:0.5"],
        ["fidelity", "--d", "11", "--noise", "B=D:0.5", "--method", "oracle-mc"],
        ["sweep", "--d", "11", "--noise", "A=AD:0:1:3", "--out", "unused.csv"],
    ],
)
def test_dimension_cap_exits_3(args):
    assert runner.invoke(cli, args).exit_code == 3


def test_closed_forms_run_above_the_oracle_cap():
    record = _json(
        runner.invoke(
            cli, ["fidelity", "--d", "11", "--noise", "B=D:0.5", "--format", "json"]
        )
    )
    assert record["fidelity"] > 0


def test_sweep_above_classical_below_depolarizing_threshold(tmp_path):
    out = tmp_path / "dff.csv"
    result = runner.invoke(
        cli,
        [
            "sweep",
            "--d",
            "3",
            "--noise",
            "I=D:0:1:11",
            "A=F:1",
            "B=F:1",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    header, rows = _read_csv(out)
    assert header["command"] == "sweep"
    assert header["scenario"] == "(D,F,F)"
    assert header["d"] == 3
    assert [int(row["index"]) for row in rows] == list(range(11))
    for row in rows:
        assert (row["above_classical"] == "true") == (float(row["p_input"]) < 3 / 7)


def test_sweep_rows_are_lexicographic(tmp_path):
    out = tmp_path / "fff.jsonl"
    args = ["sweep", "--d", "2", "--noise", "A=F:0:1:2", "B=P:0:1:3"]
    result = runner.invoke(cli, [*args, "--out", str(out), "--format", "jsonl"])
    assert result.exit_code == 0, result.output
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert lines[0]["header"]["scenario"] == "(∅,F,P)"
    assert [(row["p_alice"], row["p_bob"]) for row in lines[1:]] == [
        (0.0, 0.0),
        (0.0, 0.5),
        (0.0, 1.0),
        (1.0, 0.0),
        (1.0, 0.5),
        (1.0, 1.0),
    ]


@pytest.mark.parametrize("method", ["closed", "both"])
def test_sweep_is_byte_identical_across_workers(tmp_path, method):
    args = ["sweep", "--d", "2", "--noise", "A=FP:0:1:3", "B=AD:0.5"]
    args += ["--method", method, "--samples", "200", "--seed", "11"]
    outputs = []
    for workers in ("1", "2", "1"):
        out = tmp_path / f"sweep-{len(outputs)}.csv"
        result = runner.invoke(cli, [*args, "--workers", workers, "--out", str(out)])
        assert result.exit_code == 0, result.output
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_sweep_reports_unwritable_path(tmp_path):
    out = tmp_path / "missing" / "out.csv"
    result = runner.invoke(
        cli, ["sweep", "--d", "2", "--noise", "B=F:0:1:2", "--out", str(out)]
    )
    assert result.exit_code == 1
    assert str(out) in result.output
    assert not out.exists()


def test_optimize():
    record = _json(
        runner.invoke(cli, ["optimize", "--d", "2", "--p", "0.9", "--format", "json"])
    )
    assert record["value"] == pytest.approx((2 * 0.9 + 1) / 3, abs=1e-6)
    assert float(record["phases"]) == pytest.approx(3.141592653589793, abs=1e-4)
    assert abs(record["difference"]) < 1e-6


def test_validate_fast():
    result = runner.invoke(cli, ["validate", "--level", "fast", "--format", "json"])
    assert result.exit_code == 0, result.output
    entries = [json.loads(line) for line in result.stdout.strip().splitlines()]
    assert {entry["outcome"] for entry in entries} == {"pass"}
    assert "thresholds" in {entry["check"] for entry in entries}


def test_validate_failure_exits_1(mocker):
    report = ValidationReport(
        level="fast",
        logs=[
            CheckLogs(name="thresholds", result=PassResult()),
            CheckLogs(name="broken", result=FailResult(error_message="off by 0.1")),
        ],
    )
    mocker.patch("quditport.cli.run_checks", return_value=report)
    result = runner.invoke(cli, ["validate"])
    assert result.exit_code == 1
    assert "broken" in result.stdout


def test_scatter(tmp_path):
    out = tmp_path / "scatter.csv"
    args = ["scatter", "--d", "3", "--n", "200", "--seed", "4", "--curve-points", "11"]
    result = runner.invoke(cli, [*args, "--out", str(out)])
    assert result.exit_code == 0, result.output
    header, rows = _read_csv(out)
    assert header["n"] == 200
    series = [row["series"] for row in rows]
    assert series.count("scatter") == 200
    assert series.count("boundary:1") == 11
    assert series.count("boundary:2") == 11
    for row in rows:
        assert 0.0 <= float(row["fq_normalized"]) <= 1.0 + 1e-12


def test_thresholds():
    result = runner.invoke(cli, ["thresholds", "--d", "3", "--format", "json"])
    assert result.exit_code == 0, result.output
    lines = [json.loads(line) for line in result.stdout.strip().splitlines()]
    p_star = {line["kind"]: line["p_star"] for line in lines if "kind" in line}
    assert p_star["F"] == pytest.approx(2 / 3)
    assert p_star["D"] == pytest.approx(3 / 4)
    restoration = next(line for line in lines if "restoration_limit" in line)
    assert restoration["restoration_limit"] == pytest.approx(5 / 8)
    tolerance = next(line for line in lines if "input_noise_tolerance" in line)
    tolerance = tolerance["input_noise_tolerance"]
    assert tolerance["(D,F,F)"] == pytest.approx(3 / 7, abs=1e-9)
    assert tolerance["(P,F,F)"] == pytest.approx(1 / 3, abs=1e-9)
    assert tolerance["(F,F,F)"] == pytest.approx(2 / 3, abs=1e-9)


def test_module_entry_point():
    with TemporaryDirectory() as tmpdir:
        out = os.path.join(tmpdir, "sweep.csv")
        result = subprocess.run(
            [
                sys.executable,
                "-m",
                "quditport.cli",
                "sweep",
                "--d",
                "3",
                "--noise",
                "B=D:0:1:3",
                "--out",
                out,
            ],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, result.stderr
        with open(out, "r") as f:
            lines = f.read().splitlines()
        assert lines[1] == ",".join(
            [
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
        )
        first = lines[2].split(",")
        assert first[:4] == ["0", "0", "0", "0"]
        assert float(first[4]) == pytest.approx(1.0)
        assert first[5:] == ["", "", "0.5", "true"]
