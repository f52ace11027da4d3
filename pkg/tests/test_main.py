import asyncio
import csv
import json

import pytest

from src.tdoa.errors import EXIT_IO, EXIT_OK, EXIT_RUN_FAILURE, EXIT_VALIDATION
from src.tdoa.main import main
from src.tdoa.storage.config_file import parse_config

GOOD_CONFIG = {
    "scenario": {
        "name": "small",
        "receivers": [[0, 0], [10, 60], [70, 70], [60, 10]],
        "true_position": [40, 80],
        "covariance": {"diag": 0.4, "offdiag": 0.1},
        "iterations": 15,
    },
    "optimizers": ["SGD", {"algorithm": "RMSProp+AF", "buffer_size": 5}],
}


def _cli(*argv) -> int:
    return asyncio.run(main(list(argv)))


def _write_config(tmp_path, document, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document, indent=2), encoding="utf-8")
    return path


def test_presets_listing(capsys):
    assert _cli("presets") == EXIT_OK
    out = capsys.readouterr().out
    assert "scenario1" in out and "scenario2" in out
    assert "[40, 80]" in out and "[75, 65]" in out


def test_presets_json_is_parseable(capsys):
    assert _cli("presets", "--json") == EXIT_OK
    out = capsys.readouterr().out
    first = out[: out.index("}\n{") + 2]
    scenario, configs = parse_config(first)
    assert scenario.name == "scenario1"
    assert len(configs) == 5


def test_run_writes_trace_and_plots(tmp_path, capsys):
    code = _cli("run", "--scenario", "scenario1", "--algo", "RMSProp+AF", "--seed", "7", "--iterations", "20", "--out", str(tmp_path))
    assert code == EXIT_OK
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [
        "scenario1_rmspropaf_seed7.csv",
        "scenario1_seed7_convergence.svg",
        "scenario1_seed7_trajectory.svg",
    ]
    with (tmp_path / "scenario1_rmspropaf_seed7.csv").open(newline="") as source:
        rows = list(csv.reader(source))
    assert rows[0] == ["iteration", "x", "y", "cost", "position_error"]
    assert len(rows) == 22
    assert "final error" in capsys.readouterr().out


def test_run_outputs_are_byte_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        assert _cli("run", "--algo", "all", "--seed", "3", "--iterations", "25", "--out", str(out)) == EXIT_OK
    files = sorted(p.name for p in first.iterdir())
    assert len(files) == 7
    for name in files:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_run_rejects_seed_range(tmp_path):
    assert _cli("run", "--seeds", "0..3", "--out", str(tmp_path)) == EXIT_VALIDATION


def test_run_with_configuration_file(tmp_path):
    path = _write_config(tmp_path, GOOD_CONFIG)
    out = tmp_path / "out"
    assert _cli("run", "--scenario", str(path), "--seed", "1", "--emit", "csv", "--out", str(out)) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["small_rmspropaf_seed1.csv", "small_sgd_seed1.csv"]


def test_run_failure_exit_code(tmp_path):
    document = json.loads(json.dumps(GOOD_CONFIG))
    document["scenario"]["initial_position"] = [10, 60]
    path = _write_config(tmp_path, document)
    assert _cli("run", "--scenario", str(path), "--out", str(tmp_path / "out")) == EXIT_RUN_FAILURE


def test_validate_good_file(tmp_path, capsys):
    path = _write_config(tmp_path, GOOD_CONFIG)
    assert _cli("validate", str(path)) == EXIT_OK
    scenario, configs = parse_config(capsys.readouterr().out)
    assert scenario.name == "small"
    assert configs[1].buffer_size == 5


def test_validate_bad_file(tmp_path):
    document = json.loads(json.dumps(GOOD_CONFIG))
    document["optimizers"] = [{"algorithm": "SGD", "learning_rate": -1}]
    assert _cli("validate", str(_write_config(tmp_path, document))) == EXIT_VALIDATION


def test_validate_missing_file(tmp_path):
    assert _cli("validate", str(tmp_path / "missing.json")) == EXIT_IO


def test_missing_scenario_file(tmp_path):
    assert _cli("run", "--scenario", str(tmp_path / "missing.json")) == EXIT_IO


def test_unknown_algorithm(tmp_path):
    assert _cli("run", "--algo", "adagrad", "--out", str(tmp_path)) == EXIT_VALIDATION


@pytest.mark.parametrize(
    "argv",
    [
        ("run", "--iterations", "many"),
        ("run", "--measurement-source", "radar"),
        ("suite", "--emit", "pdf"),
        ("bogus",),
        (),
    ],
)
def test_bad_arguments(argv):
    assert _cli(*argv) == EXIT_VALIDATION


def test_small_suite(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TDOA_CHECKPOINTS", "0,10,20")
    code = _cli("suite", "--seeds", "0..2", "--iterations", "20", "--emit", "csv,svg,summary", "--out", str(tmp_path))
    assert code == EXIT_OK

    names = {p.name for p in tmp_path.iterdir()}
    assert {"summary.csv", "thresholds.csv", "claims.csv"} <= names
    assert {"scenario1_convergence.svg", "scenario2_convergence.svg"} <= names
    assert len([name for name in names if name.endswith(".csv") and "_seed" in name]) == 30

    with (tmp_path / "summary.csv").open(newline="") as source:
        rows = list(csv.DictReader(source))
    assert len(rows) == 2 * 5 * 3
    assert {row["checkpoint"] for row in rows} == {"0", "10", "20"}
    assert all(row["runs"] == "3" and row["failed"] == "0" for row in rows)

    with (tmp_path / "claims.csv").open(newline="") as source:
        claims = {row["claim"] for row in csv.DictReader(source)}
    assert "scenario1-ordering" in claims
    assert "scenario1" in capsys.readouterr().out
