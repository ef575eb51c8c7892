"""Tests for the command-line dispatcher."""

import json
from pathlib import Path

import pytest

from cli.app import create_parser, main
from core.constants import ExitCode, ExperimentKind


@pytest.fixture
def counterexample_config(tmp_path: Path) -> Path:
    path = tmp_path / "counterexample.json"
    document = {
        "experiment": {"kind": "counterexample", "n": 10, "paths": 20},
        "output_dir": str(tmp_path / "default"),
    }
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def test_every_kind_has_a_subcommand() -> None:
    parser = create_parser()
    for kind in ExperimentKind:
        args = parser.parse_args([kind.value, "run.json"])
        assert args.config == Path("run.json")


def test_run_with_overrides(
    counterexample_config: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    out = tmp_path / "override"
    status = main(["counterexample", str(counterexample_config), "--seed", "3", "--out", str(out)])
    assert status == ExitCode.OK
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["seed"] == 3
    assert (out / "counterexample.csv").exists()
    assert not (tmp_path / "default").exists()
    assert "counterexample" in capsys.readouterr().out


def test_kind_mismatch(counterexample_config: Path) -> None:
    assert main(["moments", str(counterexample_config)]) == ExitCode.CONFIG_ERROR


def test_missing_config(tmp_path: Path) -> None:
    assert main(["tails", str(tmp_path / "absent.json")]) == ExitCode.CONFIG_ERROR


def test_malformed_config(tmp_path: Path) -> None:
    path = tmp_path / "bad.json"
    path.write_text("{ not json", encoding="utf-8")
    assert main(["counterexample", str(path)]) == ExitCode.CONFIG_ERROR


def test_negative_seed(counterexample_config: Path) -> None:
    status = main(["counterexample", str(counterexample_config), "--seed", "-4"])
    assert status == ExitCode.CONFIG_ERROR


def test_unwritable_output(counterexample_config: Path, tmp_path: Path) -> None:
    blocker = tmp_path / "blocker"
    blocker.write_text("x", encoding="utf-8")
    status = main(["counterexample", str(counterexample_config), "--out", str(blocker / "o")])
    assert status == ExitCode.OUTPUT_ERROR


def test_failed_assertion(tmp_path: Path) -> None:
    path = tmp_path / "run.json"
    document = {
        "experiment": {"kind": "counterexample", "n": 5, "paths": 5},
        "assertions": [{"statistic": "counterexample", "metric": "max_value", "upper": -1.0}],
        "output_dir": str(tmp_path / "out"),
    }
    path.write_text(json.dumps(document), encoding="utf-8")
    assert main(["counterexample", str(path)]) == ExitCode.ASSERTION_FAILED


def test_unknown_subcommand() -> None:
    with pytest.raises(SystemExit):
        main(["spectra", "run.json"])
