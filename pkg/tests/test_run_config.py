"""Tests for run config parsing and validation."""

import json
from pathlib import Path

import pytest

from core.config import settings
from core.constants import ExperimentKind, RenewalCheck
from core.exceptions import ConfigParseError, ConfigRangeError
from schemas.run_config import (
    ConstantSequenceSpec,
    CounterexampleExperiment,
    RenewalTailsExperiment,
    RunConfig,
    load_config,
    parse_config,
)

MEMORY_LOSS = {
    "experiment": {"kind": "memory-loss", "n_grid": [1, 2, 4, 8]},
    "sequence": {"generator": "constant", "gamma": 0.5},
    "grid": {"size": 2048, "geometric_cells": 100},
    "seed": 11,
    "assertions": [{"statistic": "tv", "metric": "slope", "upper": 0.0}],
}


def _parse(document: dict[str, object]) -> RunConfig:
    return parse_config(json.dumps(document))


class TestParseConfig:
    """JSON documents into validated run configs."""

    def test_minimal_document(self) -> None:
        config = _parse({"experiment": {"kind": "counterexample"}})
        assert config.kind is ExperimentKind.COUNTEREXAMPLE
        assert isinstance(config.experiment, CounterexampleExperiment)
        assert config.experiment.n == 1000
        assert config.seed == 0
        assert config.sequence is None

    def test_full_document(self) -> None:
        config = _parse(MEMORY_LOSS)
        assert config.kind is ExperimentKind.MEMORY_LOSS
        assert isinstance(config.sequence, ConstantSequenceSpec)
        assert config.grid.size == 2048
        assert config.assertions[0].upper == 0.0

    def test_gamma_star_out_of_range(self) -> None:
        document = {
            "experiment": {"kind": "partition"},
            "sequence": {"generator": "explicit", "gamma_star": 1.2, "gammas": [0.5]},
        }
        with pytest.raises(ConfigRangeError) as info:
            _parse(document)
        assert any("gamma_star" in field for field in info.value.fields)

    def test_unknown_key(self) -> None:
        with pytest.raises(ConfigRangeError) as info:
            _parse({"experiment": {"kind": "counterexample"}, "bogus": 1})
        assert "bogus" in info.value.fields

    def test_unknown_kind(self) -> None:
        with pytest.raises(ConfigRangeError):
            _parse({"experiment": {"kind": "spectra"}})

    def test_malformed_json(self) -> None:
        with pytest.raises(ConfigParseError) as info:
            parse_config('{\n  "experiment": {"kind": "counterexample"},\n  "seed": ,\n}')
        assert info.value.details["line"] == 3
        assert "line 3" in info.value.message

    def test_sequence_required(self) -> None:
        with pytest.raises(ConfigRangeError):
            _parse({"experiment": {"kind": "moments"}})

    def test_negative_seed(self) -> None:
        with pytest.raises(ConfigRangeError):
            _parse({"experiment": {"kind": "counterexample"}, "seed": -1})

    def test_gamma_above_its_bound(self) -> None:
        document = dict(MEMORY_LOSS)
        document["sequence"] = {"generator": "constant", "gamma": 0.6, "gamma_star": 0.5}
        with pytest.raises(ConfigRangeError):
            _parse(document)

    def test_explicit_sequence_needs_one_source(self) -> None:
        document = dict(MEMORY_LOSS)
        document["sequence"] = {"generator": "explicit", "gamma_star": 0.5}
        with pytest.raises(ConfigRangeError):
            _parse(document)

    def test_assertion_needs_bounds(self) -> None:
        document = {
            "experiment": {"kind": "counterexample"},
            "assertions": [{"statistic": "counterexample", "metric": "max_value"}],
        }
        with pytest.raises(ConfigRangeError):
            _parse(document)

    def test_passed_assertion_needs_no_bounds(self) -> None:
        config = _parse(
            {
                "experiment": {"kind": "counterexample"},
                "assertions": [{"statistic": "counterexample", "metric": "passed"}],
            }
        )
        assert config.assertions[0].lower is None

    def test_stretched_exponential_exponent(self) -> None:
        with pytest.raises(ConfigRangeError):
            _parse({"experiment": {"kind": "renewal-tails", "check": "stail_exp", "beta": 2.0}})
        config = _parse(
            {"experiment": {"kind": "renewal-tails", "check": "stail_exp", "beta": 0.5}}
        )
        assert isinstance(config.experiment, RenewalTailsExperiment)
        assert config.experiment.check is RenewalCheck.STAIL_EXP

    def test_output_dir_defaults_to_settings(
        self, monkeypatch: pytest.MonkeyPatch, tmp_path: Path
    ) -> None:
        monkeypatch.setattr(settings, "output_dir", tmp_path / "runs")
        config = _parse({"experiment": {"kind": "counterexample"}})
        assert config.output_dir == tmp_path / "runs"

    def test_beta_prime_above_beta(self) -> None:
        with pytest.raises(ConfigRangeError):
            _parse({"experiment": {"kind": "renewal-tails", "beta": 2.0, "beta_prime": 3.0}})


class TestRoundTrip:
    """Serialized configs parse back to the same config."""

    @pytest.mark.parametrize(
        "document",
        [
            MEMORY_LOSS,
            {"experiment": {"kind": "qv-check", "beta": 1.5, "oracle_lengths": [10, 100]}},
            {
                "experiment": {"kind": "tails", "t_grid": [1.5, 3.0, 7.25]},
                "sequence": {
                    "generator": "quasistatic",
                    "gamma_star": 0.8,
                    "curve": "linear",
                    "params": {"start": 0.6, "end": 0.8},
                    "level": 100,
                },
            },
        ],
    )
    def test_lossless(self, document: dict[str, object]) -> None:
        config = _parse(document)
        again = parse_config(config.model_dump_json())
        assert again == config
        assert again.config_hash() == config.config_hash()

    def test_hash_depends_on_content(self) -> None:
        config = _parse(MEMORY_LOSS)
        assert config.model_copy(update={"seed": 12}).config_hash() != config.config_hash()


def test_load_config(tmp_path: Path) -> None:
    path = tmp_path / "run.json"
    path.write_text(json.dumps(MEMORY_LOSS), encoding="utf-8")
    assert load_config(path) == _parse(MEMORY_LOSS)
