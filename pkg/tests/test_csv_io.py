"""Tests for CSV series and summary files."""

import json
from pathlib import Path

import numpy as np
import pytest

from core.exceptions import OutputError
from schemas.density import FloatArray
from services.density_service import power_density
from utils.csv_io import (
    format_cell,
    read_density,
    read_series,
    write_density,
    write_series,
    write_summary,
)


class TestFormatCell:
    def test_seventeen_significant_digits(self) -> None:
        text = format_cell(0.1)
        assert text == "0.10000000000000001"
        assert float(text) == 0.1

    def test_numpy_float(self) -> None:
        value = np.float64(1.0) / 3.0
        assert float(format_cell(value)) == value

    @pytest.mark.parametrize(
        ("value", "text"), [(True, "true"), (False, "false"), (None, ""), (7, "7"), ("x", "x")]
    )
    def test_other_cells(self, value: object, text: str) -> None:
        assert format_cell(value) == text  # type: ignore[arg-type]


class TestSeries:
    def test_write_and_read(self, tmp_path: Path) -> None:
        path = write_series(tmp_path / "out" / "s.csv", ("n", "tv"), [(1, 0.5), (2, None)])
        header, rows = read_series(path)
        assert header == ["n", "tv"]
        assert rows == [["1", "0.5"], ["2", ""]]
        assert path.read_text(encoding="utf-8") == "n,tv\n1,0.5\n2,\n"

    def test_row_width_checked(self, tmp_path: Path) -> None:
        with pytest.raises(ValueError):
            write_series(tmp_path / "s.csv", ("n", "tv"), [(1,)])

    def test_unwritable(self, tmp_path: Path) -> None:
        blocker = tmp_path / "file"
        blocker.write_text("x", encoding="utf-8")
        with pytest.raises(OutputError):
            write_series(blocker / "s.csv", ("n",), [(1,)])

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(OutputError):
            read_series(tmp_path / "missing.csv")


def test_density_round_trip(tmp_path: Path, small_edges: FloatArray) -> None:
    density = power_density(small_edges, 0.3)
    path = write_density(tmp_path / "density.csv", density)
    assert read_density(path) == density


def test_summary_is_json(tmp_path: Path) -> None:
    path = write_summary(tmp_path / "summary.json", {"kind": "tails", "slope": -1.3})
    assert json.loads(path.read_text(encoding="utf-8")) == {"kind": "tails", "slope": -1.3}
