"""CSV series and JSON summaries on disk."""

import csv
import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from core.config import settings
from core.exceptions import OutputError
from schemas.density import GridDensity

logger = logging.getLogger(__name__)

Cell = float | int | str | bool | None

DENSITY_COLUMNS = ("edge", "value")


def format_cell(value: Cell, digits: int | None = None) -> str:
    """Reals with settings.csv_significant_digits significant digits; None as empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float | np.floating):
        return f"{float(value):.{digits or settings.csv_significant_digits}g}"
    return str(value)


def _ensure_parent(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(str(path.parent), f"Cannot create directory ({e.strerror})") from e


def write_series(
    path: Path, columns: Sequence[str], rows: Iterable[Sequence[Cell]]
) -> Path:
    """Write a header row and one line per row, comma separated, UTF-8."""
    _ensure_parent(path)
    count = 0
    try:
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                if len(row) != len(columns):
                    raise ValueError(f"Row {row!r} does not match columns {list(columns)}")
                writer.writerow([format_cell(v) for v in row])
                count += 1
    except OSError as e:
        raise OutputError(str(path), f"Cannot write CSV ({e.strerror})") from e
    logger.debug(f"Wrote {count} rows to {path}")
    return path


def read_series(path: Path) -> tuple[list[str], list[list[str]]]:
    """Header and raw string cells of a CSV written by write_series."""
    try:
        with path.open(encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, [])
            return header, [row for row in reader]
    except OSError as e:
        raise OutputError(str(path), f"Cannot read CSV ({e.strerror})") from e


def write_density(path: Path, density: GridDensity) -> Path:
    """One (edge, value) row per cell plus a closing row with the right edge."""
    rows: list[tuple[Cell, Cell]] = [
        (float(e), float(v)) for e, v in zip(density.edges[:-1], density.values, strict=True)
    ]
    rows.append((float(density.edges[-1]), None))
    return write_series(path, DENSITY_COLUMNS, rows)


def read_density(path: Path) -> GridDensity:
    """Inverse of write_density."""
    header, rows = read_series(path)
    if tuple(header) != DENSITY_COLUMNS or len(rows) < 2:
        raise OutputError(str(path), "Not a density CSV")
    edges = np.array([float(r[0]) for r in rows])
    values = np.array([float(r[1]) for r in rows[:-1]])
    edges.setflags(write=False)
    return GridDensity(edges=edges, values=values)


def write_summary(path: Path, summary: dict[str, Any]) -> Path:
    """Pretty-printed JSON summary record."""
    _ensure_parent(path)
    try:
        path.write_text(
            json.dumps(summary, indent=2, ensure_ascii=False, allow_nan=True) + "\n",
            encoding="utf-8",
        )
    except OSError as e:
        raise OutputError(str(path), f"Cannot write summary ({e.strerror})") from e
    return path
