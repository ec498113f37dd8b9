"""CSV, JSON and JSON-lines files read and written by the command line."""
from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .behavior import SequenceModel
from .const import TIMESTAMP_COLUMN
from .core import (
    InconsistencyInstance,
    MultiSeries,
    RepairReport,
    RepairStructureError,
    RotationPattern,
    TimeInterval,
    rotate_rows,
)
from .evaluation import GroundTruth, Scores

_LOGGER = logging.getLogger(__name__)

_EPOCH_PATTERN = r"^-?\d+$"


class RepairDataError(Exception):
    """Exception raised for malformed input data."""


@dataclass
class SeriesFile:
    """A parsed series together with the raw text it was read from."""

    series: MultiSeries
    header: list[str]
    cells: np.ndarray

    @property
    def timestamps(self) -> list[str]:
        """Return the raw timestamp texts."""
        return list(self.series.time_labels)


def _parse_timestamps(labels: pd.Series) -> np.ndarray:
    """Return epoch integers as is and ISO-8601 labels as nanoseconds since the epoch."""
    if labels.str.match(_EPOCH_PATTERN).all():
        return labels.astype("int64").to_numpy()
    try:
        parsed = pd.to_datetime(labels, format="ISO8601", utc=True)
    except (ValueError, TypeError) as err:
        raise RepairDataError(f"Timestamps are neither epoch integers nor ISO-8601: {err}") from err
    return parsed.astype("int64").to_numpy()


def read_series(path: Path | str) -> SeriesFile:
    """Read a `timestamp,<dims...>` CSV file; empty cells are missing values.

    Blank lines are read as rows so that data row i sits on file line i + 2.
    Trailing blank lines are dropped and any other blank line is an error.
    """
    try:
        raw = pd.read_csv(
            path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=False
        )
    except pd.errors.EmptyDataError as err:
        raise RepairDataError(f"{path}: file is empty") from err
    except pd.errors.ParserError as err:
        raise RepairDataError(f"{path}: {err}") from err
    except OSError as err:
        raise RepairDataError(f"{path}: {err}") from err

    # the header is read as a row; pandas would rename repeated names
    header = [str(name) for name in raw.iloc[0]]
    if not header or header[0] != TIMESTAMP_COLUMN or len(header) < 2:
        raise RepairDataError(
            f"{path}: header must be '{TIMESTAMP_COLUMN}' followed by dimension names"
        )
    repeated = sorted({name for name in header if header.count(name) > 1})
    if repeated:
        raise RepairDataError(f"{path}: header repeats column names {repeated}")
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = header
    blank = (frame.isna() | frame.eq("")).all(axis=1).to_numpy()
    if blank.any():
        last = len(blank) - int(np.argmin(blank[::-1])) if not blank.all() else 0
        frame = frame.iloc[:last]
        interior = np.flatnonzero(blank[:last])
        if interior.size:
            raise RepairDataError(f"{path}: line {int(interior[0]) + 2} is blank")
    if frame.empty:
        raise RepairDataError(f"{path}: no data rows")

    short = frame.isna().any(axis=1).to_numpy()
    if short.any():
        line = int(np.flatnonzero(short)[0]) + 2
        raise RepairDataError(f"{path}: line {line} has fewer than {len(header)} fields")

    cells = frame[header[1:]].to_numpy(dtype=object)
    numeric = frame[header[1:]].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    invalid = np.isnan(numeric) & (cells != "")
    invalid &= np.char.lower(cells.astype(str)) != "nan"
    if invalid.any():
        row, column = np.argwhere(invalid)[0]
        raise RepairDataError(
            f"{path}: line {row + 2}, column '{header[column + 1]}': "
            f"'{cells[row, column]}' is not a number"
        )

    labels = frame[TIMESTAMP_COLUMN]
    timestamps = _parse_timestamps(labels)
    decreasing = np.flatnonzero(np.diff(timestamps) <= 0)
    if decreasing.size:
        line = int(decreasing[0]) + 3
        raise RepairDataError(
            f"{path}: line {line}: timestamps must be strictly increasing"
        )

    try:
        series = MultiSeries(
            values=numeric,
            timestamps=timestamps,
            dim_names=tuple(header[1:]),
            time_labels=tuple(labels),
        )
    except RepairStructureError as err:
        raise RepairDataError(f"{path}: {err}") from err
    _LOGGER.info("Read %s rows x %s dimensions from %s", series.length, series.dim_count, path)
    return SeriesFile(series, header, cells)


def permuted_cells(
    source: SeriesFile, applied: Iterable[tuple[TimeInterval, RotationPattern]]
) -> np.ndarray:
    """Return the raw cell texts moved by the applied rotations."""
    cells = source.cells.copy()
    for interval, rotation in applied:
        rotate_rows(cells, rotation, interval)
    return cells


def write_series(path: Path | str, source: SeriesFile, cells: np.ndarray) -> None:
    """Write raw cell texts under the source header and timestamps."""
    frame = pd.DataFrame(cells, columns=source.header[1:])
    frame.insert(0, TIMESTAMP_COLUMN, source.timestamps)
    frame.to_csv(path, index=False, lineterminator="\n")
    _LOGGER.info("Wrote %s rows to %s", len(frame), path)


def _axis(series: MultiSeries) -> dict[str, Any]:
    """Return the time axis fields shared by reports and ground truths."""
    return {
        "length": series.length,
        "first_timestamp": series.label(0),
        "last_timestamp": series.label(series.length - 1),
    }


def _instances_as_json(
    instances: Sequence[InconsistencyInstance], series: MultiSeries
) -> list[dict[str, Any]]:
    return [
        {
            "interval": [series.label(instance.interval.start), series.label(instance.interval.end)],
            "index": instance.interval.as_list(),
            "rotations": [list(rotation.cycle) for rotation in instance.rotations],
        }
        for instance in instances
    ]


def _instances_from_json(records: Sequence[dict[str, Any]]) -> list[InconsistencyInstance]:
    """Rebuild instances from their `index` and `rotations` fields."""
    return [
        InconsistencyInstance(
            tuple(RotationPattern(tuple(cycle)) for cycle in record["rotations"]),
            TimeInterval(*record["index"]),
        )
        for record in records
    ]


def _read_json(path: Path | str) -> dict[str, Any]:
    """Read a JSON document."""
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise RepairDataError(f"{path}: {err}") from err


def _write_json(path: Path | str, document: Any) -> None:
    Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    _LOGGER.info("Wrote %s", path)


def write_report(
    path: Path | str, report: RepairReport, series: MultiSeries, review_path: Path | str | None
) -> None:
    """Write the repair report with its time axis and config echo."""
    _write_json(
        path,
        {
            **_axis(series),
            "instances": _instances_as_json(report.instances, series),
            "review_queue": str(review_path) if review_path is not None else None,
            "config": report.config_echo,
        },
    )


def read_report(path: Path | str) -> tuple[RepairReport, dict[str, Any]]:
    """Read a repair report and its time axis."""
    document = _read_json(path)
    try:
        report = RepairReport(
            _instances_from_json(document["instances"]),
            int(document["length"]),
            config_echo=document.get("config") or {},
        )
        axis = {key: document[key] for key in ("length", "first_timestamp", "last_timestamp")}
    except (KeyError, TypeError, ValueError, RepairStructureError) as err:
        raise RepairDataError(f"{path}: invalid report: {err}") from err
    return report, axis


def write_truth(path: Path | str, truth: GroundTruth, series: MultiSeries) -> None:
    """Write the ground truth of an injection run."""
    _write_json(path, {**_axis(series), "instances": _instances_as_json(truth.instances, series)})


def read_truth(path: Path | str) -> tuple[GroundTruth, dict[str, Any]]:
    """Read a ground truth file and its time axis."""
    document = _read_json(path)
    try:
        truth = GroundTruth(_instances_from_json(document["instances"]), int(document["length"]))
        axis = {key: document[key] for key in ("length", "first_timestamp", "last_timestamp")}
    except (KeyError, TypeError, ValueError, RepairStructureError) as err:
        raise RepairDataError(f"{path}: invalid ground truth: {err}") from err
    return truth, axis


def write_jsonl(path: Path | str, records: Iterable[dict[str, Any]]) -> int:
    """Write one JSON document per line and return the record count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
            count += 1
    _LOGGER.info("Wrote %s records to %s", count, path)
    return count


def write_models(path: Path | str, models: Sequence[SequenceModel]) -> None:
    """Write model snapshots."""
    _write_json(path, [model.as_dict() for model in models])


def read_models(path: Path | str) -> list[SequenceModel]:
    """Read model snapshots written by write_models."""
    document = _read_json(path)
    if not isinstance(document, list):
        raise RepairDataError(f"{path}: expected a list of model snapshots")
    try:
        return [SequenceModel.from_dict(snapshot) for snapshot in document]
    except RepairStructureError as err:
        raise RepairDataError(f"{path}: {err}") from err


def write_scores(json_path: Path | str, csv_path: Path | str, scores: Scores) -> None:
    """Write scores as JSON and as a one-row CSV."""
    _write_json(json_path, scores.as_dict())
    pd.DataFrame([scores.as_row()]).to_csv(csv_path, index=False, lineterminator="\n")


def write_results(path: Path | str, rows: Sequence[dict[str, Any]]) -> None:
    """Write sweep rows."""
    pd.DataFrame(list(rows)).to_csv(path, index=False, lineterminator="\n")
    _LOGGER.info("Wrote %s sweep rows to %s", len(rows), path)
