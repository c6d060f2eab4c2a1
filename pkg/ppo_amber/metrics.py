"""Episode tracking, IS-weight diagnostics, metrics files and normalized scores."""

import csv
import logging
from collections import deque
from collections.abc import Iterable
from pathlib import Path
from typing import Any, TextIO

import numpy as np
import yaml

from .const import (
    LIST_SEPARATOR,
    MANIFEST_SCHEMA_VERSION,
    METRICS_SCHEMA_VERSION,
    RETURN_WINDOW,
    SCORE_NORMALIZATION,
)
from .exceptions import DegenerateRangeError
from .models import IterationRecord, ScoreTable, TrainConfig

_LOGGER = logging.getLogger(__name__)

METRICS_COLUMNS: tuple[str, ...] = tuple(IterationRecord.model_fields)


class EpisodeTracker:
    """Accumulates rewards and remembers returns of completed episodes."""

    def __init__(self, window: int = RETURN_WINDOW) -> None:
        """Initialize tracker."""
        self._current = 0.0
        self._recent: deque[float] = deque(maxlen=window)
        self._count = 0
        self._total = 0.0

    def add(self, reward: float, done: bool) -> None:
        """Record one step."""
        self._current += reward
        if done:
            self._recent.append(self._current)
            self._count += 1
            self._total += self._current
            self._current = 0.0

    @property
    def episodes_completed(self) -> int:
        """Number of finished episodes."""
        return self._count

    @property
    def recent_mean(self) -> float | None:
        """Mean return of the last ``window`` finished episodes."""
        return float(np.mean(self._recent)) if self._recent else None

    @property
    def overall_mean(self) -> float | None:
        """Mean return of every finished episode."""
        return self._total / self._count if self._count else None


def avg_is_diag(ratios: np.ndarray | Iterable[float]) -> float:
    """Mean of 1 + |1 - R_m| over all sampled ratios."""
    values = np.asarray(
        ratios if isinstance(ratios, np.ndarray) else list(ratios), dtype=np.float64
    )
    if values.size == 0:
        raise ValueError("avg_is_diag needs at least one ratio")
    return float(np.mean(1.0 + np.abs(1.0 - values)))


def normalized_score(raw: float, task_min: float, task_max: float) -> float:
    """Min-max normalize a score against the compared runs of its task."""
    if not task_max > task_min:
        raise DegenerateRangeError(
            f"Score range [{task_min}, {task_max}] has no width"
        )
    return (raw - task_min) / (task_max - task_min)


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, list):
        return LIST_SEPARATOR.join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_row(row: dict[str, str]) -> IterationRecord:
    data: dict[str, Any] = {}
    for key, raw in row.items():
        if key == "batch_avg_weights":
            data[key] = [float(v) for v in raw.split(LIST_SEPARATOR)] if raw else []
        elif raw == "":
            data[key] = None
        else:
            data[key] = raw
    return IterationRecord(**data)


class MetricsWriter:
    """Comma-separated sink with one header line and one row per iteration."""

    def __init__(self, stream: TextIO) -> None:
        """Initialize writer."""
        self._stream = stream
        self._writer = csv.writer(stream, lineterminator="\n")
        self._header_written = False

    @classmethod
    def open(cls, path: Path) -> "MetricsWriter":
        """Create (or truncate) a metrics file."""
        path.parent.mkdir(parents=True, exist_ok=True)
        return cls(path.open("w", encoding="utf-8", newline=""))

    def emit(self, record: IterationRecord) -> None:
        """Write one record and flush."""
        if not self._header_written:
            self._writer.writerow(METRICS_COLUMNS)
            self._header_written = True
        dumped = record.model_dump()
        self._writer.writerow([_format_value(dumped[col]) for col in METRICS_COLUMNS])
        self._stream.flush()

    def close(self) -> None:
        """Close the underlying stream."""
        self._stream.close()

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


def emit_record(record: IterationRecord, sink: MetricsWriter) -> None:
    """Append one iteration record to a metrics sink."""
    sink.emit(record)


def read_records(path: Path) -> list[IterationRecord]:
    """Parse a metrics file back into records."""
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRICS_COLUMNS:
            raise ValueError(
                f"{path}: header {reader.fieldnames} does not match metrics "
                f"schema v{METRICS_SCHEMA_VERSION}"
            )
        return [_parse_row(row) for row in reader]


def write_manifest(path: Path, config: TrainConfig, **extra: Any) -> None:
    """Write the run manifest; it is itself a loadable config file."""
    manifest = {
        **config.to_file_dict(),
        "manifest_schema": MANIFEST_SCHEMA_VERSION,
        "metrics_schema": METRICS_SCHEMA_VERSION,
        "score_normalization": SCORE_NORMALIZATION,
        **extra,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=True)


def read_manifest(path: Path) -> dict[str, Any]:
    """Load a manifest as a flat mapping."""
    with path.open(encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: manifest must be a mapping")
    return data


def _task_ranges(table: ScoreTable, kind: str) -> dict[str, tuple[float, float]]:
    ranges: dict[str, tuple[float, float]] = {}
    for task in table.tasks:
        scores = [getattr(c, kind) for c in table.cells if c.task == task]
        ranges[task] = (min(scores), max(scores))
    return ranges


def normalized_scores(table: ScoreTable, kind: str = "final_score") -> list[float]:
    """NS of every cell, in cell order.

    A task whose compared runs all scored the same gives every cell 1.0.
    """
    ranges = _task_ranges(table, kind)
    result = []
    warned: set[str] = set()
    for cell in table.cells:
        low, high = ranges[cell.task]
        try:
            result.append(normalized_score(getattr(cell, kind), low, high))
        except DegenerateRangeError:
            if cell.task not in warned:
                _LOGGER.warning(
                    "All %s values for task %s equal %s; scoring them 1.0",
                    kind,
                    cell.task,
                    low,
                )
                warned.add(cell.task)
            result.append(1.0)
    return result


def average_normalized_scores(
    table: ScoreTable, kind: str = "final_score"
) -> dict[str, float]:
    """ANS per config: NS averaged over seeds within a task, then over tasks."""
    scores = normalized_scores(table, kind)
    per_task: dict[str, dict[str, list[float]]] = {}
    for cell, ns in zip(table.cells, scores):
        per_task.setdefault(cell.config, {}).setdefault(cell.task, []).append(ns)
    return {
        config: float(np.mean([np.mean(v) for v in tasks.values()]))
        for config, tasks in per_task.items()
    }


def rank_configs(table: ScoreTable) -> list[dict[str, Any]]:
    """Summary rows sorted by final ANS, best first."""
    final = average_normalized_scores(table, "final_score")
    speed = average_normalized_scores(table, "speed_score")
    rows = [
        {
            "config": config,
            "final_ans": final[config],
            "speed_ans": speed[config],
            "runs": sum(1 for c in table.cells if c.config == config),
        }
        for config in table.configs
    ]
    rows.sort(key=lambda row: (-row["final_ans"], row["config"]))
    return rows

