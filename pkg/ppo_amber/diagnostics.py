"""IS-weight diagnostics: avg-IS per iteration and R' across lags and action dims."""

import csv
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from .const import ACTION_DIMS_FILE, ENV_SYNTH_PREFIX, ISWEIGHT_SUMMARY_FILE
from .helpers import sanitize_name
from .models import IterationRecord, TrainConfig
from .trainer import train

_LOGGER = logging.getLogger(__name__)


def lag_means(records: Sequence[IterationRecord]) -> list[float]:
    """Mean R' per lag over the iterations where that lag was stored."""
    longest = max((len(r.batch_avg_weights) for r in records), default=0)
    means = []
    for lag in range(longest):
        values = [
            r.batch_avg_weights[lag]
            for r in records
            if len(r.batch_avg_weights) > lag
        ]
        means.append(float(np.mean(values)))
    return means


def isweight_summary(records: Sequence[IterationRecord]) -> dict[str, Any]:
    """Run-level view of the avg-IS diagnostic and the batch-average weights."""
    if not records:
        raise ValueError("isweight_summary needs at least one iteration record")
    return {
        "iterations": len(records),
        "mean_avg_is": float(np.mean([r.avg_is for r in records])),
        "mean_active": float(np.mean([r.num_active for r in records])),
        "lag_means": lag_means(records),
    }


def _write_rows(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def run_isweight(config: TrainConfig, out_dir: Path) -> dict[str, Any]:
    """Train once and write the IS-weight summary next to the metrics file."""
    records = train(config, out_dir)
    summary = isweight_summary(records)
    _write_rows(
        out_dir / ISWEIGHT_SUMMARY_FILE,
        ("lag", "mean_batch_avg_weight"),
        enumerate(summary["lag_means"]),
    )
    _LOGGER.info(
        "IS-weight run over %d iterations: mean avg-IS %.4f, mean active %.2f",
        summary["iterations"],
        summary["mean_avg_is"],
        summary["mean_active"],
    )
    return summary


def previous_batch_weight(records: Sequence[IterationRecord]) -> float:
    """Mean R'_{i,1}: the previous batch measured against the current policy."""
    values = [r.batch_avg_weights[1] for r in records if len(r.batch_avg_weights) > 1]
    if not values:
        raise ValueError(
            "No iteration held a previous batch; replay_length must be >= 2"
        )
    return float(np.mean(values))


def run_action_dims(
    config: TrainConfig, dims: Sequence[int], out_dir: Path
) -> list[dict[str, Any]]:
    """Train on synth-K for every K and report R'_{i,1} per action dimension.

    The IS weight of a factorized Gaussian is a product over action dimensions,
    so R' is expected to grow with K.
    """
    if config.replay_length < 2:
        raise ValueError(
            f"Action-dimension mode measures lag 1 and needs replay_length >= 2, "
            f"got {config.replay_length}"
        )
    rows = []
    for dim in dims:
        env_id = f"{ENV_SYNTH_PREFIX}{dim}"
        run_config = TrainConfig.model_validate(
            {**config.to_file_dict(), "env": env_id}
        )
        records = train(run_config, out_dir / sanitize_name(env_id))
        row = {
            "action_dim": dim,
            "mean_batch_avg_weight_lag1": previous_batch_weight(records),
            "mean_avg_is": float(np.mean([r.avg_is for r in records])),
        }
        _LOGGER.info(
            "K=%d: mean R'(lag 1)=%.6f", dim, row["mean_batch_avg_weight_lag1"]
        )
        rows.append(row)

    _write_rows(
        out_dir / ACTION_DIMS_FILE,
        ("action_dim", "mean_batch_avg_weight_lag1", "mean_avg_is"),
        (
            [row["action_dim"], row["mean_batch_avg_weight_lag1"], row["mean_avg_is"]]
            for row in rows
        ),
    )
    return rows
