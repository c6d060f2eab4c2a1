"""Test suite for the IS-weight diagnostics."""

import csv

import pytest

from ppo_amber.const import ACTION_DIMS_FILE, ISWEIGHT_SUMMARY_FILE, METRICS_FILE
from ppo_amber.diagnostics import (
    isweight_summary,
    lag_means,
    previous_batch_weight,
    run_action_dims,
    run_isweight,
)
from ppo_amber.models import TrainConfig
from ppo_amber.trainer import train


def small_config(**overrides):
    """Fast synth config."""
    return TrainConfig.model_validate(
        {
            "env": "synth-1",
            "total_steps": 256,
            "horizon": 64,
            "minibatch": 16,
            "epochs": 2,
            **overrides,
        }
    )


class TestIsWeights:
    """Test suite for IS-weight summaries."""

    def test_single_batch(self):
        """Test with L = 1 only lag 0 exists and its weight is 1."""
        records = train(small_config(replay_length=1))
        assert lag_means(records) == [1.0]
        with pytest.raises(ValueError):
            previous_batch_weight(records)

    def test_lags_grow_with_memory(self):
        """Test every stored lag is summarized with weights of at least 1."""
        records = train(small_config(replay_length=4, adaptive=False))
        means = lag_means(records)
        assert len(means) == 4
        assert means[0] == 1.0
        assert all(m >= 1.0 for m in means)
        summary = isweight_summary(records)
        assert summary["iterations"] == 4
        assert summary["mean_active"] == pytest.approx((1 + 2 + 3 + 4) / 4)
        assert summary["mean_avg_is"] >= 1.0

    def test_empty(self):
        """Test a summary needs records."""
        with pytest.raises(ValueError):
            isweight_summary([])

    def test_run_writes_summary(self, tmp_path):
        """Test the run writes metrics and one summary row per lag."""
        summary = run_isweight(small_config(replay_length=2), tmp_path)
        assert (tmp_path / METRICS_FILE).exists()
        with (tmp_path / ISWEIGHT_SUMMARY_FILE).open(encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["lag", "mean_batch_avg_weight"]
        assert len(rows) == 1 + len(summary["lag_means"])


class TestActionDims:
    """Test suite for the action-dimension sweep."""

    def test_one_row_per_dimension(self, tmp_path):
        """Test each K trains its own synth task and reports R' at lag 1."""
        rows = run_action_dims(small_config(replay_length=2), [1, 4], tmp_path)
        assert [row["action_dim"] for row in rows] == [1, 4]
        assert all(row["mean_batch_avg_weight_lag1"] >= 1.0 for row in rows)
        assert (tmp_path / "synth-1" / METRICS_FILE).exists()
        assert (tmp_path / "synth-4" / METRICS_FILE).exists()
        with (tmp_path / ACTION_DIMS_FILE).open(encoding="utf-8") as fh:
            assert len(list(csv.reader(fh))) == 3

    def test_needs_previous_batch(self, tmp_path):
        """Test L = 1 cannot measure lag 1."""
        with pytest.raises(ValueError, match="replay_length"):
            run_action_dims(small_config(replay_length=1), [1], tmp_path)
