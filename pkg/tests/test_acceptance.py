"""Long-running training checks; run with ``pytest -m slow``."""

import statistics

import numpy as np
import pytest

from ppo_amber.diagnostics import run_action_dims
from ppo_amber.models import TrainConfig
from ppo_amber.trainer import evaluate, train

pytestmark = pytest.mark.slow

SEEDS = range(5)


def run_mean(records, field):
    """Mean of one record field over a run."""
    return float(np.mean([getattr(r, field) for r in records]))


def pendulum(**overrides):
    """Pendulum config at desk scale."""
    return TrainConfig.model_validate(
        {"env": "pendulum", "horizon": 512, "total_steps": 51_200, **overrides}
    )


class TestIsWeightTrends:
    """Test suite for the IS-weight diagnostics at desk scale."""

    def test_previous_batch_weight_grows_with_action_dim(self, tmp_path):
        """Test R' at lag 1 is non-decreasing in K for at least 4 of 5 seeds."""
        dims = [1, 2, 4, 8, 16]
        monotone = 0
        for seed in SEEDS:
            config = TrainConfig(
                env="synth-1", horizon=512, total_steps=25_600, seed=seed
            )
            rows = run_action_dims(config, dims, tmp_path / f"seed{seed}")
            weights = [row["mean_batch_avg_weight_lag1"] for row in rows]
            monotone += all(a <= b for a, b in zip(weights, weights[1:]))
        assert monotone >= 4

    def test_avg_is_needs_scaled_minibatch(self):
        """Test M = M_PPO * L keeps avg-IS near PPO; M = M_PPO inflates it."""
        close, inflated = 0, 0
        for seed in SEEDS:
            ppo = run_mean(train(pendulum(replay_length=1, seed=seed)), "avg_is")
            scaled = run_mean(
                train(pendulum(replay_length=8, adaptive=False, seed=seed)), "avg_is"
            )
            fixed = run_mean(
                train(
                    pendulum(
                        replay_length=8,
                        adaptive=False,
                        fixed_minibatch=True,
                        seed=seed,
                    )
                ),
                "avg_is",
            )
            close += abs(scaled - ppo) <= 0.2 * ppo
            inflated += fixed >= 1.2 * ppo
        assert close >= 3
        assert inflated >= 3


class TestLearning:
    """Test suite for learning on the pendulum."""

    @pytest.fixture(scope="class")
    def finals(self):
        """Final-100 mean returns of AMBER and PPO per seed."""
        results = {"amber": [], "ppo": []}
        for seed in SEEDS:
            amber = train(TrainConfig(env="pendulum", total_steps=301_056, seed=seed))
            ppo = train(
                TrainConfig(
                    env="pendulum",
                    total_steps=301_056,
                    replay_length=1,
                    adaptive=False,
                    clip=0.3,
                    seed=seed,
                )
            )
            results["amber"].append(amber[-1].mean_return_100)
            results["ppo"].append(ppo[-1].mean_return_100)
        return results

    def test_cost_reduced_threefold(self, finals):
        """Test trained returns cut the untrained cost by a factor of three."""
        for seed, final in zip(SEEDS, finals["amber"], strict=True):
            untrained = evaluate(TrainConfig(env="pendulum", seed=seed), 100)
            assert final >= untrained / 3

    def test_amber_not_worse_than_ppo(self, finals):
        """Test the median AMBER score is at least the median PPO score."""
        assert statistics.median(finals["amber"]) >= statistics.median(finals["ppo"])


class TestBatchDrop:
    """Test suite for the drop factor's effect on the active set."""

    def test_larger_drop_factor_keeps_more_batches(self):
        """Test eps_b = 0.25 keeps more batches active than eps_b = 0.10."""
        wins = 0
        for seed in SEEDS:
            loose = run_mean(train(pendulum(batch_drop=0.25, seed=seed)), "num_active")
            tight = run_mean(train(pendulum(batch_drop=0.10, seed=seed)), "num_active")
            wins += loose > tight
        assert wins >= 3
