"""Test suite for the training loop."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from ppo_amber.const import CHECKPOINT_FILE, MANIFEST_FILE, METRICS_FILE
from ppo_amber.exceptions import NonFiniteError, TrainingAborted
from ppo_amber.helpers import schedule
from ppo_amber.metrics import read_records
from ppo_amber.models import TrainConfig
from ppo_amber.net import load_checkpoint
from ppo_amber.trainer import Trainer, evaluate, train

# synth-1 episodes last 100 steps, so a 64-step horizon cuts them mid-way
SMALL = {
    "env": "synth-1",
    "total_steps": 256,
    "horizon": 64,
    "minibatch": 16,
    "epochs": 2,
}


def small_config(**overrides):
    """Fast desk-scale config."""
    return TrainConfig.model_validate({**SMALL, **overrides})


class TestSchedule:
    """Test suite for linear decay."""

    @pytest.mark.parametrize(
        ("step", "expected"), [(0, 3e-4), (50, 1.5e-4), (100, 0.0)]
    )
    def test_linear(self, step, expected):
        """Test the value decays linearly to zero."""
        assert schedule(3e-4, step, 100) == pytest.approx(expected, abs=1e-18)

    def test_infinite_stays_infinite(self):
        """Test an infinite drop factor is not decayed."""
        assert math.isinf(schedule(math.inf, 70, 100))

    def test_out_of_range(self):
        """Test steps beyond the run are rejected."""
        with pytest.raises(ValueError):
            schedule(1.0, 101, 100)


class TestTrainConfig:
    """Test suite for config validation."""

    def test_lambda_alias(self):
        """Test the file key ``lambda`` maps onto ``lam`` and back."""
        config = small_config(**{"lambda": 0.9})
        assert config.lam == 0.9
        assert config.to_file_dict()["lambda"] == 0.9

    def test_iterations(self):
        """Test T / N iterations of S * N / M_PPO updates."""
        config = small_config()
        assert config.iterations == 4
        assert config.updates_per_iteration == 8

    @pytest.mark.parametrize(
        "overrides",
        [
            {"horizon": 60},
            {"total_steps": 100},
            {"env": "cartpole"},
            {"batch_drop": -0.1},
            {"unknown_key": 1},
        ],
    )
    def test_invalid(self, overrides):
        """Test invalid values are rejected."""
        with pytest.raises(ValidationError):
            small_config(**overrides)

    def test_missing_env(self):
        """Test env is required."""
        with pytest.raises(ValidationError, match="env"):
            TrainConfig()


class TestTrainer:
    """Test suite for Trainer."""

    class TestRollout:
        """Test collect_rollout."""

        def test_episodes_carry_over(self):
            """Test consecutive rollouts continue the same episode."""
            trainer = Trainer(small_config())
            first = trainer.collect_rollout()
            assert trainer.state.global_step == 64
            assert trainer.state.tracker.episodes_completed == 0
            assert trainer.state.env.elapsed_steps == 64
            np.testing.assert_array_equal(trainer.state.observation, first.states[-1])

            second = trainer.collect_rollout()
            np.testing.assert_array_equal(second.states[0], first.states[-1])
            assert trainer.state.global_step == 128
            # the synth episode ends at step 100, inside the second rollout
            assert second.dones[35]
            assert second.truncated[35]
            assert trainer.state.tracker.episodes_completed == 1

        def test_shapes(self):
            """Test arrays have one row per step plus the final state."""
            trainer = Trainer(small_config(env="pointmass"))
            traj = trainer.collect_rollout()
            assert traj.states.shape == (65, 4)
            assert traj.actions.shape == (64, 2)
            assert traj.stats.mean.shape == (64, 2)

    class TestIterations:
        """Test run_iteration."""

        @pytest.mark.parametrize("replay_length", [1, 2, 4, 8])
        @pytest.mark.parametrize("batch_drop", [0.0, 0.25, math.inf])
        def test_update_counts(self, replay_length, batch_drop):
            """Test every iteration applies exactly S * N / M_PPO updates."""
            config = small_config(replay_length=replay_length, batch_drop=batch_drop)
            trainer = Trainer(config)
            for i in range(1, 4):
                record = trainer.run_iteration()
                assert record.iteration == i
                assert record.update_count == i * config.updates_per_iteration
                assert record.global_step == i * config.horizon
                assert 1 <= record.num_active <= min(i, replay_length)
                assert record.minibatch_size == config.minibatch * record.num_active
                assert record.batch_avg_weights[0] == 1.0

        def test_two_iterations(self):
            """Test T = 2N runs two iterations."""
            records = train(small_config(total_steps=128))
            assert len(records) == 2

        def test_non_adaptive_warm_up(self):
            """Test without batch drop M grows with the stored batches."""
            trainer = Trainer(small_config(replay_length=2, adaptive=False))
            sizes = [trainer.run_iteration().minibatch_size for _ in range(3)]
            assert sizes == [16, 32, 32]

        def test_fixed_minibatch(self):
            """Test the fixed variant keeps M at M_PPO."""
            trainer = Trainer(
                small_config(replay_length=4, adaptive=False, fixed_minibatch=True)
            )
            for _ in range(3):
                record = trainer.run_iteration()
                assert record.minibatch_size == 16
            assert record.num_active == 3

        def test_episodic_minibatch(self):
            """Test the episodic variant runs the same number of updates."""
            records = train(small_config(episodic_minibatch=True, replay_length=2))
            assert records[-1].update_count == 32

        def test_schedules_use_iteration_start(self):
            """Test step size, clip and drop factor decay from the start step."""
            records = train(small_config())
            assert records[0].step_size == 3e-4
            assert records[1].clip == pytest.approx(0.4 * (1 - 64 / 256))
            assert records[3].batch_drop == pytest.approx(0.25 * (1 - 192 / 256))

        def test_non_finite_update_aborts(self, monkeypatch):
            """Test a non-finite loss stops the run with context."""

            def _fail(*args, **kwargs):
                raise NonFiniteError("objective is nan")

            monkeypatch.setattr("ppo_amber.trainer.combined_loss_and_grad", _fail)
            trainer = Trainer(small_config())
            with pytest.raises(TrainingAborted, match="Iteration 1, update 1"):
                trainer.run_iteration()


class TestTrain:
    """Test suite for whole runs."""

    def test_deterministic(self, tmp_path):
        """Test a fixed seed reproduces the metrics file byte for byte."""
        config = small_config(replay_length=4)
        train(config, tmp_path / "a")
        train(config, tmp_path / "b")
        a = (tmp_path / "a" / METRICS_FILE).read_bytes()
        b = (tmp_path / "b" / METRICS_FILE).read_bytes()
        assert a == b

    def test_seed_changes_run(self):
        """Test different seeds give different runs."""
        a = train(small_config(seed=0))
        b = train(small_config(seed=1))
        assert a[-1].surrogate != b[-1].surrogate

    def test_single_batch_ignores_adaptive(self, tmp_path):
        """Test with L = 1 batch drop has nothing to drop."""
        train(small_config(replay_length=1, adaptive=True), tmp_path / "on")
        train(small_config(replay_length=1, adaptive=False), tmp_path / "off")
        assert (tmp_path / "on" / METRICS_FILE).read_bytes() == (
            tmp_path / "off" / METRICS_FILE
        ).read_bytes()

    def test_infinite_drop_factor_matches_mber(self):
        """Test eps_b = inf reproduces the non-adaptive run."""
        amber = train(small_config(replay_length=4, batch_drop=math.inf))
        mber = train(small_config(replay_length=4, adaptive=False))
        for a, b in zip(amber, mber, strict=True):
            assert a.model_dump(exclude={"batch_drop"}) == b.model_dump(
                exclude={"batch_drop"}
            )

    def test_output_files(self, tmp_path):
        """Test a run writes metrics, manifest and checkpoint."""
        records = train(small_config(), tmp_path)
        assert read_records(tmp_path / METRICS_FILE) == records
        assert (tmp_path / MANIFEST_FILE).exists()
        arrays = load_checkpoint(tmp_path / CHECKPOINT_FILE)
        assert {"policy/log_std", "policy/mean/w2", "value/b2"} <= set(arrays)

    def test_checkpoint_restores_networks(self, tmp_path):
        """Test loading a checkpoint reproduces the trained parameters."""
        config = small_config()
        trainer = Trainer(config)
        trainer.run_iteration()
        trained = trainer.checkpoint_arrays()

        fresh = Trainer(config)
        fresh.load_arrays(trained)
        np.testing.assert_array_equal(
            fresh.state.policy.flatten(), trainer.state.policy.flatten()
        )
        np.testing.assert_array_equal(
            fresh.state.value.flatten(), trainer.state.value.flatten()
        )


class TestEvaluate:
    """Test suite for evaluate."""

    def test_untrained_policy(self):
        """Test a fresh policy is scored over complete episodes."""
        mean = evaluate(small_config(), 2)
        assert isinstance(mean, float)
        assert mean < 0.0

    def test_deterministic_repeatable(self, tmp_path):
        """Test deterministic evaluation of a checkpoint repeats exactly."""
        train(small_config(), tmp_path)
        checkpoint = tmp_path / CHECKPOINT_FILE
        a = evaluate(small_config(), 2, checkpoint, deterministic=True)
        b = evaluate(small_config(), 2, checkpoint, deterministic=True)
        assert a == b

    def test_invalid_episodes(self):
        """Test at least one episode is required."""
        with pytest.raises(ValueError):
            evaluate(small_config(), 0)
