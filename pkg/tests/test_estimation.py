"""Test suite for advantage and target estimation."""

import numpy as np
import pytest

from ppo_amber.exceptions import DimensionMismatchError
from ppo_amber.estimation import (
    Trajectory,
    compute_deltas,
    compute_gae,
    compute_targets,
    estimate,
)
from ppo_amber.net import MlpParams, init_mlp
from ppo_amber.policy import GaussianStats, ValueParams, value

STATE_DIM = 3


def _constant_value(c):
    net = init_mlp(STATE_DIM, 1, np.random.default_rng(0), output_gain=1.0).zeros_like()
    biases = (*net.biases[:-1], np.array([c]))
    return ValueParams(MlpParams(net.weights, biases))


def _trajectory(rng, rewards, dones, truncated=None):
    n = len(rewards)
    dones = np.asarray(dones, dtype=bool)
    states = rng.standard_normal((n + 1, STATE_DIM))
    next_states = states[1:].copy()
    # after a done the next row is a fresh reset state, not the successor
    next_states[dones] = rng.standard_normal((int(dones.sum()), STATE_DIM))
    if truncated is None:
        truncated = np.zeros(n, dtype=bool)
    return Trajectory(
        states=states,
        actions=rng.standard_normal((n, 1)),
        rewards=np.asarray(rewards, dtype=np.float64),
        dones=dones,
        truncated=np.asarray(truncated),
        next_states=next_states,
        stats=GaussianStats(mean=np.zeros((n, 1)), std=np.ones(1)),
    )


def _gae_double_sum(deltas, dones, gamma, lam):
    n = len(deltas)
    out = np.empty(n)
    for t in range(n):
        total = 0.0
        for offset, u in enumerate(range(t, n)):
            total += (gamma * lam) ** offset * deltas[u]
            if dones[u]:
                break
        out[t] = total
    return out


class TestEstimation:
    """Test suite for estimation."""

    @pytest.fixture
    def rng(self):
        """Seeded generator."""
        return np.random.default_rng(77)

    @pytest.fixture
    def value_params(self, rng):
        """Random value network."""
        return ValueParams(init_mlp(STATE_DIM, 1, rng, output_gain=1.0))

    class TestTrajectory:
        """Test trajectory validation."""

        def test_length_mismatch(self, rng):
            """Test inconsistent sequence lengths are rejected."""
            traj = _trajectory(rng, [0.0, 1.0], [False, False])
            with pytest.raises(DimensionMismatchError, match="states"):
                Trajectory(
                    states=traj.states[:2],
                    actions=traj.actions,
                    rewards=traj.rewards,
                    dones=traj.dones,
                    truncated=traj.truncated,
                    next_states=traj.next_states,
                    stats=traj.stats,
                )

        def test_non_finite_reward(self, rng):
            """Test a NaN reward is rejected."""
            with pytest.raises(ValueError, match="finite"):
                _trajectory(rng, [0.0, np.nan], [False, False])

    class TestDeltas:
        """Test compute_deltas."""

        def test_zero_value(self, rng):
            """Test V = 0 makes every residual equal its reward."""
            rewards = rng.standard_normal(10)
            traj = _trajectory(rng, rewards, rng.random(10) < 0.3)
            deltas = compute_deltas(traj, _constant_value(0.0), 0.99)
            np.testing.assert_array_equal(deltas, rewards)

        def test_constant_value(self, rng):
            """Test zero rewards with constant V give c(gamma - 1)."""
            traj = _trajectory(rng, np.zeros(8), np.zeros(8, dtype=bool))
            deltas = compute_deltas(traj, _constant_value(2.5), 0.9)
            np.testing.assert_allclose(deltas, 2.5 * (0.9 - 1.0), rtol=1e-14)

        def test_terminal_masks_bootstrap(self, rng, value_params):
            """Test a terminal step ignores the next state's value."""
            traj = _trajectory(rng, [1.0, 2.0, 3.0], [False, True, False])
            deltas = compute_deltas(traj, value_params, 0.99)
            assert deltas[1] == pytest.approx(2.0 - value(value_params, traj.states[1]))

        def test_horizon_cut_bootstraps(self, rng, value_params):
            """Test the last step of a cut episode bootstraps from V(s_N)."""
            traj = _trajectory(rng, [1.0, 2.0], [False, False])
            deltas = compute_deltas(traj, value_params, 0.99)
            expected = (
                2.0
                + 0.99 * value(value_params, traj.states[2])
                - value(value_params, traj.states[1])
            )
            assert deltas[-1] == pytest.approx(expected, rel=1e-12)

        def test_timeout_bootstrap_flag(self, rng, value_params):
            """Test timeouts bootstrap from the true successor only when enabled."""
            traj = _trajectory(rng, [1.0, 2.0], [True, False], truncated=[True, False])
            v0 = value(value_params, traj.states[0])
            masked = compute_deltas(traj, value_params, 0.9)
            assert masked[0] == pytest.approx(1.0 - v0)
            boot = compute_deltas(traj, value_params, 0.9, bootstrap_on_timeout=True)
            successor = value(value_params, traj.next_states[0])
            assert boot[0] == pytest.approx(1.0 + 0.9 * successor - v0)

    class TestGae:
        """Test compute_gae."""

        def test_lambda_zero(self, rng):
            """Test lambda = 0 returns the residuals."""
            deltas = rng.standard_normal(20)
            np.testing.assert_array_equal(
                compute_gae(deltas, np.zeros(20, dtype=bool), 0.99, 0.0), deltas
            )

        def test_two_step_example(self):
            """Test the worked two-step example."""
            adv = compute_gae(np.ones(2), np.zeros(2, dtype=bool), 0.99, 0.95)
            np.testing.assert_allclose(adv, [1.9405, 1.0], rtol=1e-12)

        def test_terminal_resets(self):
            """Test accumulation stops at an episode boundary."""
            adv = compute_gae(
                np.array([1.0, 5.0, 7.0]), np.array([True, False, False]), 1.0, 1.0
            )
            np.testing.assert_array_equal(adv, [1.0, 12.0, 7.0])

        def test_matches_double_sum(self):
            """Test the recursion equals the explicit sum on random trajectories."""
            rng = np.random.default_rng(0)
            for _ in range(1000):
                n = int(rng.integers(1, 65))
                deltas = rng.standard_normal(n)
                dones = rng.random(n) < rng.random()
                gamma, lam = rng.random(), rng.random()
                np.testing.assert_allclose(
                    compute_gae(deltas, dones, gamma, lam),
                    _gae_double_sum(deltas, dones, gamma, lam),
                    rtol=0,
                    atol=1e-12,
                )

        def test_bounded_by_residuals(self, rng):
            """Test |A_t| is bounded by the geometric sum of max |delta|."""
            deltas = rng.standard_normal(64)
            gamma, lam = 0.99, 0.95
            adv = compute_gae(deltas, np.zeros(64, dtype=bool), gamma, lam)
            bound = np.abs(deltas).max() / (1.0 - gamma * lam)
            assert np.all(np.abs(adv) <= bound)

        @pytest.mark.parametrize(("gamma", "lam"), [(1.1, 0.9), (0.9, -0.1)])
        def test_invalid_discounts(self, gamma, lam):
            """Test discounts outside [0, 1] are rejected."""
            with pytest.raises(ValueError):
                compute_gae(np.zeros(2), np.zeros(2, dtype=bool), gamma, lam)

        def test_shape_mismatch(self):
            """Test deltas and dones must align."""
            with pytest.raises(DimensionMismatchError):
                compute_gae(np.zeros(3), np.zeros(2, dtype=bool), 0.9, 0.9)

    class TestTargets:
        """Test compute_targets and estimate."""

        def test_zero_advantages(self, rng, value_params):
            """Test zero advantages give V(s_t) as targets."""
            traj = _trajectory(rng, np.zeros(5), np.zeros(5, dtype=bool))
            targets = compute_targets(np.zeros(5), traj, value_params)
            np.testing.assert_array_equal(targets, value(value_params, traj.states[:5]))

        def test_zero_value(self, rng):
            """Test V = 0 makes targets equal advantages."""
            traj = _trajectory(rng, rng.standard_normal(6), np.zeros(6, dtype=bool))
            adv = rng.standard_normal(6)
            np.testing.assert_array_equal(
                compute_targets(adv, traj, _constant_value(0.0)), adv
            )

        def test_return_to_go(self, rng):
            """Test gamma = lambda = 1 with V = 0 gives the plain return-to-go."""
            rewards = rng.standard_normal(12)
            dones = np.zeros(12, dtype=bool)
            dones[-1] = True
            traj = _trajectory(rng, rewards, dones)
            batch = estimate(traj, _constant_value(0.0), 1.0, 1.0)
            np.testing.assert_allclose(
                batch.targets, np.cumsum(rewards[::-1])[::-1], rtol=1e-12, atol=1e-12
            )
            np.testing.assert_array_equal(batch.targets, batch.advantages)
