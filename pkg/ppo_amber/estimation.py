"""Advantage and value-target estimation from a rollout."""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError
from .policy import GaussianStats, ValueParams, value


@dataclass(frozen=True)
class Trajectory:
    """Rollout of N steps under a fixed policy.

    ``states`` has N + 1 rows, the last one being the state the next
    iteration starts from. ``next_states[t]`` is the true successor of step t,
    which differs from ``states[t + 1]`` only where an episode ended and the
    environment was reset.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    truncated: np.ndarray
    next_states: np.ndarray
    stats: GaussianStats

    def __post_init__(self) -> None:
        """Check that all sequences line up."""
        n = self.rewards.shape[0]
        expected = {
            "states": (self.states.shape[0], n + 1),
            "actions": (self.actions.shape[0], n),
            "dones": (self.dones.shape[0], n),
            "truncated": (self.truncated.shape[0], n),
            "next_states": (self.next_states.shape[0], n),
            "stats.mean": (np.shape(self.stats.mean)[0], n),
        }
        for field, (got, want) in expected.items():
            if got != want:
                raise DimensionMismatchError(
                    f"Trajectory field '{field}' has {got} rows, expected {want}"
                )
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("Trajectory rewards must be finite")

    def __len__(self) -> int:
        """Horizon N."""
        return self.rewards.shape[0]


@dataclass(frozen=True)
class EstimatedBatch:
    """Advantages Â and TD(λ) targets V̂, frozen at collection time."""

    advantages: np.ndarray
    targets: np.ndarray


def compute_deltas(
    trajectory: Trajectory,
    value_params: ValueParams,
    gamma: float,
    *,
    bootstrap_on_timeout: bool = False,
) -> np.ndarray:
    """TD residuals δ_t = r_t + γ V(s_{t+1}) - V(s_t).

    The bootstrap term is dropped where the episode ended, unless it ended
    only on the step limit and ``bootstrap_on_timeout`` is set. A horizon that
    cuts an episode bootstraps from V(s_N).
    """
    n = len(trajectory)
    values = value(value_params, trajectory.states[:n])
    next_values = value(value_params, trajectory.next_states)

    cut = trajectory.dones.astype(bool)
    if bootstrap_on_timeout:
        cut = cut & ~trajectory.truncated.astype(bool)
    mask = np.where(cut, 0.0, 1.0)
    return trajectory.rewards + gamma * mask * next_values - values


def compute_gae(
    deltas: np.ndarray, dones: np.ndarray, gamma: float, lam: float
) -> np.ndarray:
    """Backward GAE recursion Â_t = δ_t + γλ(1 - done_t)Â_{t+1}."""
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ValueError(f"gamma={gamma} and lam={lam} must lie in [0, 1]")
    if deltas.shape != dones.shape:
        raise DimensionMismatchError(
            f"deltas {deltas.shape} and dones {dones.shape} differ"
        )

    advantages = np.empty_like(deltas, dtype=np.float64)
    running = 0.0
    decay = gamma * lam
    for t in range(deltas.shape[0] - 1, -1, -1):
        if dones[t]:
            running = 0.0
        running = deltas[t] + decay * running
        advantages[t] = running
    return advantages


def compute_targets(
    advantages: np.ndarray, trajectory: Trajectory, value_params: ValueParams
) -> np.ndarray:
    """V̂_t = Â_t + V(s_t)."""
    return advantages + value(value_params, trajectory.states[: len(trajectory)])


def estimate(
    trajectory: Trajectory,
    value_params: ValueParams,
    gamma: float,
    lam: float,
    *,
    bootstrap_on_timeout: bool = False,
) -> EstimatedBatch:
    """Compute Â and V̂ for a whole rollout."""
    deltas = compute_deltas(
        trajectory, value_params, gamma, bootstrap_on_timeout=bootstrap_on_timeout
    )
    advantages = compute_gae(deltas, trajectory.dones, gamma, lam)
    return EstimatedBatch(
        advantages=advantages,
        targets=compute_targets(advantages, trajectory, value_params),
    )
