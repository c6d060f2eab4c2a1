"""Continuous-control environments with a uniform episodic interface.

Three tasks ship:

- ``pendulum``: swing-up with observation (cos θ, sin θ, θ̇), one torque
  action in [-2, 2] and cost θ² + 0.1 θ̇² + 0.001 u² on the pre-step state.
  θ = 0 is upright. Initial θ ~ U[-π, π], θ̇ ~ U[-1, 1]. 200-step episodes.
- ``pointmass``: damped point mass in the plane, state (x, y, vx, vy), force
  action in [-1, 1]², reward -‖pos - goal‖² - 0.001‖u‖² with the goal at the
  origin. Initial position ~ U[0, 1]², velocity 0. 150-step episodes.
- ``synth-K``: K independent double integrators, state (pos_1..K, vel_1..K),
  action in [-1, 1]^K, reward Σ_k -(pos_k² + 0.1 vel_k² + 0.001 u_k²).
  Initial pos_k ~ U[-1, 1], velocity 0. 100-step episodes.

The constants are repo conventions, not Gym's.
"""

import logging
import math
from abc import ABC, abstractmethod

import numpy as np

from .const import (
    ENV_PENDULUM,
    ENV_POINTMASS,
    ENV_SYNTH_PREFIX,
    PENDULUM_DT,
    PENDULUM_EPISODE_STEPS,
    PENDULUM_GRAVITY,
    PENDULUM_LENGTH,
    PENDULUM_MASS,
    PENDULUM_MAX_SPEED,
    PENDULUM_MAX_TORQUE,
    PENDULUM_TORQUE_COST,
    PENDULUM_VELOCITY_COST,
    POINTMASS_DAMPING,
    POINTMASS_DT,
    POINTMASS_EPISODE_STEPS,
    POINTMASS_FORCE_COST,
    POINTMASS_GOAL,
    POINTMASS_MAX_FORCE,
    SYNTH_DT,
    SYNTH_EPISODE_STEPS,
    SYNTH_FORCE_COST,
    SYNTH_MAX_FORCE,
    SYNTH_VELOCITY_COST,
)
from .exceptions import DimensionMismatchError
from .helpers import parse_env_id
from .models import EnvSpec, StepResult

_LOGGER = logging.getLogger(__name__)


class Environment(ABC):
    """Episodic environment with clamped continuous actions."""

    def __init__(self, spec: EnvSpec) -> None:
        """Initialize environment."""
        self.spec = spec
        self._low = np.asarray(spec.action_low, dtype=np.float64)
        self._high = np.asarray(spec.action_high, dtype=np.float64)
        self._steps = 0
        self._is_reset = False

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        """Start a new episode and return its initial observation."""
        self._steps = 0
        self._is_reset = True
        self._sample_initial(rng)
        return self._observe()

    def step(self, action: np.ndarray) -> StepResult:
        """Apply a clamped action and advance the dynamics one step."""
        if not self._is_reset:
            raise RuntimeError(f"{self.spec.env_id}: step() called before reset()")

        action = np.asarray(action, dtype=np.float64)
        if action.shape != (self.spec.action_dim,):
            raise DimensionMismatchError(
                f"{self.spec.env_id}: action shape {action.shape}, "
                f"expected ({self.spec.action_dim},)"
            )

        clamped = np.clip(action, self._low, self._high)
        reward, terminal = self._advance(clamped)
        self._steps += 1

        truncated = not terminal and self._steps >= self.spec.max_episode_steps
        return StepResult(
            next_state=self._observe(),
            reward=reward,
            done=terminal or truncated,
            truncated=truncated,
        )

    @property
    def elapsed_steps(self) -> int:
        """Steps taken in the current episode."""
        return self._steps

    @abstractmethod
    def _sample_initial(self, rng: np.random.Generator) -> None:
        """Draw the internal state from the initial distribution."""

    @abstractmethod
    def _advance(self, action: np.ndarray) -> tuple[float, bool]:
        """Integrate one step, returning (reward, terminal)."""

    @abstractmethod
    def _observe(self) -> np.ndarray:
        """Return the observation of the internal state."""


def _angle_normalize(theta: float) -> float:
    return ((theta + math.pi) % (2 * math.pi)) - math.pi


class PendulumEnv(Environment):
    """Torque-limited pendulum swing-up."""

    def __init__(self) -> None:
        """Initialize pendulum."""
        super().__init__(
            EnvSpec(
                env_id=ENV_PENDULUM,
                state_dim=3,
                action_dim=1,
                action_low=(-PENDULUM_MAX_TORQUE,),
                action_high=(PENDULUM_MAX_TORQUE,),
                max_episode_steps=PENDULUM_EPISODE_STEPS,
            )
        )
        self.theta = 0.0
        self.theta_dot = 0.0

    def _sample_initial(self, rng: np.random.Generator) -> None:
        self.theta = float(rng.uniform(-math.pi, math.pi))
        self.theta_dot = float(rng.uniform(-1.0, 1.0))

    def _advance(self, action: np.ndarray) -> tuple[float, bool]:
        torque = float(action[0])
        cost = (
            _angle_normalize(self.theta) ** 2
            + PENDULUM_VELOCITY_COST * self.theta_dot**2
            + PENDULUM_TORQUE_COST * torque**2
        )

        g, m, length, dt = (
            PENDULUM_GRAVITY,
            PENDULUM_MASS,
            PENDULUM_LENGTH,
            PENDULUM_DT,
        )
        theta_dot = self.theta_dot + (
            3 * g / (2 * length) * math.sin(self.theta)
            + 3.0 / (m * length**2) * torque
        ) * dt
        theta_dot = min(max(theta_dot, -PENDULUM_MAX_SPEED), PENDULUM_MAX_SPEED)
        # keep θ bounded over arbitrarily long rollouts
        self.theta = _angle_normalize(self.theta + theta_dot * dt)
        self.theta_dot = theta_dot
        return -cost, False

    def _observe(self) -> np.ndarray:
        return np.array(
            [math.cos(self.theta), math.sin(self.theta), self.theta_dot],
            dtype=np.float64,
        )


class PointMassEnv(Environment):
    """Damped point mass driven towards a fixed goal."""

    def __init__(self) -> None:
        """Initialize point mass."""
        super().__init__(
            EnvSpec(
                env_id=ENV_POINTMASS,
                state_dim=4,
                action_dim=2,
                action_low=(-POINTMASS_MAX_FORCE,) * 2,
                action_high=(POINTMASS_MAX_FORCE,) * 2,
                max_episode_steps=POINTMASS_EPISODE_STEPS,
            )
        )
        self._goal = np.asarray(POINTMASS_GOAL, dtype=np.float64)
        self.position = np.zeros(2)
        self.velocity = np.zeros(2)

    def _sample_initial(self, rng: np.random.Generator) -> None:
        self.position = rng.uniform(0.0, 1.0, size=2)
        self.velocity = np.zeros(2)

    def _advance(self, action: np.ndarray) -> tuple[float, bool]:
        offset = self.position - self._goal
        reward = -float(offset @ offset) - POINTMASS_FORCE_COST * float(
            action @ action
        )
        damped = (1.0 - POINTMASS_DAMPING) * self.velocity
        self.velocity = damped + action * POINTMASS_DT
        self.position = self.position + self.velocity * POINTMASS_DT
        return reward, False

    def _observe(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])


class SynthEnv(Environment):
    """K identical, independent double integrators.

    Every action dimension has the same dynamics and reward term, so tasks in
    the family differ only in K.
    """

    def __init__(self, action_dim: int) -> None:
        """Initialize synth-K task."""
        super().__init__(
            EnvSpec(
                env_id=f"{ENV_SYNTH_PREFIX}{action_dim}",
                state_dim=2 * action_dim,
                action_dim=action_dim,
                action_low=(-SYNTH_MAX_FORCE,) * action_dim,
                action_high=(SYNTH_MAX_FORCE,) * action_dim,
                max_episode_steps=SYNTH_EPISODE_STEPS,
            )
        )
        self.position = np.zeros(action_dim)
        self.velocity = np.zeros(action_dim)

    def _sample_initial(self, rng: np.random.Generator) -> None:
        self.position = rng.uniform(-1.0, 1.0, size=self.spec.action_dim)
        self.velocity = np.zeros(self.spec.action_dim)

    def _advance(self, action: np.ndarray) -> tuple[float, bool]:
        per_dim = (
            self.position**2
            + SYNTH_VELOCITY_COST * self.velocity**2
            + SYNTH_FORCE_COST * action**2
        )
        self.velocity = self.velocity + action * SYNTH_DT
        self.position = self.position + self.velocity * SYNTH_DT
        return -float(per_dim.sum()), False

    def _observe(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])


def make_env(env_id: str) -> Environment:
    """Build an environment from its string id."""
    family, dim = parse_env_id(env_id)
    if family == ENV_PENDULUM:
        env: Environment = PendulumEnv()
    elif family == ENV_POINTMASS:
        env = PointMassEnv()
    else:
        env = SynthEnv(dim)

    _LOGGER.debug(
        "Created env %s (state_dim=%d, action_dim=%d, max_episode_steps=%d)",
        env_id,
        env.spec.state_dim,
        env.spec.action_dim,
        env.spec.max_episode_steps,
    )
    return env
