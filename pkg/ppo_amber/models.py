"""Data models for the PPO-AMBER engine."""

import math
from typing import Any

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)

from .const import (
    DEFAULT_ADAPTIVE,
    DEFAULT_BATCH_DROP,
    DEFAULT_CLIP,
    DEFAULT_EPOCHS,
    DEFAULT_GAMMA,
    DEFAULT_HORIZON,
    DEFAULT_LAMBDA,
    DEFAULT_MINIBATCH,
    DEFAULT_REPLAY_LENGTH,
    DEFAULT_SEED,
    DEFAULT_STEP_SIZE,
    DEFAULT_TOTAL_STEPS,
    DEFAULT_VALUE_COEF,
)
from .helpers import parse_env_id


class EnvSpec(BaseModel):
    """Shape and bounds of an environment."""

    model_config = ConfigDict(frozen=True)

    env_id: str
    state_dim: int = Field(gt=0)
    action_dim: int = Field(gt=0)
    action_low: tuple[float, ...]
    action_high: tuple[float, ...]
    max_episode_steps: int = Field(ge=1)

    @model_validator(mode="after")
    def validate_bounds(self) -> "EnvSpec":
        """Check that the action box is well formed."""
        if len(self.action_low) != self.action_dim:
            raise ValueError(
                f"action_low has {len(self.action_low)} entries, "
                f"expected action_dim={self.action_dim}"
            )
        if len(self.action_high) != self.action_dim:
            raise ValueError(
                f"action_high has {len(self.action_high)} entries, "
                f"expected action_dim={self.action_dim}"
            )
        for k, (low, high) in enumerate(zip(self.action_low, self.action_high)):
            if not low < high:
                raise ValueError(
                    f"Action bound at index {k}: low={low} is not below high={high}"
                )
        return self


class StepResult(BaseModel):
    """Outcome of one environment step."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    next_state: np.ndarray
    reward: float
    done: bool
    # done because the step limit was hit rather than a terminal condition
    truncated: bool = False

    @field_validator("next_state", mode="before")
    @classmethod
    def validate_next_state(cls, v: Any) -> np.ndarray:
        """Coerce to a finite float64 vector."""
        state = np.asarray(v, dtype=np.float64)
        if state.ndim != 1:
            raise ValueError(f"next_state must be a vector, got shape {state.shape}")
        if not np.all(np.isfinite(state)):
            raise ValueError(f"next_state has non-finite components: {state!r}")
        return state

    @field_validator("reward")
    @classmethod
    def validate_reward(cls, v: float) -> float:
        """Reject non-finite rewards."""
        if not math.isfinite(v):
            raise ValueError(f"reward must be finite, got {v!r}")
        return v


class TrainConfig(BaseModel):
    """Hyperparameters, schedule and seed for one training run.

    Field names double as keys of the flat YAML config file; ``lam`` is
    spelled ``lambda`` there.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    env: str
    total_steps: int = Field(default=DEFAULT_TOTAL_STEPS, gt=0)
    horizon: int = Field(default=DEFAULT_HORIZON, gt=0)
    minibatch: int = Field(default=DEFAULT_MINIBATCH, gt=0)
    replay_length: int = Field(default=DEFAULT_REPLAY_LENGTH, ge=1)
    epochs: int = Field(default=DEFAULT_EPOCHS, ge=1)
    gamma: float = Field(default=DEFAULT_GAMMA, ge=0.0, le=1.0)
    lam: float = Field(default=DEFAULT_LAMBDA, ge=0.0, le=1.0, alias="lambda")
    step_size: float = Field(default=DEFAULT_STEP_SIZE, ge=0.0, allow_inf_nan=False)
    clip: float = Field(default=DEFAULT_CLIP, ge=0.0, allow_inf_nan=False)
    # inf disables batch drop entirely
    batch_drop: float = Field(default=DEFAULT_BATCH_DROP, ge=0.0)
    value_coef: float = Field(default=DEFAULT_VALUE_COEF, gt=0.0, allow_inf_nan=False)
    adaptive: bool = DEFAULT_ADAPTIVE
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    fixed_minibatch: bool = False
    episodic_minibatch: bool = False
    normalize_advantages: bool = True
    bootstrap_on_timeout: bool = False

    @field_validator("env")
    @classmethod
    def validate_env(cls, v: str) -> str:
        """Accept only known environment ids."""
        parse_env_id(v)
        return v

    @model_validator(mode="after")
    def validate_divisibility(self) -> "TrainConfig":
        """Check the horizon splits into whole mini-batches and runs."""
        if self.horizon % self.minibatch:
            raise ValueError(
                f"horizon={self.horizon} is not divisible by minibatch={self.minibatch}"
            )
        if self.total_steps % self.horizon:
            raise ValueError(
                f"total_steps={self.total_steps} is not divisible by "
                f"horizon={self.horizon}"
            )
        return self

    @property
    def iterations(self) -> int:
        """Number of training iterations in the run."""
        return self.total_steps // self.horizon

    @property
    def updates_per_iteration(self) -> int:
        """Gradient updates per iteration, S * N / M_PPO."""
        return self.epochs * (self.horizon // self.minibatch)

    def to_file_dict(self) -> dict[str, Any]:
        """Return the config as flat file keys."""
        return self.model_dump(by_alias=True)


class IterationRecord(BaseModel):
    """Diagnostics emitted once per iteration.

    Field order is the metrics file column order.
    """

    model_config = ConfigDict(frozen=True)

    iteration: int = Field(ge=1)
    global_step: int = Field(ge=0)
    update_count: int = Field(ge=0)
    episodes_completed: int = Field(ge=0)
    mean_return_100: float | None = None
    mean_return_all: float | None = None
    step_size: float
    clip: float
    batch_drop: float
    num_active: int = Field(ge=1)
    minibatch_size: int = Field(ge=1)
    avg_is: float = Field(ge=1.0)
    surrogate: float
    value_loss: float = Field(ge=0.0)
    # R' per stored batch, index = lag l (0 is the batch just collected)
    batch_avg_weights: list[float]

    @model_validator(mode="after")
    def validate_active(self) -> "IterationRecord":
        """Check the active count against the stored batches."""
        if self.num_active > len(self.batch_avg_weights):
            raise ValueError(
                f"num_active={self.num_active} exceeds stored batches "
                f"({len(self.batch_avg_weights)})"
            )
        return self


class ScoreCell(BaseModel):
    """Scores of one (task, config, seed) run."""

    task: str
    config: str
    seed: int
    final_score: float
    speed_score: float


class ScoreTable(BaseModel):
    """All runs compared in one sweep."""

    cells: list[ScoreCell] = Field(default_factory=list)

    @property
    def tasks(self) -> list[str]:
        """Tasks in first-seen order."""
        return list(dict.fromkeys(cell.task for cell in self.cells))

    @property
    def configs(self) -> list[str]:
        """Config labels in first-seen order."""
        return list(dict.fromkeys(cell.config for cell in self.cells))
