"""Constants for the PPO-AMBER engine."""

import math
from typing import Final

# Package
NAME: Final = "ppo_amber"

# Configuration keys (flat YAML file and CLI flags share these names)
CONF_ENV: Final = "env"
CONF_TOTAL_STEPS: Final = "total_steps"
CONF_HORIZON: Final = "horizon"
CONF_MINIBATCH: Final = "minibatch"
CONF_REPLAY_LENGTH: Final = "replay_length"
CONF_EPOCHS: Final = "epochs"
CONF_GAMMA: Final = "gamma"
CONF_LAMBDA: Final = "lambda"
CONF_STEP_SIZE: Final = "step_size"
CONF_CLIP: Final = "clip"
CONF_BATCH_DROP: Final = "batch_drop"
CONF_VALUE_COEF: Final = "value_coef"
CONF_ADAPTIVE: Final = "adaptive"
CONF_SEED: Final = "seed"
CONF_FIXED_MINIBATCH: Final = "fixed_minibatch"
CONF_EPISODIC_MINIBATCH: Final = "episodic_minibatch"
CONF_NORMALIZE_ADVANTAGES: Final = "normalize_advantages"
CONF_BOOTSTRAP_ON_TIMEOUT: Final = "bootstrap_on_timeout"

# Defaults (PPO-AMBER)
DEFAULT_TOTAL_STEPS: Final = 1_001_472  # 489 horizons of 2048, just over 1M
DEFAULT_HORIZON: Final = 2048
DEFAULT_MINIBATCH: Final = 64
DEFAULT_REPLAY_LENGTH: Final = 8
DEFAULT_EPOCHS: Final = 10
DEFAULT_GAMMA: Final = 0.99
DEFAULT_LAMBDA: Final = 0.95
DEFAULT_STEP_SIZE: Final = 3e-4
DEFAULT_CLIP: Final = 0.4
DEFAULT_BATCH_DROP: Final = 0.25
DEFAULT_VALUE_COEF: Final = 1.0
DEFAULT_ADAPTIVE: Final = True
DEFAULT_SEED: Final = 0

# Networks
HIDDEN_SIZES: Final[tuple[int, ...]] = (64, 64)
HIDDEN_GAIN: Final = math.sqrt(2.0)
POLICY_OUTPUT_GAIN: Final = 0.01
VALUE_OUTPUT_GAIN: Final = 1.0
INITIAL_LOG_STD: Final = 0.0

# Adam
ADAM_BETA1: Final = 0.9
ADAM_BETA2: Final = 0.999
ADAM_EPSILON: Final = 1e-5

# Loss
ADVANTAGE_NORM_EPSILON: Final = 1e-8

# Metrics
RETURN_WINDOW: Final = 100
METRICS_SCHEMA_VERSION: Final = 1
MANIFEST_SCHEMA_VERSION: Final = 1
SCORE_NORMALIZATION: Final = "min-max over compared runs"
METRICS_FILE: Final = "metrics.csv"
MANIFEST_FILE: Final = "manifest.yaml"
CHECKPOINT_FILE: Final = "checkpoint.npz"
SCORES_FILE: Final = "scores.csv"
SUMMARY_FILE: Final = "summary.csv"
ISWEIGHT_SUMMARY_FILE: Final = "isweight_summary.csv"
ACTION_DIMS_FILE: Final = "action_dims.csv"
LIST_SEPARATOR: Final = ";"

# Environments
ENV_PENDULUM: Final = "pendulum"
ENV_POINTMASS: Final = "pointmass"
ENV_SYNTH_PREFIX: Final = "synth-"
SYNTH_MIN_DIM: Final = 1
SYNTH_MAX_DIM: Final = 32

PENDULUM_MAX_SPEED: Final = 8.0
PENDULUM_MAX_TORQUE: Final = 2.0
PENDULUM_DT: Final = 0.05
PENDULUM_GRAVITY: Final = 10.0
PENDULUM_MASS: Final = 1.0
PENDULUM_LENGTH: Final = 1.0
PENDULUM_VELOCITY_COST: Final = 0.1  # c1
PENDULUM_TORQUE_COST: Final = 0.001  # c2
PENDULUM_EPISODE_STEPS: Final = 200

POINTMASS_DT: Final = 0.1
POINTMASS_DAMPING: Final = 0.05
POINTMASS_MAX_FORCE: Final = 1.0
POINTMASS_GOAL: Final[tuple[float, float]] = (0.0, 0.0)
POINTMASS_FORCE_COST: Final = 0.001
POINTMASS_EPISODE_STEPS: Final = 150

SYNTH_DT: Final = 0.1
SYNTH_MAX_FORCE: Final = 1.0
SYNTH_VELOCITY_COST: Final = 0.1
SYNTH_FORCE_COST: Final = 0.001
SYNTH_EPISODE_STEPS: Final = 100

# Diagnostics
DIAG_ACTION_DIMS: Final[tuple[int, ...]] = (1, 2, 4, 8, 16)
