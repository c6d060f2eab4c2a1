"""Helper utilities for the PPO-AMBER engine."""

import math
import re

import numpy as np

from .const import (
    ENV_PENDULUM,
    ENV_POINTMASS,
    ENV_SYNTH_PREFIX,
    SYNTH_MAX_DIM,
    SYNTH_MIN_DIM,
)

# init, env reset, action noise, mini-batch draws
RNG_STREAMS: int = 4


def schedule(initial: float, global_step: int, total_steps: int) -> float:
    """Decay linearly from ``initial`` at step 0 to 0 at ``total_steps``."""
    if not 0 <= global_step <= total_steps:
        raise ValueError(
            f"global_step={global_step} outside [0, total_steps={total_steps}]"
        )
    if math.isinf(initial):
        return initial
    return max(0.0, initial * (1.0 - global_step / total_steps))


def parse_env_id(env_id: str) -> tuple[str, int | None]:
    """Split an environment id into its family and synth-K dimension."""
    if env_id in (ENV_PENDULUM, ENV_POINTMASS):
        return env_id, None

    match = re.fullmatch(rf"{re.escape(ENV_SYNTH_PREFIX)}(\d+)", env_id)
    if match:
        dim = int(match.group(1))
        if SYNTH_MIN_DIM <= dim <= SYNTH_MAX_DIM:
            return ENV_SYNTH_PREFIX.rstrip("-"), dim
        raise ValueError(
            f"synth action dimension {dim} outside "
            f"[{SYNTH_MIN_DIM}, {SYNTH_MAX_DIM}] in env id '{env_id}'"
        )

    raise ValueError(
        f"Unknown env id '{env_id}' (expected '{ENV_PENDULUM}', "
        f"'{ENV_POINTMASS}' or '{ENV_SYNTH_PREFIX}K')"
    )


def seed_streams(seed: int) -> list[np.random.Generator]:
    """Independent generators for the random consumers of one run."""
    children = np.random.SeedSequence(seed).spawn(RNG_STREAMS)
    return [np.random.default_rng(child) for child in children]


def sanitize_name(name: str, *, lower: bool = True) -> str:
    """Sanitize a name for use in identifiers."""
    sanitized = re.sub(r"[^a-zA-Z0-9_.-]", "_", name)
    sanitized = re.sub(r"_+", "_", sanitized).strip("_")
    return sanitized.lower() if lower else sanitized
