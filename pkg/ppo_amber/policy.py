"""Diagonal Gaussian policy and state-value heads."""

import math
from dataclasses import dataclass

import numpy as np

from .const import INITIAL_LOG_STD, POLICY_OUTPUT_GAIN, VALUE_OUTPUT_GAIN
from .exceptions import DimensionMismatchError
from .models import EnvSpec
from .net import MlpParams, init_mlp, mlp_forward

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PolicyParams:
    """Mean network and a state-independent log standard deviation."""

    mean_net: MlpParams
    log_std: np.ndarray

    @property
    def num_params(self) -> int:
        """Total number of scalars."""
        return self.mean_net.num_params + self.log_std.size

    def flatten(self) -> np.ndarray:
        """Mean-net parameters followed by log_std."""
        return np.concatenate([self.mean_net.flatten(), self.log_std])

    def unflatten(self, flat: np.ndarray) -> "PolicyParams":
        """Build params shaped like ``self`` from a flat vector."""
        split = self.mean_net.num_params
        return PolicyParams(
            mean_net=self.mean_net.unflatten(flat[:split]),
            log_std=flat[split:].copy(),
        )


@dataclass(frozen=True)
class ValueParams:
    """State-value network."""

    value_net: MlpParams

    @property
    def num_params(self) -> int:
        """Total number of scalars."""
        return self.value_net.num_params

    def flatten(self) -> np.ndarray:
        """Flat parameter vector."""
        return self.value_net.flatten()

    def unflatten(self, flat: np.ndarray) -> "ValueParams":
        """Build params shaped like ``self`` from a flat vector."""
        return ValueParams(self.value_net.unflatten(flat))


@dataclass(frozen=True)
class GaussianStats:
    """Mean ``(K,)`` or ``(B, K)`` and std broadcastable against it."""

    mean: np.ndarray
    std: np.ndarray


def init_policy(spec: EnvSpec, rng: np.random.Generator) -> PolicyParams:
    """Fresh policy with σ = 1 and a near-zero mean output."""
    return PolicyParams(
        mean_net=init_mlp(
            spec.state_dim, spec.action_dim, rng, output_gain=POLICY_OUTPUT_GAIN
        ),
        log_std=np.full(spec.action_dim, INITIAL_LOG_STD),
    )


def init_value(spec: EnvSpec, rng: np.random.Generator) -> ValueParams:
    """Fresh value network."""
    return ValueParams(
        init_mlp(spec.state_dim, 1, rng, output_gain=VALUE_OUTPUT_GAIN)
    )


def pack_params(policy: PolicyParams, value: ValueParams) -> np.ndarray:
    """Flatten θ_ALL = (policy, value) into one vector."""
    return np.concatenate([policy.flatten(), value.flatten()])


def unpack_params(
    flat: np.ndarray, policy: PolicyParams, value: ValueParams
) -> tuple[PolicyParams, ValueParams]:
    """Inverse of :func:`pack_params`, using the given params as templates."""
    expected = policy.num_params + value.num_params
    if flat.shape != (expected,):
        raise DimensionMismatchError(
            f"flat vector shape {flat.shape}, expected ({expected},)"
        )
    split = policy.num_params
    return policy.unflatten(flat[:split]), value.unflatten(flat[split:])


def policy_stats(params: PolicyParams, state: np.ndarray) -> GaussianStats:
    """Mean and std of π(·|s) for one state or a batch of states."""
    return GaussianStats(
        mean=mlp_forward(params.mean_net, state), std=np.exp(params.log_std)
    )


def sample_action(stats: GaussianStats, rng: np.random.Generator) -> np.ndarray:
    """Draw a ~ N(mean, std²) elementwise."""
    return stats.mean + stats.std * rng.standard_normal(np.shape(stats.mean))


def log_prob(stats: GaussianStats, action: np.ndarray) -> np.ndarray | float:
    """Log density summed over action dimensions."""
    action = np.asarray(action, dtype=np.float64)
    if action.shape[-1:] != np.shape(stats.mean)[-1:]:
        raise DimensionMismatchError(
            f"action shape {action.shape} does not match mean {np.shape(stats.mean)}"
        )
    z = (action - stats.mean) / stats.std
    per_dim = -LOG_SQRT_2PI - np.log(stats.std) - 0.5 * z**2
    return per_dim.sum(axis=-1)


def log_prob_grads(
    stats: GaussianStats, action: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension ∂log π/∂μ and ∂log π/∂log σ."""
    diff = np.asarray(action, dtype=np.float64) - stats.mean
    var = stats.std**2
    return diff / var, diff**2 / var - 1.0


def log_is_ratio(
    params: PolicyParams,
    stored_stats: GaussianStats,
    state: np.ndarray,
    action: np.ndarray,
) -> np.ndarray | float:
    """log π_new(a|s) - log π_old(a|s) with π_old from stored statistics."""
    current = policy_stats(params, state)
    return log_prob(current, action) - log_prob(stored_stats, action)


def is_ratio(
    params: PolicyParams,
    stored_stats: GaussianStats,
    state: np.ndarray,
    action: np.ndarray,
) -> np.ndarray | float:
    """IS weight π_new(a|s) / π_old(a|s), exponentiated once from log space."""
    return np.exp(log_is_ratio(params, stored_stats, state, action))


def value(params: ValueParams, state: np.ndarray) -> np.ndarray | float:
    """V(s) for one state (scalar) or a batch (vector)."""
    out = mlp_forward(params.value_net, state)
    return out[..., 0] if np.ndim(out) > 1 else float(out[0])
