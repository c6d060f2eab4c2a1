"""Clipped surrogate, value loss and the combined objective with gradients."""

import logging
from dataclasses import dataclass

import numpy as np

from .const import ADVANTAGE_NORM_EPSILON
from .exceptions import NonFiniteError
from .net import mlp_backward
from .policy import (
    GaussianStats,
    PolicyParams,
    ValueParams,
    log_is_ratio,
    log_prob_grads,
    policy_stats,
    value,
)

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class MiniBatch:
    """M stored samples with their rollout-time statistics."""

    states: np.ndarray
    actions: np.ndarray
    advantages: np.ndarray
    targets: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    def __len__(self) -> int:
        """Mini-batch size M."""
        return self.advantages.shape[0]

    @property
    def stats(self) -> GaussianStats:
        """Rollout-time Gaussian statistics."""
        return GaussianStats(mean=self.means, std=self.stds)


@dataclass(frozen=True)
class LossResult:
    """Objective L̂ = L̂_CLIP - c_v L̂_V and its gradient over θ_ALL."""

    objective: float
    surrogate: float
    value_loss: float
    policy_grad: PolicyParams
    value_grad: ValueParams
    ratios: np.ndarray


def clip(x: np.ndarray | float, eps: float) -> np.ndarray | float:
    """Clamp to [1 - ε, 1 + ε]."""
    if eps < 0:
        raise ValueError(f"Clipping factor must be non-negative, got {eps}")
    return np.clip(x, 1.0 - eps, 1.0 + eps)


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """Standardize to zero mean and unit std within the mini-batch."""
    centered = advantages - advantages.mean()
    return centered / (centered.std() + ADVANTAGE_NORM_EPSILON)


def _surrogate_terms(
    ratios: np.ndarray, advantages: np.ndarray, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample min term and the mask where the unclipped branch is taken."""
    unclipped = ratios * advantages
    clipped = clip(ratios, eps) * advantages
    # ties (including ratios exactly on 1 ± ε) count as unclipped
    take_unclipped = unclipped <= clipped
    return np.where(take_unclipped, unclipped, clipped), take_unclipped


def surrogate(minibatch: MiniBatch, policy_params: PolicyParams, eps: float) -> float:
    """L̂_CLIP: mean of min(R Â, clip_ε(R) Â) over the mini-batch."""
    ratios = np.exp(
        log_is_ratio(
            policy_params, minibatch.stats, minibatch.states, minibatch.actions
        )
    )
    terms, _ = _surrogate_terms(ratios, minibatch.advantages, eps)
    return float(terms.mean())


def value_loss(minibatch: MiniBatch, value_params: ValueParams) -> float:
    """L̂_V: mean squared error between V(s) and the stored targets."""
    errors = value(value_params, minibatch.states) - minibatch.targets
    return float(np.mean(errors**2))


def _describe_nonfinite(name: str, values: np.ndarray, window: int = 2) -> str:
    """Debug-friendly summary of where an array stops being finite."""
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size == 0:
        return f"{name}: finite (length={values.size})"
    info = f"{name}: length={values.size}, non_finite_at={bad[:10].tolist()}"
    if bad.size > 10:
        info += f"+{bad.size - 10}more"
    samples = []
    for idx in bad[:3]:
        start, end = max(0, idx - window), min(values.size, idx + window + 1)
        samples.append(f"[{start}:{end}]={values[start:end].tolist()}")
    return info + f", samples={'; '.join(samples)}"


def combined_loss_and_grad(
    minibatch: MiniBatch,
    policy_params: PolicyParams,
    value_params: ValueParams,
    eps: float,
    value_coef: float,
    *,
    normalize: bool = False,
) -> LossResult:
    """Evaluate L̂(θ_ALL) = L̂_CLIP - c_v L̂_V and its exact gradient.

    Where the min picks the clipped branch with the ratio outside the clip
    band the surrogate is flat, so no gradient flows through that sample's
    ratio.
    """
    if value_coef < 0:
        raise ValueError(f"value_coef must be non-negative, got {value_coef}")
    m = len(minibatch)
    advantages = minibatch.advantages
    if normalize:
        advantages = normalize_advantages(advantages)

    current = policy_stats(policy_params, minibatch.states)
    ratios = np.exp(
        log_is_ratio(
            policy_params, minibatch.stats, minibatch.states, minibatch.actions
        )
    )
    terms, take_unclipped = _surrogate_terms(ratios, advantages, eps)
    surrogate_value = float(terms.mean())

    values = value(value_params, minibatch.states)
    errors = values - minibatch.targets
    value_loss_value = float(np.mean(errors**2))
    objective = surrogate_value - value_coef * value_loss_value

    if not (np.isfinite(objective) and np.all(np.isfinite(ratios))):
        _LOGGER.error(
            "Non-finite objective %s with mini-batch of %d samples", objective, m
        )
        _LOGGER.error("  %s", _describe_nonfinite("ratios", ratios))
        _LOGGER.error("  %s", _describe_nonfinite("advantages", advantages))
        _LOGGER.error("  %s", _describe_nonfinite("values", np.atleast_1d(values)))
        raise NonFiniteError(
            f"Objective is not finite (surrogate={surrogate_value}, "
            f"value_loss={value_loss_value})"
        )

    # d terms / d log π_new: Â R on the unclipped branch, 0 on the flat part
    dlogp = np.where(take_unclipped, advantages * ratios, 0.0) / m
    dmean, dlog_std = log_prob_grads(current, minibatch.actions)
    mean_grad, _ = mlp_backward(
        policy_params.mean_net, minibatch.states, dlogp[:, np.newaxis] * dmean
    )
    log_std_grad = (dlogp[:, np.newaxis] * dlog_std).sum(axis=0)

    dvalues = -value_coef * 2.0 * errors / m
    value_grad, _ = mlp_backward(
        value_params.value_net, minibatch.states, dvalues[:, np.newaxis]
    )

    return LossResult(
        objective=objective,
        surrogate=surrogate_value,
        value_loss=value_loss_value,
        policy_grad=PolicyParams(mean_net=mean_grad, log_std=log_std_grad),
        value_grad=ValueParams(value_grad),
        ratios=ratios,
    )
