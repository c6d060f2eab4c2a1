"""Multi-batch replay memory with adaptive batch drop."""

import logging
from collections import deque
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatchError, ReplayOrderError
from .loss import MiniBatch
from .policy import GaussianStats, PolicyParams, is_ratio

_LOGGER = logging.getLogger(__name__)


@dataclass
class StoredBatch:
    """One iteration's samples B_i = (s, a, Â, V̂, μ, σ_i).

    μ is kept per sample, σ once per batch. ``active`` is rewritten by
    :func:`select_active` every iteration.
    """

    iteration: int
    states: np.ndarray
    actions: np.ndarray
    advantages: np.ndarray
    targets: np.ndarray
    means: np.ndarray
    std: np.ndarray
    active: bool = field(default=True)

    def __post_init__(self) -> None:
        """Check per-sample arrays share one length and σ is positive."""
        n = self.advantages.shape[0]
        for name in ("states", "actions", "targets", "means"):
            rows = getattr(self, name).shape[0]
            if rows != n:
                raise DimensionMismatchError(
                    f"StoredBatch {self.iteration}: '{name}' has {rows} rows, "
                    f"expected {n}"
                )
        if self.std.shape != (self.actions.shape[1],) or np.any(self.std <= 0):
            raise ValueError(
                f"StoredBatch {self.iteration}: std must be a positive "
                f"({self.actions.shape[1]},) vector, got {self.std!r}"
            )
        if not np.all(np.isfinite(self.advantages) & np.isfinite(self.targets)):
            raise ValueError(
                f"StoredBatch {self.iteration}: advantages and targets must be finite"
            )

    def __len__(self) -> int:
        """Number of samples N."""
        return self.advantages.shape[0]

    @property
    def stats(self) -> GaussianStats:
        """Rollout-time Gaussian statistics of every sample."""
        return GaussianStats(mean=self.means, std=self.std)


class ReplayMemory:
    """The L most recent batches, oldest first."""

    def __init__(self, capacity: int) -> None:
        """Initialize replay memory."""
        if capacity < 1:
            raise ValueError(f"Replay capacity must be at least 1, got {capacity}")
        self.capacity = capacity
        self._batches: deque[StoredBatch] = deque(maxlen=capacity)

    def push_batch(self, batch: StoredBatch) -> None:
        """Append the newest batch, evicting the oldest when full."""
        if self._batches and batch.iteration != self._batches[-1].iteration + 1:
            raise ReplayOrderError(
                f"Batch for iteration {batch.iteration} does not follow "
                f"iteration {self._batches[-1].iteration}"
            )
        if self._batches and len(batch) != len(self._batches[-1]):
            raise DimensionMismatchError(
                f"Batch {batch.iteration} holds {len(batch)} samples, "
                f"memory holds batches of {len(self._batches[-1])}"
            )
        evicted = self._batches[0] if len(self._batches) == self.capacity else None
        self._batches.append(batch)
        if evicted is not None:
            _LOGGER.debug("Evicted batch %d from replay", evicted.iteration)

    @property
    def batches(self) -> list[StoredBatch]:
        """Stored batches, oldest first."""
        return list(self._batches)

    @property
    def newest(self) -> StoredBatch:
        """The batch collected this iteration."""
        if not self._batches:
            raise IndexError("Replay memory is empty")
        return self._batches[-1]

    def by_lag(self) -> Iterator[tuple[int, StoredBatch]]:
        """Yield (l, B_{i-l}) from the newest batch backwards."""
        for lag, batch in enumerate(reversed(self._batches)):
            yield lag, batch

    def __len__(self) -> int:
        """Number of stored batches."""
        return len(self._batches)


@dataclass(frozen=True)
class ActiveSet:
    """Batches selected for this iteration's updates."""

    batches: list[StoredBatch]
    minibatch_size: int
    # R' per stored batch, index = lag
    batch_avg_weights: list[float]


@dataclass(frozen=True)
class SamplePool:
    """Concatenated samples of the active batches, oldest batch first."""

    states: np.ndarray
    actions: np.ndarray
    advantages: np.ndarray
    targets: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    # index of the source batch of each sample (position in ActiveSet.batches)
    origins: np.ndarray

    def __len__(self) -> int:
        """Total active samples."""
        return self.advantages.shape[0]

    def take(self, indices: np.ndarray) -> MiniBatch:
        """Gather the given samples into a mini-batch."""
        return MiniBatch(
            states=self.states[indices],
            actions=self.actions[indices],
            advantages=self.advantages[indices],
            targets=self.targets[indices],
            means=self.means[indices],
            stds=self.stds[indices],
        )


def batch_avg_is(policy_params: PolicyParams, batch: StoredBatch) -> float:
    """R' = mean over the batch of 1 + |1 - π_current / π_rollout|."""
    ratios = is_ratio(policy_params, batch.stats, batch.states, batch.actions)
    return float(np.mean(1.0 + np.abs(1.0 - ratios)))


def select_active(
    memory: ReplayMemory,
    policy_params: PolicyParams,
    batch_drop: float,
    adaptive: bool,
    minibatch_base: int,
) -> ActiveSet:
    """Mark each stored batch active or inactive and size the mini-batch.

    Adaptive: B_{i-l} stays active iff R'_{i,l} <= 1 + ε_b; the newest batch is
    always active. Otherwise every stored batch is active. M is M_PPO times
    the number of active batches.
    """
    if not len(memory):
        raise IndexError("Cannot select from an empty replay memory")
    if batch_drop < 0:
        raise ValueError(f"batch_drop must be non-negative, got {batch_drop}")

    weights: list[float] = []
    threshold = 1.0 + batch_drop
    for lag, batch in memory.by_lag():
        r_prime = batch_avg_is(policy_params, batch)
        weights.append(r_prime)
        batch.active = lag == 0 or not adaptive or r_prime <= threshold
        _LOGGER.debug(
            "Batch %d (lag %d): R'=%.6f %s",
            batch.iteration,
            lag,
            r_prime,
            "active" if batch.active else "dropped",
        )

    active = [batch for batch in memory.batches if batch.active]
    return ActiveSet(
        batches=active,
        minibatch_size=minibatch_base * len(active),
        batch_avg_weights=weights,
    )


def build_pool(batches: Sequence[StoredBatch]) -> SamplePool:
    """Concatenate active batches into one sampling pool."""
    if not batches:
        raise ValueError("At least one active batch is required")
    return SamplePool(
        states=np.concatenate([b.states for b in batches]),
        actions=np.concatenate([b.actions for b in batches]),
        advantages=np.concatenate([b.advantages for b in batches]),
        targets=np.concatenate([b.targets for b in batches]),
        means=np.concatenate([b.means for b in batches]),
        stds=np.concatenate([np.broadcast_to(b.std, b.means.shape) for b in batches]),
        origins=np.concatenate(
            [np.full(len(b), i, dtype=np.int64) for i, b in enumerate(batches)]
        ),
    )


def _check_size(pool: SamplePool, size: int) -> None:
    if not 1 <= size <= len(pool):
        raise ValueError(
            f"Mini-batch of {size} samples cannot be drawn from a pool of {len(pool)}"
        )


def sample_minibatch_indices(
    pool: SamplePool, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``size`` distinct pool indices uniformly at random."""
    _check_size(pool, size)
    return rng.choice(len(pool), size=size, replace=False)


def sample_minibatch(
    pool: SamplePool, size: int, rng: np.random.Generator
) -> MiniBatch:
    """Uniform mini-batch over the active batches, no repeats within it."""
    return pool.take(sample_minibatch_indices(pool, size, rng))


def sample_episodic_minibatch(
    pool: SamplePool, size: int, rng: np.random.Generator
) -> MiniBatch:
    """Contiguous run of ``size`` samples starting at a uniform offset."""
    _check_size(pool, size)
    start = int(rng.integers(0, len(pool) - size + 1))
    return pool.take(np.arange(start, start + size))
