"""Training loop: rollout, estimation, replay, batch drop and updates."""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .const import CHECKPOINT_FILE, MANIFEST_FILE, METRICS_FILE
from .envs import Environment, make_env
from .estimation import Trajectory, estimate
from .exceptions import DimensionMismatchError, NonFiniteError, TrainingAborted
from .helpers import schedule, seed_streams
from .loss import combined_loss_and_grad
from .metrics import (
    EpisodeTracker,
    MetricsWriter,
    avg_is_diag,
    emit_record,
    write_manifest,
)
from .models import IterationRecord, TrainConfig
from .net import AdamState, MlpParams, adam_step, load_checkpoint, save_checkpoint
from .policy import (
    GaussianStats,
    PolicyParams,
    ValueParams,
    init_policy,
    init_value,
    pack_params,
    policy_stats,
    sample_action,
    unpack_params,
)
from .replay import (
    ReplayMemory,
    StoredBatch,
    build_pool,
    sample_episodic_minibatch,
    sample_minibatch,
    select_active,
)

_LOGGER = logging.getLogger(__name__)


@dataclass
class TrainState:
    """Everything that evolves during a run."""

    policy: PolicyParams
    value: ValueParams
    optimizer: AdamState
    memory: ReplayMemory
    env: Environment
    observation: np.ndarray
    env_rng: np.random.Generator
    action_rng: np.random.Generator
    minibatch_rng: np.random.Generator
    tracker: EpisodeTracker
    global_step: int = 0
    iteration: int = 0
    update_count: int = 0


def init_state(config: TrainConfig) -> TrainState:
    """Fresh networks, optimizer, memory and environment for a run."""
    init_rng, env_rng, action_rng, minibatch_rng = seed_streams(config.seed)
    env = make_env(config.env)
    policy = init_policy(env.spec, init_rng)
    value = init_value(env.spec, init_rng)
    return TrainState(
        policy=policy,
        value=value,
        optimizer=AdamState.zeros(policy.num_params + value.num_params),
        memory=ReplayMemory(config.replay_length),
        env=env,
        observation=env.reset(env_rng),
        env_rng=env_rng,
        action_rng=action_rng,
        minibatch_rng=minibatch_rng,
        tracker=EpisodeTracker(),
    )


def _check_shapes(loaded: MlpParams, template: MlpParams, name: str) -> None:
    got = [w.shape for w in loaded.weights]
    want = [w.shape for w in template.weights]
    if got != want:
        raise DimensionMismatchError(
            f"Checkpoint network '{name}' has layers {got}, expected {want}"
        )


class Trainer:
    """Runs collect-estimate-replay-update iterations for one configuration."""

    def __init__(self, config: TrainConfig) -> None:
        """Initialize trainer."""
        self.config = config
        self.state = init_state(config)

    def collect_rollout(self) -> Trajectory:
        """Take N environment steps with the current policy.

        Episodes carry over between iterations; the environment is reset
        only when an episode ends.
        """
        state, n = self.state, self.config.horizon
        spec = state.env.spec
        states = np.empty((n + 1, spec.state_dim))
        next_states = np.empty((n, spec.state_dim))
        actions = np.empty((n, spec.action_dim))
        rewards = np.empty(n)
        dones = np.zeros(n, dtype=bool)
        truncated = np.zeros(n, dtype=bool)

        observation = state.observation
        for t in range(n):
            action = sample_action(
                policy_stats(state.policy, observation), state.action_rng
            )
            result = state.env.step(action)

            states[t] = observation
            actions[t] = action
            rewards[t] = result.reward
            dones[t] = result.done
            truncated[t] = result.truncated
            next_states[t] = result.next_state
            state.tracker.add(result.reward, result.done)

            observation = (
                state.env.reset(state.env_rng) if result.done else result.next_state
            )
            state.global_step += 1

        states[n] = observation
        state.observation = observation

        # one batched pass, so replay-time recomputation matches bit for bit
        stats = policy_stats(state.policy, states[:n])
        return Trajectory(
            states=states,
            actions=actions,
            rewards=rewards,
            dones=dones,
            truncated=truncated,
            next_states=next_states,
            stats=GaussianStats(mean=stats.mean, std=stats.std.copy()),
        )

    def run_iteration(self) -> IterationRecord:
        """Rollout, store, select active batches and apply S·N/M_PPO updates."""
        config, state = self.config, self.state
        start_step = state.global_step
        step_size = schedule(config.step_size, start_step, config.total_steps)
        clip_eps = schedule(config.clip, start_step, config.total_steps)
        batch_drop = schedule(config.batch_drop, start_step, config.total_steps)

        trajectory = self.collect_rollout()
        estimated = estimate(
            trajectory,
            state.value,
            config.gamma,
            config.lam,
            bootstrap_on_timeout=config.bootstrap_on_timeout,
        )
        state.iteration += 1
        state.memory.push_batch(
            StoredBatch(
                iteration=state.iteration,
                states=trajectory.states[: config.horizon],
                actions=trajectory.actions,
                advantages=estimated.advantages,
                targets=estimated.targets,
                means=trajectory.stats.mean,
                std=trajectory.stats.std,
            )
        )

        selection = select_active(
            state.memory, state.policy, batch_drop, config.adaptive, config.minibatch
        )
        size = config.minibatch if config.fixed_minibatch else selection.minibatch_size
        pool = build_pool(selection.batches)
        if size > len(pool):
            raise RuntimeError(
                f"Mini-batch size {size} exceeds the {len(pool)} active samples"
            )
        sampler = (
            sample_episodic_minibatch if config.episodic_minibatch else sample_minibatch
        )

        theta = pack_params(state.policy, state.value)
        updates_before = state.update_count
        ratios: list[np.ndarray] = []
        surrogates: list[float] = []
        value_losses: list[float] = []
        for _epoch in range(config.epochs):
            for _ in range(config.horizon // config.minibatch):
                minibatch = sampler(pool, size, state.minibatch_rng)
                try:
                    result = combined_loss_and_grad(
                        minibatch,
                        state.policy,
                        state.value,
                        clip_eps,
                        config.value_coef,
                        normalize=config.normalize_advantages,
                    )
                    # gradient ascent on L̂ is descent on -L̂
                    grad = pack_params(result.policy_grad, result.value_grad)
                    theta, state.optimizer = adam_step(
                        state.optimizer, theta, -grad, step_size
                    )
                except NonFiniteError as err:
                    raise TrainingAborted(
                        f"Iteration {state.iteration}, update "
                        f"{state.update_count + 1}: {err}"
                    ) from err
                state.policy, state.value = unpack_params(
                    theta, state.policy, state.value
                )
                state.update_count += 1
                ratios.append(result.ratios)
                surrogates.append(result.surrogate)
                value_losses.append(result.value_loss)

        if state.update_count - updates_before != config.updates_per_iteration:
            raise RuntimeError(
                f"Iteration {state.iteration} applied "
                f"{state.update_count - updates_before} updates, expected "
                f"{config.updates_per_iteration}"
            )

        record = IterationRecord(
            iteration=state.iteration,
            global_step=state.global_step,
            update_count=state.update_count,
            episodes_completed=state.tracker.episodes_completed,
            mean_return_100=state.tracker.recent_mean,
            mean_return_all=state.tracker.overall_mean,
            step_size=step_size,
            clip=clip_eps,
            batch_drop=batch_drop,
            num_active=len(selection.batches),
            minibatch_size=size,
            avg_is=avg_is_diag(np.concatenate(ratios)),
            surrogate=float(np.mean(surrogates)),
            value_loss=float(np.mean(value_losses)),
            batch_avg_weights=selection.batch_avg_weights,
        )
        recent = record.mean_return_100
        _LOGGER.info(
            "Iteration %d/%d: step=%d return_100=%s active=%d/%d M=%d avg_is=%.4f",
            record.iteration,
            config.iterations,
            record.global_step,
            "n/a" if recent is None else round(recent, 2),
            record.num_active,
            len(state.memory),
            record.minibatch_size,
            record.avg_is,
        )
        return record

    def checkpoint_arrays(self) -> dict[str, np.ndarray]:
        """Named parameter arrays of the current policy and value networks."""
        return {
            **self.state.policy.mean_net.named_arrays("policy/mean"),
            "policy/log_std": self.state.policy.log_std,
            **self.state.value.value_net.named_arrays("value"),
        }

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Replace the networks with checkpointed parameters."""
        mean_net = MlpParams.from_named_arrays(arrays, "policy/mean")
        value_net = MlpParams.from_named_arrays(arrays, "value")
        _check_shapes(mean_net, self.state.policy.mean_net, "policy/mean")
        _check_shapes(value_net, self.state.value.value_net, "value")
        log_std = np.asarray(arrays["policy/log_std"], dtype=np.float64)
        if log_std.shape != self.state.policy.log_std.shape:
            raise DimensionMismatchError(
                f"Checkpoint log_std shape {log_std.shape}, expected "
                f"{self.state.policy.log_std.shape}"
            )
        self.state.policy = PolicyParams(mean_net=mean_net, log_std=log_std)
        self.state.value = ValueParams(value_net)


def train(config: TrainConfig, out_dir: Path | None = None) -> list[IterationRecord]:
    """Run T/N iterations, writing metrics, manifest and checkpoint to ``out_dir``."""
    _LOGGER.info(
        "Starting run: env=%s L=%d adaptive=%s iterations=%d seed=%d",
        config.env,
        config.replay_length,
        config.adaptive,
        config.iterations,
        config.seed,
    )
    trainer = Trainer(config)
    records: list[IterationRecord] = []

    sink = None
    if out_dir is not None:
        write_manifest(out_dir / MANIFEST_FILE, config)
        sink = MetricsWriter.open(out_dir / METRICS_FILE)
    try:
        for _ in range(config.iterations):
            record = trainer.run_iteration()
            records.append(record)
            if sink is not None:
                emit_record(record, sink)
    finally:
        if sink is not None:
            sink.close()

    if out_dir is not None:
        save_checkpoint(out_dir / CHECKPOINT_FILE, trainer.checkpoint_arrays())
    _LOGGER.info("Run finished after %d updates", trainer.state.update_count)
    return records


def evaluate(
    config: TrainConfig,
    episodes: int,
    checkpoint: Path | None = None,
    *,
    deterministic: bool = False,
) -> float:
    """Mean return over complete episodes, without any updates.

    Without a checkpoint this measures the freshly initialized policy.
    """
    if episodes < 1:
        raise ValueError(f"episodes must be at least 1, got {episodes}")
    trainer = Trainer(config)
    if checkpoint is not None:
        trainer.load_arrays(load_checkpoint(checkpoint))

    state = trainer.state
    tracker = EpisodeTracker()
    observation = state.observation
    while tracker.episodes_completed < episodes:
        stats = policy_stats(state.policy, observation)
        action = stats.mean if deterministic else sample_action(stats, state.action_rng)
        result = state.env.step(action)
        tracker.add(result.reward, result.done)
        if result.done:
            observation = state.env.reset(state.env_rng)
        else:
            observation = result.next_state

    mean_return = float(tracker.overall_mean)
    _LOGGER.info("Evaluated %d episodes: mean return %.3f", episodes, mean_return)
    return mean_return
