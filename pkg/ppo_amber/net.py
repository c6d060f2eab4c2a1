"""Feed-forward networks with hand-written reverse mode and Adam.

Layers are fully connected with tanh on every hidden layer and a linear
output. Inputs may be a single vector ``(in,)`` or a batch ``(B, in)``; batched
gradients are summed over rows. Everything runs in float64.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .const import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPSILON,
    HIDDEN_GAIN,
    HIDDEN_SIZES,
)
from .exceptions import DimensionMismatchError, NonFiniteError

_LOGGER = logging.getLogger(__name__)

CHECKPOINT_DTYPE = np.dtype("<f8")


@dataclass(frozen=True)
class MlpParams:
    """Weights ``(fan_in, fan_out)`` and biases of each layer, input first."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    @property
    def in_dim(self) -> int:
        """Input width."""
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        """Output width."""
        return self.weights[-1].shape[1]

    @property
    def num_params(self) -> int:
        """Total number of scalars."""
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flatten(self) -> np.ndarray:
        """Concatenate all parameters, layer by layer, weights before biases."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def unflatten(self, flat: np.ndarray) -> "MlpParams":
        """Build params shaped like ``self`` from a flat vector."""
        if flat.shape != (self.num_params,):
            raise DimensionMismatchError(
                f"flat vector shape {flat.shape}, expected ({self.num_params},)"
            )
        weights, biases = [], []
        offset = 0
        for w, b in zip(self.weights, self.biases):
            weights.append(flat[offset : offset + w.size].reshape(w.shape))
            offset += w.size
            biases.append(flat[offset : offset + b.size].copy())
            offset += b.size
        return MlpParams(tuple(w.copy() for w in weights), tuple(biases))

    def zeros_like(self) -> "MlpParams":
        """Params of the same shapes filled with zeros."""
        return MlpParams(
            tuple(np.zeros_like(w) for w in self.weights),
            tuple(np.zeros_like(b) for b in self.biases),
        )

    def named_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        """Arrays keyed ``<prefix>/w<i>`` and ``<prefix>/b<i>``."""
        arrays: dict[str, np.ndarray] = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"{prefix}/w{i}"] = w
            arrays[f"{prefix}/b{i}"] = b
        return arrays

    @classmethod
    def from_named_arrays(
        cls, arrays: dict[str, np.ndarray], prefix: str
    ) -> "MlpParams":
        """Inverse of :meth:`named_arrays`."""
        weights, biases = [], []
        i = 0
        while f"{prefix}/w{i}" in arrays:
            weights.append(np.asarray(arrays[f"{prefix}/w{i}"], dtype=np.float64))
            biases.append(np.asarray(arrays[f"{prefix}/b{i}"], dtype=np.float64))
            i += 1
        if not weights:
            raise KeyError(f"No layers stored under prefix '{prefix}'")
        return cls(tuple(weights), tuple(biases))


@dataclass(frozen=True)
class AdamState:
    """Adam moment accumulators over a flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        """Fresh optimizer state for ``size`` parameters."""
        return cls(m=np.zeros(size), v=np.zeros(size))


def _orthogonal(
    rng: np.random.Generator, shape: tuple[int, int], gain: float
) -> np.ndarray:
    """Scaled orthogonal matrix, the way baselines' ortho_init builds one."""
    a = rng.standard_normal(shape)
    u, _, vt = np.linalg.svd(a, full_matrices=False)
    q = u if u.shape == shape else vt
    return gain * q


def init_mlp(
    in_dim: int,
    out_dim: int,
    rng: np.random.Generator,
    *,
    output_gain: float,
    hidden_sizes: tuple[int, ...] = HIDDEN_SIZES,
) -> MlpParams:
    """Orthogonal init, gain √2 on hidden layers, zero biases."""
    sizes = (in_dim, *hidden_sizes, out_dim)
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        gain = output_gain if i == len(sizes) - 2 else HIDDEN_GAIN
        weights.append(_orthogonal(rng, (fan_in, fan_out), gain))
        biases.append(np.zeros(fan_out))
    return MlpParams(tuple(weights), tuple(biases))


def _as_batch(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[np.newaxis, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != params.in_dim:
        raise DimensionMismatchError(
            f"input shape {x.shape}, network expects {params.in_dim} features"
        )
    return batch, single


def _activations(params: MlpParams, batch: np.ndarray) -> list[np.ndarray]:
    """Layer inputs followed by the network output."""
    layers = [batch]
    h = batch
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        h = z if i == last else np.tanh(z)
        layers.append(h)
    return layers


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on one input or a batch of inputs."""
    batch, single = _as_batch(params, x)
    out = _activations(params, batch)[-1]
    return out[0] if single else out


def mlp_backward(
    params: MlpParams, x: np.ndarray, output_grad: np.ndarray
) -> tuple[MlpParams, np.ndarray]:
    """Gradients of ⟨output, output_grad⟩ w.r.t. params and input.

    For a batch the parameter gradient is summed over rows and the input
    gradient is returned per row.
    """
    batch, single = _as_batch(params, x)
    grad = np.asarray(output_grad, dtype=np.float64)
    grad = grad[np.newaxis, :] if grad.ndim == 1 else grad
    if grad.shape != (batch.shape[0], params.out_dim):
        raise DimensionMismatchError(
            f"output_grad shape {np.shape(output_grad)}, expected "
            f"{(batch.shape[0], params.out_dim) if not single else (params.out_dim,)}"
        )

    layers = _activations(params, batch)
    n_layers = len(params.weights)
    w_grads: list[np.ndarray] = [np.empty(0)] * n_layers
    b_grads: list[np.ndarray] = [np.empty(0)] * n_layers

    delta = grad
    for i in range(n_layers - 1, -1, -1):
        if i != n_layers - 1:
            delta = delta * (1.0 - layers[i + 1] ** 2)
        w_grads[i] = layers[i].T @ delta
        b_grads[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i].T

    input_grad = delta[0] if single else delta
    return MlpParams(tuple(w_grads), tuple(b_grads)), input_grad


def adam_step(
    state: AdamState, params: np.ndarray, grads: np.ndarray, step_size: float
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam descent step on a flat parameter vector.

    Descends along ``grads``; callers maximizing an objective pass its
    negated gradient.
    """
    if step_size < 0:
        raise ValueError(f"step_size must be non-negative, got {step_size}")
    if grads.shape != params.shape or state.m.shape != params.shape:
        raise DimensionMismatchError(
            f"params {params.shape}, grads {grads.shape}, "
            f"moments {state.m.shape} do not match"
        )
    if not np.all(np.isfinite(grads)):
        bad = np.flatnonzero(~np.isfinite(grads))
        _LOGGER.error(
            "Non-finite gradient: %d entries, first at %s, values %s",
            bad.size,
            bad[:10].tolist(),
            grads[bad[:10]].tolist(),
        )
        raise NonFiniteError(f"Non-finite gradient in {bad.size} entries")

    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - step_size * m_hat / (np.sqrt(v_hat) + state.epsilon)

    return new_params, AdamState(
        m=m,
        v=v,
        t=t,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
    )


def save_checkpoint(path: Path, arrays: dict[str, np.ndarray]) -> None:
    """Write named arrays as little-endian float64 to an ``.npz`` archive."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        np.savez(
            fh,
            **{
                name: np.ascontiguousarray(arr, dtype=CHECKPOINT_DTYPE)
                for name, arr in arrays.items()
            },
        )
    _LOGGER.debug("Saved %d arrays to %s", len(arrays), path)


def load_checkpoint(path: Path) -> dict[str, np.ndarray]:
    """Read an archive written by :func:`save_checkpoint`."""
    with np.load(path, allow_pickle=False) as archive:
        return {name: archive[name].astype(np.float64) for name in archive.files}
