"""Small numpy MLP for Q(s, .) with hand-written backprop.

Parameters are treated as values: every operation returns new arrays and
never mutates its inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

INPUT_DIM = 4
OUTPUT_DIM = 9
ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class NetworkArchitecture:
    hidden_layers: tuple[int, ...] = (64, 64)
    activation: str = "relu"
    input_dim: int = INPUT_DIM
    output_dim: int = OUTPUT_DIM
    # Fixed, untrained output head: q = output_offset + output_scale * (W h + b).
    # The loss is measured in the same normalised units, see loss_and_gradient.
    output_scale: float = 1.0
    output_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if any(w < 1 for w in self.hidden_layers):
            raise ValueError("hidden layer widths must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if not (self.output_scale > 0 and math.isfinite(self.output_offset)):
            raise ValueError("output_scale must be positive and output_offset finite")
        if self.input_dim != INPUT_DIM or self.output_dim != OUTPUT_DIM:
            raise ValueError(f"network maps {INPUT_DIM} features to {OUTPUT_DIM} actions")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_layers, self.output_dim)


@dataclass(frozen=True)
class NetworkParams:
    """``weights[i]`` has shape ``(fan_out, fan_in)``; ``biases[i]`` ``(fan_out,)``."""

    arch: NetworkArchitecture
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=np.float64) for b in self.biases)
        widths = self.arch.widths
        if len(ws) != len(widths) - 1 or len(bs) != len(ws):
            raise ValueError("layer count does not match architecture")
        for i, (w, b) in enumerate(zip(ws, bs)):
            if w.shape != (widths[i + 1], widths[i]) or b.shape != (widths[i + 1],):
                raise ValueError(f"layer {i} has shape {w.shape}/{b.shape}, expected "
                                 f"{(widths[i + 1], widths[i])}")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "NetworkParams":
        return NetworkParams(self.arch, tuple(arrays[0::2]), tuple(arrays[1::2]))

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    # Global gradient-norm cap; None disables it.
    max_grad_norm: float | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.max_grad_norm is not None and self.max_grad_norm <= 0:
            raise ValueError("max_grad_norm must be positive")


def init_params(arch: NetworkArchitecture, seed: int) -> NetworkParams:
    """He-uniform weights ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``, zero biases."""
    rng = np.random.default_rng(seed)
    widths = arch.widths
    ws, bs = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / fan_in)
        ws.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return NetworkParams(arch, tuple(ws), tuple(bs))


def _act(z, name):
    return np.maximum(z, 0.0) if name == "relu" else np.tanh(z)


def _dact(z, a, name):
    return (z > 0).astype(np.float64) if name == "relu" else 1.0 - a * a


def _forward_cache(params: NetworkParams, x: np.ndarray):
    acts = [x]
    pre = []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = z if i == last else _act(z, params.arch.activation)
        acts.append(h)
    arch = params.arch
    if arch.output_scale != 1.0 or arch.output_offset != 0.0:
        acts[-1] = arch.output_offset + arch.output_scale * acts[-1]
    return pre, acts


def forward(params: NetworkParams, features) -> np.ndarray:
    """Q-values for one feature vector ``(4,)`` -> ``(9,)`` or a batch ``(B, 4)`` -> ``(B, 9)``."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != params.arch.input_dim or x.ndim not in (1, 2):
        raise ValueError(f"expected features of length {params.arch.input_dim}, got shape {x.shape}")
    _, acts = _forward_cache(params, np.atleast_2d(x))
    q = acts[-1]
    return q[0] if x.ndim == 1 else q


def _check_batch(states, actions, targets):
    x = np.atleast_2d(np.asarray(states, dtype=np.float64))
    a = np.asarray(actions, dtype=np.int64).reshape(-1)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if not (x.shape[0] == a.size == y.size):
        raise ValueError("batch arrays differ in length")
    if not np.isfinite(y).all():
        raise ValueError("non-finite training target")
    if a.min() < 0 or a.max() >= OUTPUT_DIM:
        raise ValueError("action index out of range")
    return x, a, y


def loss_and_gradient(params: NetworkParams, states, actions, targets):
    """Mean over the batch of ``((Q(s, a) - y) / output_scale)**2`` and its gradient.

    Only the output of the taken action contributes for each sample. With
    the default head (scale 1, offset 0) this is the plain squared error.
    """
    x, a, y = _check_batch(states, actions, targets)
    pre, acts = _forward_cache(params, x)
    rows = np.arange(x.shape[0])
    err = (acts[-1][rows, a] - y) / params.arch.output_scale
    loss = float(np.mean(err**2))

    delta = np.zeros_like(acts[-1])
    delta[rows, a] = 2.0 * err / x.shape[0]
    gw, gb = [], []
    for i in range(len(params.weights) - 1, -1, -1):
        gw.append(delta.T @ acts[i])
        gb.append(delta.sum(axis=0))
        if i > 0:
            back = delta @ params.weights[i]
            delta = back * _dact(pre[i - 1], acts[i], params.arch.activation)
    grad = NetworkParams(params.arch, tuple(reversed(gw)), tuple(reversed(gb)))
    return loss, grad


def gradient(params: NetworkParams, states, actions, targets) -> NetworkParams:
    return loss_and_gradient(params, states, actions, targets)[1]


def batch_loss(params: NetworkParams, states, actions, targets) -> float:
    x, a, y = _check_batch(states, actions, targets)
    q = forward(params, x)
    return float(np.mean(((q[np.arange(len(a)), a] - y) / params.arch.output_scale) ** 2))


def train_batch(params: NetworkParams, states, actions, targets, cfg: TrainConfig = TrainConfig()):
    """One SGD step. Returns ``(new_params, loss_before_step)``."""
    loss, grad = loss_and_gradient(params, states, actions, targets)
    scale = cfg.learning_rate
    if cfg.max_grad_norm is not None:
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in grad.arrays()))
        if norm > cfg.max_grad_norm:
            scale *= cfg.max_grad_norm / norm
    new = [p - scale * g for p, g in zip(params.arrays(), grad.arrays())]
    return params.with_arrays(new), loss


def soft_update(target: NetworkParams, main: NetworkParams, tau: float) -> NetworkParams:
    """Blend target weights toward main: ``tau * main + (1 - tau) * target``."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if target.arch != main.arch:
        raise ValueError("target and main networks have different shapes")
    if tau == 1.0:
        return main
    if tau == 0.0:
        return target
    return target.with_arrays(
        [m * tau + t * (1.0 - tau) for m, t in zip(main.arrays(), target.arrays())]
    )


# Checkpoint: a .npz holding "arch" (JSON string) plus W0, b0, W1, b1, ...
def save_params(params: NetworkParams, path) -> None:
    arch = {
        "input_dim": params.arch.input_dim,
        "hidden_layers": list(params.arch.hidden_layers),
        "output_dim": params.arch.output_dim,
        "activation": params.arch.activation,
        "output_scale": params.arch.output_scale,
        "output_offset": params.arch.output_offset,
    }
    arrays = {}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    with open(Path(path), "wb") as fh:
        np.savez(fh, arch=np.array(json.dumps(arch)), **arrays)


def load_params(path) -> NetworkParams:
    with np.load(Path(path), allow_pickle=False) as data:
        arch = NetworkArchitecture(**json.loads(str(data["arch"])))
        n = len(arch.widths) - 1
        ws = tuple(data[f"W{i}"] for i in range(n))
        bs = tuple(data[f"b{i}"] for i in range(n))
    return NetworkParams(arch, ws, bs)
