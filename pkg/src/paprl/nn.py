"""Small numpy multilayer perceptron, optimizers and an experience buffer.

Networks use tanh on hidden layers and an identity output layer. Weight
matrices are stored as ``(fan_in, fan_out)`` so a batch forward pass is
``x @ W + b``. The training loss is the mean squared error over every element
of the output batch.
"""

from __future__ import annotations

import json
import math
from collections import deque
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyBuffer, NumericalFault

FORMAT_VERSION = 1


class AffineNormalizer:
    """Fixed per-dimension map from ``[low, high]`` onto ``[-1, 1]``."""

    def __init__(self, low: Sequence[float], high: Sequence[float]):
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        if self.low.shape != self.high.shape or np.any(self.high <= self.low):
            raise ValueError("normalizer needs matching bounds with high > low")
        self._mid = 0.5 * (self.low + self.high)
        self._half = 0.5 * (self.high - self.low)

    def __len__(self) -> int:
        return len(self.low)

    def encode(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self._mid) / self._half

    def decode(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) * self._half + self._mid

    def to_dict(self) -> dict:
        return {"low": self.low.tolist(), "high": self.high.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AffineNormalizer":
        return cls(d["low"], d["high"])


class Mlp:
    """Dense tanh network with a linear output layer."""

    activation = "tanh"

    def __init__(self, layer_sizes: Sequence[int], weights=None, biases=None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError(f"bad layer sizes {layer_sizes!r}")
        self.layer_sizes = sizes
        if weights is None:
            weights = [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
        if biases is None:
            biases = [np.zeros(b) for b in sizes[1:]]
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            if self.weights[i].shape != (a, b) or self.biases[i].shape != (b,):
                raise DimensionMismatch(f"layer {i} parameters do not match sizes {sizes}")

    @classmethod
    def uniform_init(cls, layer_sizes, rng: np.random.Generator, scale: float = 0.1) -> "Mlp":
        """Weights uniform in ``[-scale, scale]``, zero biases."""
        sizes = list(layer_sizes)
        weights = [rng.uniform(-scale, scale, size=(a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
        return cls(sizes, weights=weights)

    @classmethod
    def xavier_init(cls, layer_sizes, rng: np.random.Generator) -> "Mlp":
        sizes = list(layer_sizes)
        weights = []
        for a, b in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (a + b))
            weights.append(rng.uniform(-limit, limit, size=(a, b)))
        return cls(sizes, weights=weights)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "Mlp":
        return Mlp(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def forward(self, x, dtype=np.float64) -> np.ndarray:
        """Network output. ``dtype=np.float32`` trades precision for speed on
        large candidate batches; training always runs in float64."""
        x = np.asarray(x, dtype=dtype)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.ndim != 2 or X.shape[1] != self.n_inputs:
            raise DimensionMismatch(f"expected {self.n_inputs} inputs, got shape {x.shape}")
        h = X
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.astype(dtype, copy=False) + b.astype(dtype, copy=False)
            if i < last:
                h = np.tanh(h)
        return h[0] if single else h

    __call__ = forward

    def _activations(self, X: np.ndarray) -> list[np.ndarray]:
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        return acts

    def loss_and_gradients(self, X, Y) -> tuple[float, list[np.ndarray]]:
        """MSE loss and its gradient for every parameter (same order as ``parameters``)."""
        X, Y = self._check_batch(X, Y)
        acts = self._activations(X)
        err = acts[-1] - Y
        loss = float(np.mean(err * err))
        delta = 2.0 * err / err.size
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))  # type: ignore[list-item]
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (1.0 - acts[i] ** 2)
        return loss, grads

    def loss(self, X, Y) -> float:
        X, Y = self._check_batch(X, Y)
        err = self.forward(X) - Y
        return float(np.mean(err * err))

    def _check_batch(self, X, Y) -> tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if X.shape[0] == 0:
            raise DimensionMismatch("empty batch")
        if X.shape[1] != self.n_inputs or Y.shape != (X.shape[0], self.n_outputs):
            raise DimensionMismatch(
                f"batch shapes {X.shape} -> {Y.shape} do not fit {self.layer_sizes}"
            )
        return X, Y

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "layer_sizes": list(self.layer_sizes),
            "activation": self.activation,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('format_version')!r}")
        if d.get("activation", "tanh") != "tanh":
            raise ValueError(f"unsupported activation {d['activation']!r}")
        sizes = d["layer_sizes"]
        weights = [
            np.array(w, dtype=float).reshape(a, b) for w, a, b in zip(d["weights"], sizes[:-1], sizes[1:])
        ]
        return cls(sizes, weights, d["biases"])

    def param_bytes(self) -> bytes:
        return b"".join(p.tobytes() for p in self.parameters())


class Sgd:
    """Plain gradient descent."""

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        for p, g in zip(params, grads):
            p -= lr * g


class Adam:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(name: str):
    if name == "sgd":
        return Sgd()
    if name == "adam":
        return Adam()
    raise ValueError(f"unknown optimizer {name!r}")


def train_minibatch(model: Mlp, X, Y, learning_rate: float, optimizer=None) -> float:
    """One gradient step on the batch MSE. Returns the loss before the step.

    Parameters are restored and :class:`NumericalFault` raised if the update
    leaves any of them non-finite.
    """
    loss, grads = model.loss_and_gradients(X, Y)
    params = model.parameters()
    backup = [p.copy() for p in params]
    (optimizer or Sgd()).step(params, grads, learning_rate)
    if not all(np.isfinite(p).all() for p in params):
        for p, b in zip(params, backup):
            p[...] = b
        raise NumericalFault("non-finite parameters after update")
    return loss


def gradient_check(model: Mlp, X, Y, h: float = 1e-5, floor: float = 1e-7) -> float:
    """Max relative error between backprop and central finite differences.

    Relative error per parameter is ``|a - n| / max(|a|, |n|, floor)``; the floor
    keeps parameters whose true gradient is ~0 from dividing round-off by zero.
    """
    _, analytic = model.loss_and_gradients(X, Y)
    worst = 0.0
    for p, g in zip(model.parameters(), analytic):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = model.loss(X, Y)
            flat[k] = orig - h
            down = model.loss(X, Y)
            flat[k] = orig
            numeric = (up - down) / (2.0 * h)
            a = gflat[k]
            denom = max(abs(a), abs(numeric), floor)
            worst = max(worst, abs(a - numeric) / denom)
    return worst


class ReplayBuffer:
    """FIFO experience store with uniform sampling (with replacement)."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: deque = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def append(self, entry: tuple) -> None:
        self._items.append(tuple(np.asarray(e, dtype=float) for e in entry))

    def extend(self, entries: Iterable[tuple]) -> None:
        for e in entries:
            self.append(e)


def sample_minibatch(buffer: ReplayBuffer, k: int, rng: np.random.Generator) -> tuple[np.ndarray, ...]:
    """Draw ``k`` entries uniformly with replacement; one stacked array per field."""
    n = len(buffer)
    if n == 0:
        raise EmptyBuffer("cannot sample from an empty buffer")
    idx = rng.integers(0, n, size=k)
    items = buffer._items
    picked = [items[i] for i in idx]
    return tuple(np.stack(field) for field in zip(*picked))


def dump_json(obj: Any, path: str | Path) -> None:
    """Write JSON; floats use Python's shortest round-trip repr so values reload bit-exact."""
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n")


def load_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text())
