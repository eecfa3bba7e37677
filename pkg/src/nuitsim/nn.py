"""Small numpy MLP, plain SGD and a replay buffer for deep Q-learning."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np


class DivergenceError(RuntimeError):
    """Training loss became non-finite or exceeded its ceiling."""


@dataclass
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


class Batch(NamedTuple):
    """Transitions stacked column-wise."""

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray


def as_batch(batch: Union[Batch, Sequence[Transition]]) -> Batch:
    if isinstance(batch, Batch):
        return batch
    return Batch(
        np.stack([t.s for t in batch]),
        np.array([t.a for t in batch], dtype=int),
        np.array([t.r for t in batch], dtype=float),
        np.stack([t.s_next for t in batch]),
        np.array([t.done for t in batch], dtype=bool),
    )


class Mlp:
    """Fully connected net: ReLU on hidden layers, identity output."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per weight matrix")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: weight {w.shape} does not match bias {b.shape}")
            if i and weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input width {w.shape[0]} != {weights[i - 1].shape[1]}")
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]

    @classmethod
    def init(cls, sizes: list[int], rng: np.random.Generator) -> Mlp:
        """He-scaled normal weights, zero biases."""
        weights = [rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out)) for n_in, n_out in zip(sizes, sizes[1:])]
        biases = [np.zeros(n_out) for n_out in sizes[1:]]
        return cls(weights, biases)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> Mlp:
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Q-values for one feature vector or a batch (rows)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.weights[0].shape[0]:
        raise ValueError(f"input width {x.shape[-1]} != network input {net.weights[0].shape[0]}")
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def loss_and_gradients(
    net: Mlp, x: np.ndarray, actions: np.ndarray, targets: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """MSE between the chosen-action outputs and ``targets``, with backprop gradients."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    actions = np.asarray(actions, dtype=int)
    targets = np.asarray(targets, dtype=float)
    batch = x.shape[0]

    acts = [x]
    pre = []
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)

    rows = np.arange(batch)
    err = acts[-1][rows, actions] - targets
    loss = float(np.mean(err**2))

    delta = np.zeros_like(acts[-1])
    delta[rows, actions] = 2.0 * err / batch
    grad_w: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    for i in range(last, -1, -1):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ net.weights[i].T) * (pre[i - 1] > 0)
    return loss, grad_w, grad_b


def sgd_step(
    net: Mlp, batch: Batch | Sequence[Transition], targets: np.ndarray, lr: float, loss_ceiling: float = np.inf
) -> float:
    """One plain gradient-descent step on the batch; updates ``net`` in place and returns the loss."""
    if not isinstance(batch, Batch) and len(batch) == 0:
        raise ValueError("empty batch")
    b = as_batch(batch)
    if len(b.a) == 0:
        raise ValueError("empty batch")
    loss, gw, gb = loss_and_gradients(net, b.s, b.a, targets)
    if not np.isfinite(loss) or loss > loss_ceiling:
        raise DivergenceError(f"loss {loss!r} exceeded ceiling {loss_ceiling!r}")
    for w, g in zip(net.weights, gw):
        w -= lr * g
    for b, g in zip(net.biases, gb):
        b -= lr * g
    return loss


def bellman_targets(batch: Batch | Sequence[Transition], target_net: Mlp, gamma: float) -> np.ndarray:
    b = as_batch(batch)
    q_next = forward(target_net, b.s_next).max(axis=1)
    return b.r + np.where(b.done, 0.0, gamma * q_next)


class ReplayBuffer:
    """Bounded FIFO of transitions; sampling is uniform with replacement.

    Storage is a set of preallocated ring arrays sized on the first push.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._size = 0
        self._next = 0  # slot written by the next push (the oldest entry once full)
        self._store: Batch | None = None

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        if self._store is None:
            width = len(t.s)
            self._store = Batch(
                np.zeros((self.capacity, width)),
                np.zeros(self.capacity, dtype=int),
                np.zeros(self.capacity),
                np.zeros((self.capacity, width)),
                np.zeros(self.capacity, dtype=bool),
            )
        i = self._next
        st = self._store
        st.s[i] = t.s
        st.a[i] = t.a
        st.r[i] = t.r
        st.s_next[i] = t.s_next
        st.done[i] = t.done
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _slots(self) -> np.ndarray:
        """Occupied slots, oldest first."""
        if self._size < self.capacity:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def _take(self, idx: np.ndarray) -> Batch:
        st = self._store
        return Batch(st.s[idx], st.a[idx], st.r[idx], st.s_next[idx], st.done[idx])

    def contents(self) -> list[Transition]:
        if self._store is None:
            return []
        b = self._take(self._slots())
        return [Transition(b.s[i], int(b.a[i]), float(b.r[i]), b.s_next[i], bool(b.done[i])) for i in range(len(b.a))]

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self._size < batch_size:
            raise ValueError(f"buffer holds {self._size} transitions, need {batch_size}")
        # slot order equals age order only modulo rotation; uniform sampling doesn't care
        return self._take(rng.integers(0, self._size, size=batch_size))

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        b = self.sample_batch(batch_size, rng)
        return [Transition(b.s[i], int(b.a[i]), float(b.r[i]), b.s_next[i], bool(b.done[i])) for i in range(batch_size)]


# Weight snapshot: {"format": "nuitsim-mlp/1", "sizes": [...],
#  "layers": [{"weights": [[...row-major...]], "bias": [...]}, ...]}
SNAPSHOT_FORMAT = "nuitsim-mlp/1"


def save_weights(net: Mlp, path) -> None:
    doc = {
        "format": SNAPSHOT_FORMAT,
        "sizes": net.sizes,
        "layers": [{"weights": w.tolist(), "bias": b.tolist()} for w, b in zip(net.weights, net.biases)],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_weights(path) -> Mlp:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"{path}: not a {SNAPSHOT_FORMAT} snapshot")
    net = Mlp([np.array(l["weights"], dtype=float) for l in doc["layers"]],
              [np.array(l["bias"], dtype=float) for l in doc["layers"]])
    if net.sizes != doc["sizes"]:
        raise ValueError(f"{path}: layer sizes {net.sizes} disagree with header {doc['sizes']}")
    return net
