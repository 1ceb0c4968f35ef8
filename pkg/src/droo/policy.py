"""Fully connected ReLU/sigmoid policy network, Adam, and the replay memory."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from droo import rng as rngmod
from droo.errors import DomainError

LOG_CLAMP = 1e-12
# the same clamp expressed on the output logit
LOGIT_CLAMP = float(np.log1p(-LOG_CLAMP) - np.log(LOG_CLAMP))
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    train_interval: int = 10
    memory_size: int = 1024
    learning_rate: float = 0.01
    input_scale: float = 1e6
    with_replacement: bool = True

    def __post_init__(self):
        if not (1 <= self.batch_size <= self.memory_size):
            raise DomainError("batch_size must lie in [1, memory_size]")
        if self.train_interval < 1:
            raise DomainError("train_interval must be >= 1")
        if self.input_scale <= 0:
            raise DomainError("input_scale must be positive")
        if self.learning_rate < 0:
            raise DomainError("learning_rate must be non-negative")


class ReplayMemory:
    """Fixed-capacity ring of (scaled channel, best action) pairs."""

    def __init__(self, capacity: int, n: int):
        if capacity < 1:
            raise DomainError("capacity must be >= 1")
        self.capacity = capacity
        self.h = np.zeros((capacity, n))
        self.x = np.zeros((capacity, n))
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, h_scaled, x):
        self.h[self.cursor] = h_scaled
        self.x[self.cursor] = x
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def contents(self):
        """Stored pairs, oldest first."""
        if self.size < self.capacity:
            idx = np.arange(self.size)
        else:
            idx = (np.arange(self.capacity) + self.cursor) % self.capacity
        return self.h[idx], self.x[idx]

    def sample(self, batch_size: int, gen: np.random.Generator, replace: bool = True):
        if replace:
            idx = gen.integers(0, self.size, batch_size)
        else:
            idx = gen.choice(self.size, size=batch_size, replace=False)
        return self.h[idx], self.x[idx]


class PolicyNet:
    """MLP h -> x_hat with ReLU hidden layers and a sigmoid output layer.

    Weights are stored as (fan_in, fan_out) matrices so a batch of inputs
    (rows) propagates as ``act @ W + b``.
    """

    def __init__(self, layer_dims, weights, biases, learning_rate=0.01, adam=None, step=0):
        self.layer_dims = [int(d) for d in layer_dims]
        self.weights = [np.asarray(w, float) for w in weights]
        self.biases = [np.asarray(b, float) for b in biases]
        for (fi, fo), w, b in zip(zip(self.layer_dims[:-1], self.layer_dims[1:]), self.weights, self.biases):
            if w.shape != (fi, fo) or b.shape != (fo,):
                raise DomainError("parameter shapes do not match layer_dims")
        if len(self.weights) != len(self.layer_dims) - 1:
            raise DomainError("one weight matrix per layer transition is required")
        self.learning_rate = float(learning_rate)
        if adam is None:
            adam = {
                "m_w": [np.zeros_like(w) for w in self.weights],
                "m_b": [np.zeros_like(b) for b in self.biases],
                "v_w": [np.zeros_like(w) for w in self.weights],
                "v_b": [np.zeros_like(b) for b in self.biases],
            }
        self.adam = {k: [np.asarray(a, float) for a in v] for k, v in adam.items()}
        self.step = int(step)

    @classmethod
    def init(cls, layer_dims, seed: int, learning_rate: float = 0.01) -> PolicyNet:
        """He-normal weights (std sqrt(2 / fan_in)), zero biases, fresh Adam state."""
        if len(layer_dims) < 2 or min(layer_dims) < 1:
            raise DomainError(f"invalid layer_dims {layer_dims}")
        gen = rngmod.stream(seed, rngmod.NET_INIT)
        weights, biases = [], []
        for fi, fo in zip(layer_dims[:-1], layer_dims[1:]):
            weights.append(gen.normal(0.0, np.sqrt(2.0 / fi), size=(fi, fo)))
            biases.append(np.zeros(fo))
        return cls(layer_dims, weights, biases, learning_rate)

    @property
    def n_out(self) -> int:
        return self.layer_dims[-1]

    def _propagate(self, H):
        acts = [H]
        pre = []
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            pre.append(z)
            acts.append(np.maximum(z, 0.0) if l < len(self.weights) - 1 else expit(z))
        return pre, acts

    def forward(self, h_scaled):
        h = np.asarray(h_scaled, float)
        if h.shape[-1] != self.layer_dims[0]:
            raise DomainError(f"input must have {self.layer_dims[0]} features, got {h.shape[-1]}")
        out = self._propagate(np.atleast_2d(h))[1][-1]
        # saturated sigmoids round to exactly 0 or 1 in float64
        out = np.clip(out, LOG_CLAMP, 1.0 - LOG_CLAMP)
        return out[0] if h.ndim == 1 else out

    @staticmethod
    def _bce(logits, Y):
        # -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z, evaluated without forming 1 - s(z)
        z = np.clip(logits, -LOGIT_CLAMP, LOGIT_CLAMP)
        return float(np.sum(np.logaddexp(0.0, z) - Y * z) / len(Y))

    def loss(self, H, Y) -> float:
        """Batch-averaged cross-entropy, summed over devices (natural log)."""
        H, Y = np.atleast_2d(H), np.atleast_2d(Y)
        if len(H) == 0:
            raise DomainError("loss of an empty batch")
        return self._bce(self._propagate(H)[0][-1], Y)

    def gradients(self, H, Y):
        """(loss, weight grads, bias grads) by backpropagation."""
        H, Y = np.atleast_2d(np.asarray(H, float)), np.atleast_2d(np.asarray(Y, float))
        if len(H) == 0:
            raise DomainError("gradient of an empty batch")
        pre, acts = self._propagate(H)
        loss = self._bce(pre[-1], Y)
        delta = (acts[-1] - Y) / len(H)
        gw = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for l in range(len(self.weights) - 1, -1, -1):
            gw[l] = acts[l].T @ delta
            gb[l] = delta.sum(axis=0)
            if l > 0:
                delta = (delta @ self.weights[l].T) * (pre[l - 1] > 0)
        return loss, gw, gb

    def apply_adam(self, gw, gb):
        self.step += 1
        t = self.step
        c1 = 1.0 - ADAM_BETA1**t
        c2 = 1.0 - ADAM_BETA2**t
        for params, grads, mk, vk in ((self.weights, gw, "m_w", "v_w"), (self.biases, gb, "m_b", "v_b")):
            for i, g in enumerate(grads):
                m = self.adam[mk][i]
                v = self.adam[vk][i]
                m *= ADAM_BETA1
                m += (1.0 - ADAM_BETA1) * g
                v *= ADAM_BETA2
                v += (1.0 - ADAM_BETA2) * g * g
                params[i] = params[i] - self.learning_rate * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)

    def fit_batch(self, H, Y) -> float:
        """One Adam update on (H, Y); returns the loss before the update."""
        loss, gw, gb = self.gradients(H, Y)
        self.apply_adam(gw, gb)
        return loss

    # --- parameter vector view (finite-difference checks) -------------------

    def flat_params(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def set_flat_params(self, theta):
        theta = np.asarray(theta, float)
        pos = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = theta[pos : pos + w.size].reshape(w.shape)
            pos += w.size
            self.biases[i] = theta[pos : pos + b.size].copy()
            pos += b.size

    @staticmethod
    def flat_grads(gw, gb) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(gw, gb) for a in pair])

    # --- snapshots -------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "layer_dims": self.layer_dims,
            "learning_rate": self.learning_rate,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "adam_state": {k: [a.tolist() for a in v] for k, v in self.adam.items()},
            "step": self.step,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PolicyNet:
        return cls(d["layer_dims"], d["weights"], d["biases"], d["learning_rate"], d["adam_state"], d["step"])

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> PolicyNet:
        return cls.from_dict(json.loads(Path(path).read_text()))


def train_step(net: PolicyNet, memory: ReplayMemory, cfg: TrainConfig, gen: np.random.Generator):
    """Sample a batch from memory and take one Adam step.

    Returns the pre-update loss, or None when the memory does not yet hold a
    full batch.
    """
    if len(memory) < cfg.batch_size:
        return None
    H, Y = memory.sample(cfg.batch_size, gen, replace=cfg.with_replacement)
    return net.fit_batch(H, Y)
