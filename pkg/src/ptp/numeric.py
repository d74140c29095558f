"""Differentiable primitives, parameter stores and optimizers (float64 numpy)."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "tanh", "log_softmax", "identity")


def derive_seed(seed: int, name: str) -> int:
    """Stable per-component seed from the experiment seed and a component name."""
    digest = hashlib.sha256(f"{int(seed)}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------

def matmul(a, b) -> np.ndarray:
    a, b = as_array(a), as_array(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return a @ b


def matmul_backward(a, b, grad):
    """Return (dA, dB) for C = A @ B given dC."""
    a, b, grad = as_array(a), as_array(b), as_array(grad)
    if grad.shape != (a.shape[0], b.shape[1]):
        raise ValueError(f"upstream gradient {grad.shape} does not match output "
                         f"{(a.shape[0], b.shape[1])}")
    return grad @ b.T, a.T @ grad


def log_softmax(x) -> np.ndarray:
    x = as_array(x)
    if x.ndim != 2:
        raise ValueError(f"log_softmax expects a rank-2 array, got shape {x.shape}")
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def activation(x, kind: str) -> np.ndarray:
    x = as_array(x)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        # split by sign to avoid overflow in exp
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out
    if kind == "tanh":
        return np.tanh(x)
    if kind in ("log_softmax", "log_softmax_rowwise"):
        return log_softmax(x)
    if kind == "identity":
        return x.copy()
    raise ValueError(f"unknown activation {kind!r}; choose from {ACTIVATIONS}")


def activation_backward(kind: str, x, y, grad) -> np.ndarray:
    """Gradient w.r.t. the input of ``y = activation(x, kind)``."""
    x, y, grad = as_array(x), as_array(y), as_array(grad)
    if grad.shape != y.shape:
        raise ValueError(f"upstream gradient {grad.shape} does not match output {y.shape}")
    if kind == "relu":
        return grad * (x > 0)
    if kind == "sigmoid":
        return grad * y * (1.0 - y)
    if kind == "tanh":
        return grad * (1.0 - y * y)
    if kind in ("log_softmax", "log_softmax_rowwise"):
        return grad - np.exp(y) * grad.sum(axis=1, keepdims=True)
    if kind == "identity":
        return grad.copy()
    raise ValueError(f"unknown activation {kind!r}")


def dropout(x, p: float, mode: str, rng: np.random.Generator):
    """Inverted dropout. Returns ``(output, mask)``; mask is None when inactive."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    x = as_array(x)
    if mode == "eval" or p == 0.0:
        return x, None
    if mode != "train":
        raise ValueError(f"unknown dropout mode {mode!r}")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(mask, grad) -> np.ndarray:
    grad = as_array(grad)
    return grad if mask is None else grad * mask


def grad_of(primitive: str, inputs: tuple, upstream_grad, **kwargs):
    """Dispatch to the reverse rule of a primitive.

    ``inputs`` are the forward inputs; returns a tuple with one gradient per input.
    """
    if primitive == "matmul":
        return matmul_backward(*inputs, upstream_grad)
    if primitive in ACTIVATIONS or primitive == "log_softmax_rowwise":
        (x,) = inputs
        y = kwargs.get("output")
        if y is None:
            y = activation(x, primitive)
        return (activation_backward(primitive, x, y, upstream_grad),)
    if primitive == "dropout":
        return (dropout_backward(kwargs.get("mask"), upstream_grad),)
    raise ValueError(f"no reverse rule for {primitive!r}")


# ---------------------------------------------------------------------------
# Parameters and optimizers
# ---------------------------------------------------------------------------

class ParameterStore:
    """Named trainable arrays with matching gradient buffers."""

    def __init__(self, frozen: bool = False):
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.frozen = frozen

    def add(self, name: str, value) -> np.ndarray:
        value = np.array(value, dtype=np.float64)
        self.values[name] = value
        self.grads[name] = np.zeros_like(value)
        return value

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def accumulate(self, name: str, grad) -> None:
        if self.frozen:
            return
        grad = as_array(grad)
        if grad.shape != self.values[name].shape:
            raise ValueError(f"gradient for {name!r} has shape {grad.shape}, "
                             f"parameter has {self.values[name].shape}")
        self.grads[name] += grad

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def assign(self, name: str, value) -> None:
        value = as_array(value)
        if value.shape != self.values[name].shape:
            raise ValueError(f"parameter {name!r}: shape {value.shape} does not match "
                             f"{self.values[name].shape}")
        self.values[name][...] = value

    def num_parameters(self) -> int:
        return sum(v.size for v in self.values.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.values.items()}


@dataclass
class Optimizer:
    kind: str = "sgd"
    lr: float = 0.1
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    # state[store_name][param_name] -> {"velocity" | "m" | "v": array, "t": int}
    state: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.momentum < 0:
            raise ValueError("momentum must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or not self.epsilon > 0:
            raise ValueError("invalid Adam constants")

    @classmethod
    def from_config(cls, cfg: dict) -> "Optimizer":
        cfg = dict(cfg or {})
        kind = cfg.pop("type", "sgd")
        return cls(kind=kind, **{k: float(v) for k, v in cfg.items()})

    def step(self, stores: dict[str, ParameterStore]) -> None:
        update = sgd_step if self.kind == "sgd" else adam_step
        for name in sorted(stores):
            update(stores[name], self, name)

    def state_dict(self) -> dict:
        return {store: {param: dict(buf) for param, buf in params.items()}
                for store, params in self.state.items()}

    def load_state_dict(self, state: dict) -> None:
        self.state = {store: {param: {k: (v.copy() if isinstance(v, np.ndarray) else v)
                                      for k, v in buf.items()}
                              for param, buf in params.items()}
                      for store, params in state.items()}


def sgd_step(store: ParameterStore, opt: Optimizer, store_name: str = "") -> None:
    if not store.frozen:
        buffers = opt.state.setdefault(store_name, {})
        for name, value in store.values.items():
            buf = buffers.setdefault(name, {"velocity": np.zeros_like(value)})
            buf["velocity"] = opt.momentum * buf["velocity"] + store.grads[name]
            value -= opt.lr * buf["velocity"]
    store.zero_grad()


def adam_step(store: ParameterStore, opt: Optimizer, store_name: str = "") -> None:
    if not store.frozen:
        buffers = opt.state.setdefault(store_name, {})
        for name, value in store.values.items():
            buf = buffers.setdefault(
                name, {"m": np.zeros_like(value), "v": np.zeros_like(value), "t": 0})
            g = store.grads[name]
            buf["t"] += 1
            buf["m"] = opt.beta1 * buf["m"] + (1.0 - opt.beta1) * g
            buf["v"] = opt.beta2 * buf["v"] + (1.0 - opt.beta2) * g * g
            m_hat = buf["m"] / (1.0 - opt.beta1 ** buf["t"])
            v_hat = buf["v"] / (1.0 - opt.beta2 ** buf["t"])
            value -= opt.lr * m_hat / (np.sqrt(v_hat) + opt.epsilon)
    store.zero_grad()
