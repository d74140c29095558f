from __future__ import annotations

import numpy as np

from ptp.components.base import Model, register
from ptp.config import ConfigurationError
from ptp.numeric import ACTIVATIONS, activation, activation_backward, dropout, dropout_backward
from ptp.streams import ANY, BATCH, numeric


@register("feed_forward")
class FeedForward(Model):
    """Stack of fully connected layers.

    Hidden layers apply ``activation`` followed by dropout; the last layer
    applies ``final_activation`` (log-probabilities by default). Sizes not
    given as parameters are read from the ``input_size`` and ``num_classes``
    globals.
    """

    defaults = {
        "hidden_sizes": [],
        "activation": "relu",
        "final_activation": "log_softmax",
        "dropout": 0.0,
        "input_size": None,
        "prediction_size": None,
    }

    def __init__(self, config, seed=1337, workdir=None):
        super().__init__(config, seed, workdir)
        self.input_size = self.params.get("input_size")
        self.prediction_size = self.params.get("prediction_size")
        for key in ("activation", "final_activation"):
            if self.params[key] not in ACTIVATIONS:
                raise ConfigurationError(f"{self.name}: unknown {key} {self.params[key]!r}")
        self.p_drop = float(self.params["dropout"])
        if not 0.0 <= self.p_drop < 1.0:
            raise ConfigurationError(f"{self.name}: dropout must be in [0, 1)")
        self._cache = None

    def _size(self, globals_, explicit, global_key):
        if explicit is not None:
            return int(explicit)
        if not self.has_global(globals_, global_key):
            raise ConfigurationError(
                f"{self.name}: size unresolvable; set it in the config or publish global "
                f"{self.config.global_key(global_key)!r}")
        return int(self.get_global(globals_, global_key))

    def initialize(self, globals_):
        self.input_size = self._size(globals_, self.params.get("input_size"), "input_size")
        self.prediction_size = self._size(globals_, self.params.get("prediction_size"), "num_classes")
        sizes = [self.input_size, *[int(h) for h in self.params["hidden_sizes"]], self.prediction_size]
        if min(sizes) < 1:
            raise ConfigurationError(f"{self.name}: layer sizes must be positive, got {sizes}")
        self.sizes = sizes
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            self.store.add(f"layers.{i}.weight", self.rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.store.add(f"layers.{i}.bias", self.rng.uniform(-bound, bound, fan_out))

    @property
    def num_layers(self) -> int:
        return len(self.sizes) - 1

    def input_definitions(self):
        return {"inputs": numeric(BATCH, self.input_size or ANY)}

    def output_definitions(self):
        return {"predictions": numeric(BATCH, self.prediction_size or ANY)}

    def execute(self, batch):
        h = batch[self.stream("inputs")]
        cache = []
        for i in range(self.num_layers):
            w, b = self.store[f"layers.{i}.weight"], self.store[f"layers.{i}.bias"]
            z = h @ w + b
            last = i == self.num_layers - 1
            kind = self.params["final_activation"] if last else self.params["activation"]
            a = activation(z, kind)
            mask = None
            if not last:
                a, mask = dropout(a, self.p_drop, "train" if self.training else "eval", self.rng)
            cache.append((h, z, a, kind, mask))
            h = a
        self._cache = cache
        batch.add(self.stream("predictions"), h)

    def backward(self, batch, grads):
        g = grads.get(self.stream("predictions"))
        if g is None:
            return
        for i in reversed(range(self.num_layers)):
            h, z, a, kind, mask = self._cache[i]
            g = dropout_backward(mask, g)
            # dropout output a = act(z) * mask; recover the activation output for the rule
            act_out = activation(z, kind) if mask is not None else a
            g = activation_backward(kind, z, act_out, g)
            w = self.store[f"layers.{i}.weight"]
            self.store.accumulate(f"layers.{i}.weight", h.T @ g)
            self.store.accumulate(f"layers.{i}.bias", g.sum(axis=0))
            g = g @ w.T
        inputs = self.stream("inputs")
        grads.add(inputs, g, like=batch[inputs])
