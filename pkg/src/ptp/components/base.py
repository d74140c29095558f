"""Component base classes and the type registry."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterator

import numpy as np

from ptp.config import ComponentConfig, ConfigurationError, GlobalParams, resolve_component_config
from ptp.numeric import ParameterStore, derive_seed
from ptp.streams import Batch, GradTable, StreamDefinition

REGISTRY: dict[str, type["Component"]] = {}


def register(type_id: str):
    """Class decorator adding a component type to :data:`REGISTRY`."""
    def wrap(cls):
        if type_id in REGISTRY:
            raise ValueError(f"component type {type_id!r} registered twice")
        cls.type_id = type_id
        REGISTRY[type_id] = cls
        return cls
    return wrap


def default_params(type_id: str, factory=None) -> dict:
    factory = REGISTRY if factory is None else factory
    return dict(factory[type_id].defaults)


def create_component(name: str, section: dict, factory=None, *, seed: int = 1337,
                     workdir=None, require_priority: bool = True) -> "Component":
    factory = REGISTRY if factory is None else factory
    type_id = section.get("type") if isinstance(section, dict) else None
    if type_id not in factory:
        raise ConfigurationError(
            f"component {name!r}: unknown type {type_id!r} (known: {', '.join(sorted(factory))})")
    cls = factory[type_id]
    config = resolve_component_config(cls.defaults, section, name, require_priority)
    return cls(config, seed=seed, workdir=workdir)


class Component:
    """A pipeline node reading named input streams and adding output streams.

    Subclasses declare ``defaults`` (their complete parameter set) and
    implement :meth:`input_definitions`, :meth:`output_definitions` and
    :meth:`execute`. Stream and global names used inside a component are
    the *default* names; the config's ``streams:``/``globals:`` tables map
    them to the names actually used in the pipeline.
    """

    type_id = "component"
    role = "component"
    defaults: dict = {}
    differentiable = False

    def __init__(self, config: ComponentConfig, seed: int = 1337, workdir=None):
        self.config = config
        self.name = config.name
        self.priority = config.priority
        self.params = config.params
        self.seed = derive_seed(seed, config.name)
        self.rng = np.random.default_rng(self.seed)
        self.workdir = Path(workdir) if workdir is not None else None
        self.training = True

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, priority={self.priority})"

    # naming -----------------------------------------------------------------
    def stream(self, default: str) -> str:
        return self.config.stream(default)

    def get_global(self, globals_: GlobalParams, key: str):
        return globals_.get(self.config.global_key(key), reader=self.name)

    def has_global(self, globals_: GlobalParams, key: str) -> bool:
        return self.config.global_key(key) in globals_

    def publish_global(self, globals_: GlobalParams, key: str, value) -> None:
        globals_.publish(self.config.global_key(key), value, self.name)

    def is_disabled(self, section: str) -> bool:
        return section in self.config.disable

    # lifecycle --------------------------------------------------------------
    def initialize(self, globals_: GlobalParams) -> None:
        """Read/publish globals and set up internal state."""

    def input_definitions(self) -> dict[str, StreamDefinition]:
        return {}

    def output_definitions(self) -> dict[str, StreamDefinition]:
        return {}

    def remapped_inputs(self) -> dict[str, StreamDefinition]:
        return {self.stream(k): d for k, d in self.input_definitions().items()}

    def remapped_outputs(self) -> dict[str, StreamDefinition]:
        return {self.stream(k): d for k, d in self.output_definitions().items()}

    def execute(self, batch: Batch) -> None:
        raise NotImplementedError

    def backward(self, batch: Batch, grads: GradTable) -> None:
        raise NotImplementedError(f"{self.name} is not differentiable")

    def collect_statistics(self, batch: Batch, collector) -> None:
        pass

    def train(self) -> None:
        self.training = True

    def eval(self) -> None:
        self.training = False


class Model(Component):
    """Component owning trainable parameters."""

    role = "model"
    differentiable = True

    def __init__(self, config: ComponentConfig, seed: int = 1337, workdir=None):
        super().__init__(config, seed, workdir)
        self.store = ParameterStore(frozen=config.frozen)

    def freeze(self) -> None:
        self.store.frozen = True

    def unfreeze(self) -> None:
        self.store.frozen = False


class Loss(Component):
    """Component producing a scalar ``loss`` stream plus its input gradients."""

    role = "loss"

    @property
    def weight(self) -> float:
        return float(self.params.get("weight", 1.0))

    def output_definitions(self):
        from ptp.streams import scalar
        return {"loss": scalar("mean loss over the batch")}

    def loss_value(self, batch: Batch) -> float:
        return float(batch[self.stream("loss")])

    def loss_gradients(self, batch: Batch) -> dict[str, np.ndarray]:
        """Gradients of this batch's loss w.r.t. its (remapped) input streams."""
        raise NotImplementedError

    def collect_statistics(self, batch: Batch, collector) -> None:
        key = self.params.get("statistic")
        if key:
            collector.collect(key, self.loss_value(batch), batch.batch_size)


class Task(Component):
    """Feeds batches into a pipeline; not executed by the pipeline itself.

    Subclasses fill ``self.data`` (default stream name -> full-dataset value)
    in :meth:`initialize`.
    """

    role = "task"
    task_defaults = {"batch_size": 32, "sampler": "sequential", "weights": None, "seed": None}

    def __init__(self, config: ComponentConfig, seed: int = 1337, workdir=None):
        super().__init__(config, seed, workdir)
        if self.params.get("seed") is not None:
            self.seed = int(self.params["seed"])
            self.rng = np.random.default_rng(self.seed)
        self.data: dict = {}
        self.batch_size = int(self.params["batch_size"])
        if self.batch_size < 1:
            raise ConfigurationError(f"{self.name}: batch_size must be positive")
        self.sampler = self.params["sampler"]
        if self.sampler not in ("sequential", "shuffled", "weighted"):
            raise ConfigurationError(f"{self.name}: unknown sampler {self.sampler!r}")

    def __len__(self) -> int:
        first = next(iter(self.data.values()), ())
        return len(first)

    def num_batches(self) -> int:
        return math.ceil(len(self) / self.batch_size)

    def epoch_order(self, epoch: int) -> np.ndarray:
        n = len(self)
        if self.sampler == "sequential":
            return np.arange(n)
        rng = np.random.default_rng([self.seed & 0xFFFFFFFF, epoch])
        if self.sampler == "shuffled":
            return rng.permutation(n)
        weights = self.params.get("weights")
        if weights is None or len(weights) != n:
            raise ConfigurationError(f"{self.name}: weighted sampler needs {n} weights")
        p = np.asarray(weights, dtype=np.float64)
        if (p < 0).any() or p.sum() <= 0:
            raise ConfigurationError(f"{self.name}: weights must be non-negative, not all zero")
        return rng.choice(n, size=n, replace=True, p=p / p.sum())

    def stream_values(self, actual_name: str):
        """Full-dataset values of an (actual-named) output stream."""
        for default, value in self.data.items():
            if self.stream(default) == actual_name:
                return value
        raise KeyError(f"{self.name} does not produce stream {actual_name!r}")

    def make_batch(self, indices) -> Batch:
        indices = np.asarray(indices, dtype=np.int64)
        batch = Batch(batch_size=len(indices), sample_indices=indices)
        for default, value in self.data.items():
            if isinstance(value, np.ndarray):
                batch.add(self.stream(default), value[indices])
            else:
                batch.add(self.stream(default), [value[i] for i in indices])
        return batch

    def batches(self, epoch: int = 0) -> Iterator[Batch]:
        order = self.epoch_order(epoch)
        for start in range(0, len(order), self.batch_size):
            yield self.make_batch(order[start:start + self.batch_size])

    def execute(self, batch: Batch) -> None:
        raise RuntimeError("tasks feed the pipeline and are not executed by it")
