"""Building, handshaking and executing pipelines of components.

Components run in ascending priority during :meth:`Pipeline.forward` and
in descending priority during :meth:`Pipeline.backward`. Because every
input must be produced by the task or by a lower-priority component, the
stream graph is acyclic by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping

from ptp.components import REGISTRY, Component, Loss, Model, Task, create_component
from ptp.config import SECTIONS, ConfigurationError, GlobalParams, get_path
from ptp.streams import Batch, GradTable, definition_satisfies, validate_batch

logger = logging.getLogger(__name__)


class ComponentExecutionError(RuntimeError):
    def __init__(self, component: Component, message: str):
        super().__init__(f"{component.name} (priority {component.priority}): {message}")
        self.component = component


class NonFiniteLossError(FloatingPointError):
    def __init__(self, loss_name: str, value: float):
        super().__init__(f"loss {loss_name!r} is not finite: {value}")
        self.loss_name = loss_name
        self.value = value


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # missing-stream | incompatible-definition | collision | initialization
    component: str
    stream: str | None
    priority: float | None
    message: str

    def __str__(self):
        where = f"{self.component} (priority {self.priority})"
        return f"[{self.kind}] {where}: {self.message}"


class Pipeline:
    def __init__(self, components: list[Component], tasks: Mapping[str, Task],
                 validate_batches: bool = False):
        self.components = sorted(components, key=lambda c: c.priority)
        self.tasks = dict(tasks)
        self.sections = tuple(self.tasks)
        self.validate_batches = validate_batches
        self.globals = GlobalParams()
        self.init_diagnostics: list[Diagnostic] = []

    # structure --------------------------------------------------------------
    @property
    def primary_section(self) -> str:
        return self.sections[0]

    def active(self, section: str | None = None) -> list[Component]:
        section = section or self.primary_section
        return [c for c in self.components if not c.is_disabled(section)]

    @property
    def models(self) -> dict[str, Model]:
        return {c.name: c for c in self.components if isinstance(c, Model)}

    @property
    def losses(self) -> list[Loss]:
        return [c for c in self.components if isinstance(c, Loss)]

    def component(self, name: str) -> Component:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)

    def stores(self):
        return {name: m.store for name, m in self.models.items()}

    def train(self) -> None:
        for c in [*self.components, *self.tasks.values()]:
            c.train()

    def eval(self) -> None:
        for c in [*self.components, *self.tasks.values()]:
            c.eval()

    # initialization -----------------------------------------------------------
    def initialize(self, globals_: GlobalParams | None = None) -> None:
        """Initialize tasks, then components in priority order.

        Component-level configuration problems are recorded as diagnostics
        (reported by :meth:`handshake`) rather than raised.
        """
        if globals_ is not None:
            self.globals = globals_
        for task in self.tasks.values():
            task.initialize(self.globals)
        primary = self.tasks[self.primary_section]
        for comp in self.components:
            try:
                if hasattr(comp, "fit"):
                    comp.fit(primary)
                comp.initialize(self.globals)
            except (ConfigurationError, KeyError) as exc:
                self.init_diagnostics.append(Diagnostic(
                    "initialization", comp.name, None, comp.priority, str(exc).strip("'\"")))
        self.globals.freeze()

    def handshake(self, section: str | None = None) -> list[Diagnostic]:
        """Check that every input stream is produced earlier with a compatible definition.

        Returns all problems found; an empty list means the pipeline is wired correctly.
        """
        section = section or self.primary_section
        task = self.tasks[section]
        active = self.active(section)
        active_names = {c.name for c in active}
        diagnostics = [d for d in self.init_diagnostics if d.component in active_names]
        table = {name: (d, task.name) for name, d in task.remapped_outputs().items()}
        for comp in active:
            for name, required in comp.remapped_inputs().items():
                if name not in table:
                    diagnostics.append(Diagnostic(
                        "missing-stream", comp.name, name, comp.priority,
                        f"input stream {name!r} is not produced by the task or any "
                        f"component with lower priority"))
                    continue
                produced, producer = table[name]
                if not definition_satisfies(produced, required):
                    diagnostics.append(Diagnostic(
                        "incompatible-definition", comp.name, name, comp.priority,
                        f"stream {name!r} from {producer} is {produced}, but {required} is required"))
            for name, produced in comp.remapped_outputs().items():
                if name in table:
                    diagnostics.append(Diagnostic(
                        "collision", comp.name, name, comp.priority,
                        f"stream {name!r} is produced by both {table[name][1]} and {comp.name}"))
                else:
                    table[name] = (produced, comp.name)
        return diagnostics

    # execution ----------------------------------------------------------------
    def forward(self, batch: Batch, section: str | None = None) -> Batch:
        """Run active components on a copy of ``batch`` and return the extended batch."""
        out = batch.copy()
        for comp in self.active(section):
            try:
                comp.execute(out)
            except Exception as exc:
                raise ComponentExecutionError(comp, f"{type(exc).__name__}: {exc}") from exc
            if self.validate_batches:
                outputs = comp.remapped_outputs()
                violations = validate_batch(out, outputs) if outputs else []
                if violations:
                    raise ComponentExecutionError(comp, "; ".join(violations))
        return out

    def loss_weight(self, loss: Loss, loss_weights: Mapping[str, float] | None) -> float:
        if loss_weights and loss.name in loss_weights:
            return float(loss_weights[loss.name])
        return loss.weight

    def total_loss(self, batch: Batch, section: str | None = None,
                   loss_weights: Mapping[str, float] | None = None) -> float:
        return sum(self.loss_weight(l, loss_weights) * l.loss_value(batch)
                   for l in self.active(section) if isinstance(l, Loss))

    def backward(self, batch: Batch, loss_weights: Mapping[str, float] | None = None,
                 section: str | None = None) -> GradTable:
        """Back-propagate weighted loss gradients through differentiable components.

        Parameter gradients are accumulated into the models' stores (frozen
        stores ignore them); stream gradients are returned.
        """
        active = self.active(section)
        losses = [c for c in active if isinstance(c, Loss)]
        if not losses:
            raise ValueError("pipeline has no active loss to back-propagate from")
        grads = GradTable()
        for loss in losses:
            value = loss.loss_value(batch)
            if not math.isfinite(value):
                raise NonFiniteLossError(loss.name, value)
            weight = self.loss_weight(loss, loss_weights)
            for stream, g in loss.loss_gradients(batch).items():
                grads.add(stream, weight * g, like=batch[stream])
        for comp in reversed(active):
            if isinstance(comp, Loss) or not comp.differentiable:
                continue
            if not any(name in grads for name in comp.remapped_outputs()):
                continue
            comp.backward(batch, grads)
        return grads

    def collect_statistics(self, batch: Batch, collector, section: str | None = None) -> None:
        for comp in self.active(section):
            comp.collect_statistics(batch, collector)


def build_pipeline(config: Mapping, factory: Mapping | None = None, section="training", *,
                   seed: int = 1337, workdir=None, initialize: bool = True) -> Pipeline:
    """Instantiate tasks and components described by ``config``.

    ``section`` is a section name or a sequence of them; the first one is
    the primary section. Components disabled for every requested section are
    left out. With ``initialize`` the pipeline is also initialized (globals
    published and read), ready for :meth:`Pipeline.handshake`.
    """
    factory = REGISTRY if factory is None else factory
    sections = (section,) if isinstance(section, str) else tuple(section)
    if not sections:
        raise ConfigurationError("at least one section is required")
    tasks = {}
    for sec in sections:
        if sec not in SECTIONS:
            raise ConfigurationError(f"unknown section {sec!r}; expected one of {SECTIONS}")
        task_section = get_path(config, f"{sec}.task", None)
        if not isinstance(task_section, Mapping):
            raise ConfigurationError(f"configuration has no '{sec}.task' section")
        task = create_component(f"{sec}.task", dict(task_section), factory, seed=seed,
                                workdir=workdir, require_priority=False)
        if not isinstance(task, Task):
            raise ConfigurationError(f"'{sec}.task' has type {task.type_id!r}, which is not a task")
        tasks[sec] = task

    pipeline_section = config.get("pipeline") or {}
    if not isinstance(pipeline_section, Mapping):
        raise ConfigurationError("'pipeline' must be a map of component name -> section")
    components = []
    for name, comp_section in pipeline_section.items():
        comp = create_component(str(name), comp_section, factory, seed=seed, workdir=workdir)
        if isinstance(comp, Task):
            raise ConfigurationError(f"task {name!r} cannot be placed inside the pipeline")
        if all(comp.is_disabled(sec) for sec in sections):
            logger.debug("component %s disabled for %s", name, ", ".join(sections))
            continue
        components.append(comp)

    by_priority: dict[float, str] = {}
    for comp in components:
        if comp.priority in by_priority:
            raise ConfigurationError(
                f"components {by_priority[comp.priority]!r} and {comp.name!r} share priority "
                f"{comp.priority}")
        by_priority[comp.priority] = comp.name

    validate = bool(get_path(config, f"{sections[0]}.validate_batches", False))
    pipeline = Pipeline(components, tasks, validate_batches=validate)
    if initialize:
        pipeline.initialize()
    return pipeline
