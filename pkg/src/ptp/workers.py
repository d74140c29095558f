"""Pipeline-agnostic workers: offline trainer, online trainer and processor.

A worker loads configuration, creates an experiment directory, builds and
handshakes the pipeline, then drives it. Exit codes: 0 success, 1
configuration or handshake problem, 2 numeric failure during execution.
"""

from __future__ import annotations

import logging
import math
import queue
import sys
import threading
from datetime import datetime
from pathlib import Path

from ptp.checkpoint import CheckpointError, TrainingStatus, load_configured, save_checkpoint, track_best
from ptp.config import (
    ConfigurationError, apply_overrides, dump_config, get_path, load_config, merge,
)
from ptp.numeric import Optimizer
from ptp.pipeline import ComponentExecutionError, NonFiniteLossError, build_pipeline
from ptp.statistics import CsvStatisticsExporter, StatisticsCollector

logger = logging.getLogger(__name__)

DEFAULT_SEED = 1337
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


class HandshakeError(ConfigurationError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "\n".join(f"  {d}" for d in self.diagnostics)
        super().__init__(f"handshake failed with {len(self.diagnostics)} problem(s):\n{lines}")


def new_experiment_dir(root) -> Path:
    root = Path(root)
    stamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    path, n = root / stamp, 1
    while path.exists():
        path = root / f"{stamp}_{n}"
        n += 1
    path.mkdir(parents=True)
    return path


class Prefetcher:
    """Fill a bounded queue of batches from a background thread.

    With ``size == 0`` iteration is synchronous.
    """

    _DONE = object()

    def __init__(self, iterable, size: int = 0):
        self.size = int(size)
        self._source = iter(iterable)
        if self.size > 0:
            self._queue: queue.Queue = queue.Queue(maxsize=self.size)
            self._stop = threading.Event()
            self._thread = threading.Thread(target=self._produce, daemon=True)
            self._thread.start()

    def _produce(self):
        try:
            for item in self._source:
                while not self._stop.is_set():
                    try:
                        self._queue.put((item, None), timeout=0.05)
                        break
                    except queue.Full:
                        continue
                if self._stop.is_set():
                    return
            self._queue.put((self._DONE, None))
        except BaseException as exc:  # surfaced on the consumer side
            self._queue.put((self._DONE, exc))

    def __iter__(self):
        return self

    def __next__(self):
        if self.size == 0:
            return next(self._source)
        item, exc = self._queue.get()
        if item is self._DONE:
            if exc is not None:
                raise exc
            raise StopIteration
        return item

    def close(self):
        if self.size > 0:
            self._stop.set()


class Worker:
    sections: tuple[str, ...] = ()
    defaults: dict = {}

    def __init__(self, configs, overrides=(), expdir="./experiments", seed: int | None = None,
                 log_level: str = "info", prefetch: int = 0):
        self.configs = configs
        self.overrides = list(overrides)
        self.expdir = Path(expdir)
        self.seed_arg = seed
        self.log_level = log_level
        self.prefetch = int(prefetch)
        self.experiment_dir: Path | None = None
        self.pipeline = None
        self.status = TrainingStatus()
        self.diagnostics = []
        self.history: dict[str, list] = {"training": [], "validation": [], "test": []}
        self._handlers: list[logging.Handler] = []

    # setup --------------------------------------------------------------------
    def load(self) -> dict:
        tree = merge(self.defaults, load_config(self.configs))
        tree = apply_overrides(tree, self.overrides)
        if self.seed_arg is not None:
            tree["seed"] = int(self.seed_arg)
        tree.setdefault("seed", DEFAULT_SEED)
        return tree

    def _start_logging(self):
        level = getattr(logging, self.log_level.upper())
        package_logger = logging.getLogger("ptp")
        package_logger.setLevel(level)
        file_handler = logging.FileHandler(self.experiment_dir / "experiment.log", encoding="utf-8")
        console = logging.StreamHandler(sys.stderr)
        for h in (file_handler, console):
            h.setFormatter(logging.Formatter(LOG_FORMAT))
            h.setLevel(level)
            package_logger.addHandler(h)
            self._handlers.append(h)

    def _stop_logging(self):
        package_logger = logging.getLogger("ptp")
        for h in self._handlers:
            package_logger.removeHandler(h)
            h.close()
        self._handlers = []

    def setup(self):
        self.config = self.load()
        self.seed = int(self.config["seed"])
        self.experiment_dir = new_experiment_dir(self.expdir)
        self._start_logging()
        (self.experiment_dir / "training_configuration.yml").write_text(
            dump_config(self.config), encoding="utf-8")
        logger.info("experiment directory: %s", self.experiment_dir)
        self.pipeline = build_pipeline(self.config, section=self.sections, seed=self.seed,
                                       workdir=self.experiment_dir)
        for section in self.sections:
            for d in self.pipeline.handshake(section):
                if d not in self.diagnostics:
                    self.diagnostics.append(d)
        if self.diagnostics:
            raise HandshakeError(self.diagnostics)
        loaded = load_configured(self.pipeline)
        for name in loaded:
            logger.info("loaded parameters of %s from %s", name,
                        self.pipeline.models[name].config.load_from[0])
        for name, model in self.pipeline.models.items():
            logger.info("model %s: %d parameters%s", name, model.store.num_parameters(),
                        " (frozen)" if model.store.frozen else "")
        self.exporter = CsvStatisticsExporter(self.experiment_dir)

    def run(self) -> int:
        try:
            try:
                self.setup()
            except (ConfigurationError, CheckpointError) as exc:
                logger.error("%s", exc)
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            try:
                self.execute()
            except (NonFiniteLossError, FloatingPointError) as exc:
                self._abort(exc)
                return EXIT_NUMERIC
            except ComponentExecutionError as exc:
                if isinstance(exc.__cause__, FloatingPointError):
                    self._abort(exc)
                    return EXIT_NUMERIC
                raise
            return EXIT_OK
        finally:
            self._stop_logging()

    def _abort(self, exc):
        logger.error("aborting: %s; state: episode=%d epoch=%d", exc, self.status.episode,
                     self.status.epoch)
        print(f"error: {exc}", file=sys.stderr)
        if self.pipeline is not None and self.experiment_dir is not None:
            save_checkpoint(self.pipeline, self.status, self.experiment_dir / "abort.ckpt")

    def execute(self):
        raise NotImplementedError

    # shared loops -------------------------------------------------------------
    def evaluate_batch(self, batch, section: str, collector: StatisticsCollector):
        out = self.pipeline.forward(batch, section)
        if any(True for c in self.pipeline.active(section) if c.role == "loss"):
            collector.collect("loss", self.pipeline.total_loss(out, section), batch.batch_size)
        self.pipeline.collect_statistics(out, collector, section)
        collector.end_batch()
        return out

    def train_batch(self, batch, collector: StatisticsCollector):
        out = self.pipeline.forward(batch, "training")
        loss = self.pipeline.total_loss(out, "training")
        if not math.isfinite(loss):
            raise NonFiniteLossError("total", loss)
        self.pipeline.backward(out, section="training")
        self.optimizer.step(self.pipeline.stores())
        collector.collect("loss", loss, batch.batch_size)
        self.pipeline.collect_statistics(out, collector, "training")
        collector.end_batch()
        self.status.episode += 1

    def export(self, collector, phase):
        if not collector:
            return None
        agg = collector.aggregate(episode=self.status.episode, epoch=self.status.epoch)
        self.exporter.export(agg, phase)
        self.history[phase].append(agg)
        logger.info("%s | episode %d epoch %d | %s", phase, agg.episode, agg.epoch,
                    " ".join(f"{k}={v.mean:.6g}" for k, v in sorted(agg.stats.items())))
        return agg


class _Trainer(Worker):
    sections = ("training", "validation")

    def setup(self):
        super().setup()
        if not self.pipeline.models:
            raise ConfigurationError("pipeline has no trainable model")
        if not self.pipeline.losses:
            raise ConfigurationError("pipeline has no loss")
        self.optimizer = Optimizer.from_config(get_path(self.config, "training.optimizer", {}))
        tc = get_path(self.config, "training.terminal_conditions", {}) or {}
        self.loss_stop = float(tc.get("loss_stop", 1e-5))
        self.terminal = tc

    def after_validation(self, agg) -> bool:
        """Track the best model; returns True when training should stop."""
        val_loss = agg.mean("loss")
        if track_best(self.status, val_loss, self.pipeline, self.experiment_dir, self.optimizer):
            logger.info("new best validation loss %.6g saved to best.ckpt", val_loss)
        return val_loss < self.loss_stop

    def finish(self):
        save_checkpoint(self.pipeline, self.status, self.experiment_dir / "final.ckpt",
                        self.optimizer)


class OfflineTrainer(_Trainer):
    """Epoch-based training with a full validation pass after every epoch."""

    defaults = {"training": {"optimizer": {"type": "sgd", "lr": 0.1, "momentum": 0.0},
                             "terminal_conditions": {"loss_stop": 1e-5, "max_epochs": 10}}}

    def execute(self):
        max_epochs = self.terminal.get("max_epochs")
        if max_epochs is not None and int(max_epochs) < 0:
            raise ConfigurationError("max_epochs must be non-negative")
        train_task = self.pipeline.tasks["training"]
        val_task = self.pipeline.tasks["validation"]
        train_stats, val_stats = StatisticsCollector(), StatisticsCollector()
        epoch = 0
        while max_epochs is None or epoch < int(max_epochs):
            self.status.epoch = epoch
            self.pipeline.train()
            batches = Prefetcher(train_task.batches(epoch), self.prefetch)
            try:
                for batch in batches:
                    self.train_batch(batch, train_stats)
            finally:
                batches.close()
            self.export(train_stats, "training")

            self.pipeline.eval()
            for batch in val_task.batches(0):
                self.evaluate_batch(batch, "validation", val_stats)
            agg = self.export(val_stats, "validation")
            epoch += 1
            if self.after_validation(agg):
                logger.info("validation loss below %g; stopping", self.loss_stop)
                break
        self.status.epoch = epoch
        self.finish()


def _cycle(task):
    epoch = 0
    while True:
        empty = True
        for batch in task.batches(epoch):
            empty = False
            yield epoch, batch
        if empty:
            return
        epoch += 1


class OnlineTrainer(_Trainer):
    """Episode-based training; one validation batch every ``validation_interval`` episodes."""

    defaults = {"training": {"optimizer": {"type": "sgd", "lr": 0.1, "momentum": 0.0},
                             "terminal_conditions": {"loss_stop": 1e-5, "max_episodes": 1000,
                                                     "validation_interval": 100}}}

    def execute(self):
        max_episodes = int(self.terminal.get("max_episodes", 1000))
        interval = int(self.terminal.get("validation_interval", 100))
        if max_episodes < 1 or interval < 1:
            raise ConfigurationError("max_episodes and validation_interval must be positive")
        train_stats, val_stats = StatisticsCollector(), StatisticsCollector()
        train_batches = Prefetcher(_cycle(self.pipeline.tasks["training"]), self.prefetch)
        val_batches = _cycle(self.pipeline.tasks["validation"])
        try:
            while self.status.episode < max_episodes:
                self.pipeline.train()
                epoch, batch = next(train_batches)
                self.status.epoch = epoch
                self.train_batch(batch, train_stats)
                if self.status.episode % interval:
                    continue
                self.export(train_stats, "training")
                self.pipeline.eval()
                _, val_batch = next(val_batches)
                self.evaluate_batch(val_batch, "validation", val_stats)
                if self.after_validation(self.export(val_stats, "validation")):
                    logger.info("validation loss below %g; stopping", self.loss_stop)
                    break
        finally:
            train_batches.close()
        self.finish()


class Processor(Worker):
    """Single evaluation pass over the test task."""

    sections = ("test",)

    def execute(self):
        self.pipeline.eval()
        stats = StatisticsCollector()
        batches = Prefetcher(self.pipeline.tasks["test"].batches(0), self.prefetch)
        self.batches_processed = 0
        try:
            for batch in batches:
                self.evaluate_batch(batch, "test", stats)
                self.batches_processed += 1
        finally:
            batches.close()
        agg = self.export(stats, "test")
        if agg is not None:
            for key, summary in sorted(agg.stats.items()):
                print(f"{key}: {summary.mean:.6g}")


WORKERS = {"train-offline": OfflineTrainer, "train-online": OnlineTrainer, "process": Processor}


def run_offline_trainer(configs, overrides=(), **options) -> int:
    return OfflineTrainer(configs, overrides, **options).run()


def run_online_trainer(configs, overrides=(), **options) -> int:
    return OnlineTrainer(configs, overrides, **options).run()


def run_processor(configs, overrides=(), **options) -> int:
    return Processor(configs, overrides, **options).run()
