"""Statistics, viewers and exporters: components that observe streams."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from ptp.components.base import Component, register
from ptp.streams import ANY, BATCH, any_stream, index_list, numeric

logger = logging.getLogger(__name__)


def argmax_rows(x: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest index
    return np.argmax(x, axis=1)


@register("accuracy")
class Accuracy(Component):
    defaults = {"statistic": "accuracy"}

    def input_definitions(self):
        return {"predictions": numeric(BATCH, ANY), "targets": index_list()}

    def execute(self, batch):
        pass

    def compute(self, batch) -> float:
        pred = batch[self.stream("predictions")]
        tgt = batch[self.stream("targets")]
        return float(np.mean(argmax_rows(pred) == tgt))

    def collect_statistics(self, batch, collector):
        collector.collect(self.params["statistic"], self.compute(batch), batch.batch_size)


def _sample_value(value, i):
    if isinstance(value, np.ndarray):
        return value[i].tolist() if value.ndim > 1 else value[i].item()
    if isinstance(value, (list, tuple)):
        return value[i]
    return value


@register("stream_viewer")
class StreamViewer(Component):
    """Logs the first ``sample_count`` samples of selected streams."""

    defaults = {"input_streams": [], "sample_count": 1}

    def input_definitions(self):
        return {s: any_stream() for s in self.params["input_streams"]}

    def execute(self, batch):
        count = min(int(self.params["sample_count"]), batch.batch_size)
        for i in range(count):
            for s in self.params["input_streams"]:
                name = self.stream(s)
                logger.info("%s | sample %d | %s = %s", self.name, batch.sample_indices[i],
                            name, _sample_value(batch[name], i))


@register("stream_csv_exporter")
class StreamCsvExporter(Component):
    """Writes one CSV row per sample: index, then each stream's value.

    Rank-2 arrays are exported as their row argmax, string lists as raw tokens.
    Relative paths land in ``<workdir>/exports``.
    """

    defaults = {"input_streams": [], "path": "exported.csv", "mode": "overwrite"}

    def __init__(self, config, seed=1337, workdir=None):
        super().__init__(config, seed, workdir)
        if self.params["mode"] not in ("overwrite", "append"):
            raise ValueError(f"{self.name}: mode must be overwrite or append")
        path = Path(self.params["path"])
        if not path.is_absolute() and self.workdir is not None:
            path = self.workdir / "exports" / path
        self.path = path
        self._header_done = False

    def initialize(self, globals_):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.params["mode"] == "overwrite" and self.path.exists():
            self.path.unlink()
        self._header_done = self.path.exists() and self.path.stat().st_size > 0

    def input_definitions(self):
        return {s: any_stream() for s in self.params["input_streams"]}

    def _cell(self, value, i):
        if isinstance(value, np.ndarray) and value.ndim == 2:
            return int(argmax_rows(value[i:i + 1])[0])
        return _sample_value(value, i)

    def execute(self, batch):
        streams = list(self.params["input_streams"])
        with open(self.path, "a", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            if not self._header_done:
                writer.writerow(["sample_index", *streams])
                self._header_done = True
            for i, idx in enumerate(batch.sample_indices):
                writer.writerow([idx, *(self._cell(batch[self.stream(s)], i) for s in streams)])
