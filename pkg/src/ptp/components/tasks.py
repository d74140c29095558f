"""Synthetic and file-backed tasks."""

from __future__ import annotations

import csv
import itertools
import math
from pathlib import Path

import numpy as np

from ptp.components.base import Task, register
from ptp.config import ConfigurationError
from ptp.streams import BATCH, index_list, numeric, string_list


def lattice_centers(num_classes: int, dim: int, step: float) -> np.ndarray:
    """First ``num_classes`` points of an integer grid in ``dim`` dimensions, times ``step``.

    Points are taken in order of increasing L1 norm, so centers stay compact.
    """
    side = max(2, math.ceil(num_classes ** (1.0 / dim)) + 1)
    points = sorted(itertools.product(range(side), repeat=dim), key=lambda p: (sum(p), p[::-1]))
    while len(points) < num_classes:  # only for tiny dims with many classes
        side += 1
        points = sorted(itertools.product(range(side), repeat=dim), key=lambda p: (sum(p), p[::-1]))
    return np.array(points[:num_classes], dtype=np.float64) * step


@register("gaussian_blobs")
class GaussianBlobs(Task):
    """Isotropic Gaussian clusters around lattice centers.

    Center spacing is ``4 * max(spread, 1)``, so even ``spread=0`` keeps
    classes distinct.
    """

    defaults = {**Task.task_defaults, "num_classes": 3, "dim": 2,
                "samples_per_class": 100, "spread": 0.1}

    def initialize(self, globals_):
        num_classes = int(self.params["num_classes"])
        dim = int(self.params["dim"])
        per_class = int(self.params["samples_per_class"])
        spread = float(self.params["spread"])
        if num_classes < 2 or dim < 1 or per_class < 1 or spread < 0:
            raise ConfigurationError(
                f"{self.name}: need num_classes >= 2, dim >= 1, samples_per_class >= 1, spread >= 0")
        self.centers = lattice_centers(num_classes, dim, 4.0 * max(spread, 1.0))
        rng = np.random.default_rng(self.seed)
        targets = np.repeat(np.arange(num_classes), per_class)
        inputs = self.centers[targets] + rng.normal(0.0, spread, size=(len(targets), dim))
        # interleave classes so sequential batches are balanced
        order = np.argsort(np.tile(np.arange(per_class), num_classes), kind="stable")
        self.data = {"inputs": inputs[order], "targets": targets[order].astype(np.int64)}
        self.publish_global(globals_, "num_classes", num_classes)
        self.publish_global(globals_, "input_size", dim)

    def output_definitions(self):
        dim = int(self.params["dim"])
        return {"inputs": numeric(BATCH, dim, description="sample coordinates"),
                "targets": index_list("class index")}


@register("parity")
class Parity(Task):
    """All bit vectors of a given length labelled with their parity (XOR for 2 bits)."""

    defaults = {**Task.task_defaults, "num_bits": 2, "batch_size": 4}

    def initialize(self, globals_):
        bits = int(self.params["num_bits"])
        if not 2 <= bits <= 16:
            raise ConfigurationError(f"{self.name}: num_bits must be within [2, 16]")
        inputs = np.array(list(itertools.product((0.0, 1.0), repeat=bits)))
        self.data = {"inputs": inputs, "targets": (inputs.sum(axis=1) % 2).astype(np.int64)}
        self.publish_global(globals_, "num_classes", 2)
        self.publish_global(globals_, "input_size", bits)

    def output_definitions(self):
        return {"inputs": numeric(BATCH, int(self.params["num_bits"])),
                "targets": index_list("parity of the bit vector")}


@register("csv_task")
class CsvTask(Task):
    """Numeric features plus a string label column from a headed CSV file."""

    defaults = {**Task.task_defaults, "path": None, "feature_columns": None,
                "label_column": "label"}

    def _resolve(self) -> Path:
        if not self.params.get("path"):
            raise ConfigurationError(f"{self.name}: 'path' is required")
        return Path(self.params["path"])

    def initialize(self, globals_):
        path = self._resolve()
        try:
            handle = open(path, newline="", encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"{self.name}: cannot open {path}: {exc}") from None
        with handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if not header:
                raise ConfigurationError(f"{path}: missing header row")
            header = [h.strip() for h in header]
            features = self.params.get("feature_columns")
            label = self.params["label_column"]
            if features is None:
                features = [h for h in header if h != label]
            missing = [c for c in [*features, label] if c not in header]
            if missing:
                raise ConfigurationError(f"{path}: missing column(s) {', '.join(missing)}")
            cols = [header.index(c) for c in features]
            label_col = header.index(label)
            rows, labels = [], []
            for row_number, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise ConfigurationError(
                        f"{path}: row {row_number} has {len(row)} cells, header has {len(header)}")
                values = []
                for c in cols:
                    try:
                        values.append(float(row[c]))
                    except ValueError:
                        raise ConfigurationError(
                            f"{path}: row {row_number}, column {header[c]!r}: "
                            f"non-numeric value {row[c]!r}") from None
                rows.append(values)
                labels.append(row[label_col].strip())
        if not rows:
            raise ConfigurationError(f"{path}: no data rows")
        self.feature_columns = list(features)
        self.data = {"inputs": np.array(rows, dtype=np.float64).reshape(len(rows), len(cols)),
                     "labels": labels}
        self.publish_global(globals_, "input_size", len(cols))

    def output_definitions(self):
        width = len(self.params["feature_columns"]) if self.params.get("feature_columns") else None
        if width is None and hasattr(self, "feature_columns"):
            width = len(self.feature_columns)
        return {"inputs": numeric(BATCH, width if width else "ANY"),
                "labels": string_list("raw label tokens")}
