"""Per-batch statistics collection, aggregation and CSV export."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PHASES = ("training", "validation", "test")


@dataclass(frozen=True)
class Summary:
    mean: float
    min: float
    max: float
    std: float


@dataclass
class Aggregation:
    stats: dict[str, Summary]
    episode: int = 0
    epoch: int = 0
    batches: int = 0

    def mean(self, key: str) -> float:
        return self.stats[key].mean


class StatisticsCollector:
    """Series of ``(batch_size, value)`` pairs per statistic for the current phase."""

    def __init__(self):
        self.series: dict[str, list[tuple[int, float]]] = {}
        self.batches = 0

    def collect(self, key: str, value: float, batch_size: int) -> None:
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"statistic {key!r} is not finite: {value}")
        if batch_size < 1:
            raise ValueError(f"batch size must be positive, got {batch_size}")
        self.series.setdefault(key, []).append((int(batch_size), value))

    def end_batch(self) -> None:
        self.batches += 1

    def __bool__(self):
        return bool(self.series)

    def aggregate(self, episode: int = 0, epoch: int = 0) -> Aggregation:
        """Summarize and reset.

        The mean is weighted by batch size; min, max and (population) std are
        taken over the per-batch values.
        """
        if not self.series:
            raise ValueError("no statistics collected")
        stats = {}
        for key, pairs in self.series.items():
            sizes = np.array([s for s, _ in pairs], dtype=np.float64)
            values = np.array([v for _, v in pairs])
            stats[key] = Summary(mean=float(np.dot(sizes, values) / sizes.sum()),
                                 min=float(values.min()), max=float(values.max()),
                                 std=float(values.std()))
        agg = Aggregation(stats, episode=episode, epoch=epoch,
                          batches=self.batches or max(len(p) for p in self.series.values()))
        self.series = {}
        self.batches = 0
        return agg


def format_value(value: float) -> str:
    return f"{value:.6g}"


@dataclass
class CsvStatisticsExporter:
    """Writes one CSV file per phase into ``directory``.

    The header is fixed by the first aggregation exported for a phase:
    ``episode,epoch`` followed by ``<key>_mean`` for each statistic in sorted order.
    """

    directory: Path
    columns: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.directory = Path(self.directory)

    def path(self, phase: str) -> Path:
        return self.directory / f"{phase}.csv"

    def export(self, agg: Aggregation, phase: str) -> None:
        if phase not in PHASES:
            raise ValueError(f"unknown phase {phase!r}")
        first = phase not in self.columns
        if first:
            self.columns[phase] = sorted(agg.stats)
        keys = self.columns[phase]
        self.directory.mkdir(parents=True, exist_ok=True)
        with open(self.path(phase), "w" if first else "a", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            if first:
                writer.writerow(["episode", "epoch", *(f"{k}_mean" for k in keys)])
            writer.writerow([agg.episode, agg.epoch,
                             *(format_value(agg.stats[k].mean) if k in agg.stats else ""
                               for k in keys)])


def export_csv(agg: Aggregation, directory, phase: str, exporter: CsvStatisticsExporter | None = None):
    """Export one aggregation; pass the same ``exporter`` to append further rows."""
    exporter = exporter or CsvStatisticsExporter(Path(directory))
    exporter.export(agg, phase)
    return exporter
