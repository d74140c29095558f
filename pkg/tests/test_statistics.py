import math

import numpy as np
import pytest

from oracles import weighted_stats
from ptp.statistics import CsvStatisticsExporter, StatisticsCollector, export_csv, format_value


def collect(pairs, key="accuracy"):
    c = StatisticsCollector()
    for size, value in pairs:
        c.collect(key, value, size)
        c.end_batch()
    return c


def test_weighted_mean_uses_batch_sizes():
    agg = collect([(3, 0.0), (1, 1.0)]).aggregate()
    s = agg.stats["accuracy"]
    assert s.mean == 0.25
    assert (s.min, s.max) == (0.0, 1.0)
    assert s.std == 0.5
    assert agg.batches == 2


def test_random_series_match_oracle(rng):
    for _ in range(50):
        n = int(rng.integers(1, 20))
        sizes = rng.integers(1, 64, size=n)
        values = rng.normal(size=n)
        pairs = [(int(a), float(b)) for a, b in zip(sizes, values)]
        s = collect(pairs).aggregate().stats["accuracy"]
        mean, lo, hi, std = weighted_stats(pairs)
        assert s.mean == pytest.approx(mean, rel=1e-12, abs=1e-12)
        assert (s.min, s.max) == (lo, hi)
        assert s.std == pytest.approx(std, rel=1e-12, abs=1e-12)


def test_aggregate_resets_and_rejects_empty():
    c = collect([(2, 1.0)])
    c.aggregate()
    with pytest.raises(ValueError):
        c.aggregate()


def test_non_finite_rejected():
    c = StatisticsCollector()
    with pytest.raises(ValueError, match="loss"):
        c.collect("loss", math.nan, 4)


def test_format_value():
    assert format_value(0.123456789) == "0.123457"
    assert format_value(1.0) == "1"
    assert format_value(1e-9) == "1e-09"


def test_csv_header_sorted_and_rows_appended(tmp_path):
    exporter = CsvStatisticsExporter(tmp_path)
    for epoch, (loss, acc) in enumerate([(0.5, 0.75), (0.25, 1.0)]):
        c = StatisticsCollector()
        c.collect("loss", loss, 2)
        c.collect("accuracy", acc, 2)
        exporter.export(c.aggregate(epoch=epoch), "validation")
    text = (tmp_path / "validation.csv").read_text()
    assert text == "episode,epoch,accuracy_mean,loss_mean\n0,0,0.75,0.5\n0,1,1,0.25\n"


def test_csv_rerun_overwrites(tmp_path):
    for _ in range(2):
        export_csv(collect([(1, 0.5)]).aggregate(), tmp_path, "training")
    assert (tmp_path / "training.csv").read_text().count("\n") == 2


def test_unknown_phase(tmp_path):
    with pytest.raises(ValueError):
        export_csv(collect([(1, 0.5)]).aggregate(), tmp_path, "debug")
