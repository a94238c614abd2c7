"""Throughput reporting: figures of merit and the context table."""

import pytest

from eamc.bench import CONTEXT_ROWS, measure_throughput


def test_measure_throughput_small():
    r = measure_throughput(l=8, width=64, sweeps=10, warmup=1, seed=5)
    assert r.sut_ps > 0
    assert r.gut_ps == pytest.approx(r.sut_ps / 64, rel=1e-12)
    assert r.wall_seconds > 0
    assert r.sweeps == 10


def test_report_lines_include_context():
    r = measure_throughput(l=8, width=32, sweeps=10, warmup=1, seed=6)
    text = "\n".join(r.lines())
    assert "SUT" in text and "GUT" in text
    for label, year, ps in CONTEXT_ROWS:
        assert label in text
        assert str(year) in text


def test_context_rows_span_the_survey():
    years = [row[1] for row in CONTEXT_ROWS]
    assert min(years) == 2007 and max(years) == 2013
    vals = [row[2] for row in CONTEXT_ROWS]
    assert max(vals) == 1000.0  # slowest surveyed chip
    assert min(vals) == 2.0     # fastest surveyed chip


def test_throughput_validation():
    with pytest.raises(ValueError):
        measure_throughput(l=8, width=8, sweeps=5)
    with pytest.raises(ValueError):
        measure_throughput(l=8, width=8, sweeps=10, warmup=0)
