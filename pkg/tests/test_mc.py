from __future__ import annotations

import pytest

from rightmost.mc import WORKERS_ENV, chunked, default_workers, map_chunks


def _squares(start, count):
    return [i * i for i in range(start, start + count)]


def test_chunked_covers_range():
    assert chunked(3, 10, 4) == [(3, 4), (7, 4), (11, 2)]
    assert chunked(0, 0, 4) == []


def test_map_chunks_order_independent_of_workers():
    ref = [i * i for i in range(5, 42)]
    assert map_chunks(_squares, 37, workers=1, chunk=5, start=5) == ref
    assert map_chunks(_squares, 37, workers=3, chunk=5, start=5) == ref


def test_worker_env(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert default_workers() == 3
    monkeypatch.setenv(WORKERS_ENV, "zero")
    with pytest.raises(ValueError):
        default_workers()
    monkeypatch.setenv(WORKERS_ENV, "0")
    with pytest.raises(ValueError):
        default_workers()
