import threading

import numpy as np
import pytest

from staged_pbr.utils.exceptions import ParameterError
from staged_pbr.utils.parallel import chunk_bounds, map_chunks


def test_chunk_bounds_cover_range():
    assert chunk_bounds(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert chunk_bounds(0, 4) == []
    assert chunk_bounds(3, 8) == [(0, 3)]


def test_chunk_bounds_reject_zero_size():
    with pytest.raises(ParameterError):
        chunk_bounds(5, 0)


@pytest.mark.parametrize("threads", [1, 2, 7])
def test_results_keep_chunk_order(threads):
    assert map_chunks(lambda a, b: (a, b), 20, 3, threads) == chunk_bounds(20, 3)


def test_float_reduction_independent_of_threads():
    values = np.random.default_rng(0).normal(size=10_007)
    serial = sum(map_chunks(lambda a, b: values[a:b].sum(), len(values), 256, 1))
    threaded = sum(map_chunks(lambda a, b: values[a:b].sum(), len(values), 256, 8))
    assert serial == threaded


def test_uses_worker_threads():
    seen = set()

    def record(start, stop):
        seen.add(threading.current_thread().name)
        return stop - start

    assert sum(map_chunks(record, 100, 10, 4)) == 100
    assert any(name.startswith("staged-pbr") for name in seen)


def test_rejects_non_positive_threads():
    with pytest.raises(ParameterError):
        map_chunks(lambda a, b: None, 10, 2, 0)
