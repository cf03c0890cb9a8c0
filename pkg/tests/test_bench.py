from math import comb

import numpy as np
import pytest

from objaware.bench import bench_masking, rows_to_csv, two_object_instance, worker_count


def test_two_object_instance():
    omap, cells = two_object_instance()
    assert omap.flat[5] == omap.flat[10] == 2.0 and omap.flat.sum() == 4.0
    assert cells.sum() == 2 and cells[5] and cells[10]


def test_serial_and_parallel_agree():
    omap, cells = two_object_instance()
    a = bench_masking(omap, cells, 1200, 5, strategies=("object_aware", "random"), workers=1)
    b = bench_masking(omap, cells, 1200, 5, strategies=("object_aware", "random"), workers=3)
    assert a == b


def test_visibility_rates():
    omap, cells = two_object_instance()
    rows = {r.strategy: r for r in bench_masking(omap, cells, 3000, 2, workers=1)}
    sd = np.sqrt(0.25 / 3000)
    assert abs(rows["object_aware"].p_any_object_visible - 0.5) < 4 * sd
    p_random = 1 - comb(14, 4) / comb(16, 4)
    assert abs(rows["random"].p_any_object_visible - p_random) < 4 * sd
    # ratio_x with x=0.5 puts 2 of 4 visible tokens on the two object cells
    assert rows["ratio_x"].p_any_object_visible == 1.0
    assert rows["ratio_x"].mean_object_visible() == 2.0
    assert all(r.mean_visible() == 4 for r in rows.values())


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("SOAR_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("SOAR_THREADS", "0")
    assert worker_count() >= 1
    monkeypatch.setenv("SOAR_THREADS", "-2")
    with pytest.raises(ValueError):
        worker_count()


def test_csv_layout():
    omap, cells = two_object_instance()
    text = rows_to_csv(bench_masking(omap, cells, 10, 0, strategies=("tube",), workers=1))
    lines = text.splitlines()
    assert lines[0] == "# bench-masking,version=1" and lines[2].startswith("tube,10,")
