"""Monte-Carlo visibility statistics for object tokens under each masking strategy."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import PatchGeometry
from .masking import STRATEGIES, MaskParams, make_mask
from .objectness import ObjectnessMap
from .rng import derive_seed

BENCH_VERSION = 1
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class BenchRow:
    strategy: str
    trials: int
    any_visible: int
    object_visible_total: int
    visible_total: int

    @property
    def p_any_object_visible(self) -> float:
        return self.any_visible / self.trials

    def mean_object_visible(self) -> float:
        return self.object_visible_total / self.trials

    def mean_visible(self) -> float:
        return self.visible_total / self.trials


def two_object_instance(grid: int = 4, cells: Sequence[int] = (5, 10), slots: int = 1,
                        object_score: float = 2.0) -> tuple[ObjectnessMap, np.ndarray]:
    """A grid x grid map with a few high-score "object" cells over a zero background."""
    g = PatchGeometry(slots, 1, grid, grid, 1, 1, 1)
    s = np.zeros(grid * grid)
    s[list(cells)] = object_score
    return ObjectnessMap(g, s), np.isin(np.arange(grid * grid), cells)


def worker_count() -> int:
    """``SOAR_THREADS`` caps workers; 0 or unset means one per CPU."""
    raw = os.environ.get("SOAR_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("SOAR_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _run_chunk(args) -> tuple[int, int, int]:
    omap, object_cells, params, seed, start, stop = args
    g = omap.geometry
    obj_tokens = np.tile(object_cells, g.temporal_slots)
    base = derive_seed(seed, params.strategy)
    anyv = objv = vis = 0
    for trial in range(start, stop):
        mask = make_mask(g, replace(params, seed=(base + trial) & _MASK64), omap)
        hits = int(np.count_nonzero(mask.visible & obj_tokens))
        anyv += hits > 0
        objv += hits
        vis += mask.visible_count
    return anyv, objv, vis


def bench_strategy(omap: ObjectnessMap, object_cells: np.ndarray, params: MaskParams,
                   trials: int, seed: int, workers: Optional[int] = None) -> BenchRow:
    """Aggregate counts over ``trials`` masks; trial i uses mask seed ``derive_seed(seed, strategy) + i``."""
    workers = worker_count() if workers is None else workers
    object_cells = np.asarray(object_cells, dtype=bool)
    if workers <= 1 or trials < 1000:
        a, o, v = _run_chunk((omap, object_cells, params, seed, 0, trials))
    else:
        bounds = np.linspace(0, trials, workers + 1).astype(int)
        jobs = [(omap, object_cells, params, seed, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
        a, o, v = (sum(p[i] for p in parts) for i in range(3))
    return BenchRow(params.strategy, trials, a, o, v)


def bench_masking(omap: ObjectnessMap, object_cells: np.ndarray, trials: int, seed: int,
                  rho: float = 0.75, x: float = 0.5,
                  strategies: Sequence[str] = STRATEGIES,
                  workers: Optional[int] = None) -> list[BenchRow]:
    rows = []
    for s in strategies:
        params = MaskParams(rho=rho, seed=0, strategy=s, x=x if s.replace("-", "_") == "ratio_x" else None)
        rows.append(bench_strategy(omap, object_cells, params, trials, seed, workers))
    return rows


def rows_to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["# bench-masking", f"version={BENCH_VERSION}"])
    w.writerow(["strategy", "trials", "p_any_object_visible", "mean_object_tokens_visible",
                "mean_visible_tokens"])
    for r in rows:
        w.writerow([r.strategy, r.trials, f"{r.p_any_object_visible:.6f}",
                    f"{r.mean_object_visible():.6f}", f"{r.mean_visible():.6f}"])
    return buf.getvalue()
