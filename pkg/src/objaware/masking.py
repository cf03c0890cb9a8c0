"""Mask generation: object-aware segment masking, its variants, and baselines.

Visible budgets are ``round((1 - rho) * n)`` with Python's round-half-to-even,
floored at 1. Every strategy draws from a :class:`~objaware.rng.Stream` keyed
by ``(seed, strategy)``, so a mask is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import MaskSpec, PatchGeometry, check_geometry_match
from .errors import ParameterError
from .objectness import ObjectnessMap, TokenScores, token_scores
from .rng import Stream

STRATEGIES = ("object_aware", "ratio_x", "leaky_3d", "random", "tube", "block")
TEMPORALLY_CONSISTENT = ("object_aware", "tube", "block")


def normalize_strategy(name: str) -> str:
    s = name.strip().lower().replace("-", "_")
    if s == "ratio":
        s = "ratio_x"
    if s not in STRATEGIES:
        raise ParameterError(f"unknown masking strategy {name!r}; choose from {', '.join(STRATEGIES)}")
    return s


@dataclass(frozen=True)
class MaskParams:
    rho: float = 0.7
    seed: int = 0
    strategy: str = "object_aware"
    x: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", normalize_strategy(self.strategy))
        if not (math.isfinite(self.rho) and 0.0 <= self.rho < 1.0):
            raise ParameterError(f"mask ratio leaves no visible patches (rho={self.rho})")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.strategy == "ratio_x":
            if self.x is None or not 0.0 <= self.x <= 1.0:
                raise ParameterError(f"ratio_x masking needs x in [0, 1], got {self.x!r}")


def visible_budget(rho: float, n: int) -> int:
    if not (math.isfinite(rho) and 0.0 <= rho < 1.0):
        raise ParameterError(f"mask ratio leaves no visible patches (rho={rho})")
    return max(1, round((1.0 - rho) * n))


def segment_lengths(n: int, k: int) -> list[int]:
    """Split ``n`` sorted items into ``k`` contiguous segments differing by at most one.

    The shorter segments come first, i.e. at the high-score end of a
    descending sort, so that high-score cells are never less likely to stay
    visible than under uniform sampling of the same budget.
    """
    if not 1 <= k <= n:
        raise ParameterError(f"cannot split {n} items into {k} segments")
    q, r = divmod(n, k)
    return [q] * (k - r) + [q + 1] * r


def descending_order(scores: np.ndarray) -> np.ndarray:
    # stable sort keeps ascending index order among ties
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def segment_select(scores: np.ndarray, k: int, rng: Stream) -> np.ndarray:
    """One uniformly chosen visible item per segment of the descending score order."""
    order = descending_order(scores)
    visible = np.zeros(order.size, dtype=bool)
    start = 0
    for length in segment_lengths(order.size, k):
        visible[order[start + rng.below(length)]] = True
        start += length
    return visible


def object_aware_mask(omap: ObjectnessMap, params: MaskParams) -> MaskSpec:
    g = omap.geometry
    k = visible_budget(params.rho, g.spatial_count)
    spatial = segment_select(omap.flat, k, Stream(params.seed, "object_aware"))
    return MaskSpec(g, np.tile(spatial, g.temporal_slots))


def leaky_3d_mask(scores: TokenScores, params: MaskParams) -> MaskSpec:
    """Segment selection over all N tokens at once, without temporal replication."""
    g = scores.geometry
    k = visible_budget(params.rho, g.token_count)
    return MaskSpec(g, segment_select(scores.scores, k, Stream(params.seed, "leaky_3d")))


def ratio_x_mask(scores: TokenScores, visible_n: int, x: float, seed: int) -> MaskSpec:
    """Draw ``round(x * visible_n)`` visible tokens from the above-mean pool, the rest below.

    A pool too small for its quota passes the shortfall to the other pool.
    """
    g = scores.geometry
    n = g.token_count
    if not 0 <= visible_n <= n:
        raise ParameterError(f"cannot keep {visible_n} of {n} tokens visible")
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"x must lie in [0, 1], got {x}")
    s = scores.scores
    fg = np.flatnonzero(s > s.mean())
    bg = np.flatnonzero(s <= s.mean())
    want_fg = round(x * visible_n)
    want_bg = visible_n - want_fg
    if want_fg > fg.size:
        want_bg += want_fg - fg.size
        want_fg = fg.size
    if want_bg > bg.size:
        want_fg += want_bg - bg.size
        want_bg = bg.size
    rng = Stream(seed, "ratio_x")
    visible = np.zeros(n, dtype=bool)
    visible[fg[rng.sample(fg.size, want_fg)]] = True
    visible[bg[rng.sample(bg.size, want_bg)]] = True
    return MaskSpec(g, visible)


def block_shape(grid_h: int, grid_w: int, area: int) -> tuple[int, int]:
    """Rectangle whose area is closest to ``area``; ties go to the squarest, then the wider."""
    best = None
    for bh in range(1, grid_h + 1):
        for bw in range(1, grid_w + 1):
            key = (abs(bh * bw - area), abs(bh - bw), bh)
            if best is None or key < best[0]:
                best = (key, (bh, bw))
    return best[1]


def baseline_mask(geometry: PatchGeometry, params: MaskParams) -> MaskSpec:
    g = geometry
    rng = Stream(params.seed, params.strategy)
    if params.strategy == "random":
        k = visible_budget(params.rho, g.token_count)
        visible = np.zeros(g.token_count, dtype=bool)
        visible[rng.sample(g.token_count, k)] = True
        return MaskSpec(g, visible)
    if params.strategy == "tube":
        k = visible_budget(params.rho, g.spatial_count)
        spatial = np.zeros(g.spatial_count, dtype=bool)
        spatial[rng.sample(g.spatial_count, k)] = True
        return MaskSpec(g, np.tile(spatial, g.temporal_slots))
    if params.strategy == "block":
        k = visible_budget(params.rho, g.spatial_count)
        bh, bw = block_shape(g.grid_h, g.grid_w, k)
        top = rng.below(g.grid_h - bh + 1)
        left = rng.below(g.grid_w - bw + 1)
        spatial = np.zeros((g.grid_h, g.grid_w), dtype=bool)
        spatial[top:top + bh, left:left + bw] = True
        return MaskSpec(g, np.tile(spatial.reshape(-1), g.temporal_slots))
    raise ParameterError(f"{params.strategy!r} is not a baseline strategy")


def expected_visible(geometry: PatchGeometry, params: MaskParams) -> int:
    """The visible token count each strategy is contracted to produce."""
    g = geometry
    s = params.strategy
    if s in ("object_aware", "tube"):
        return visible_budget(params.rho, g.spatial_count) * g.temporal_slots
    if s == "block":
        bh, bw = block_shape(g.grid_h, g.grid_w, visible_budget(params.rho, g.spatial_count))
        return bh * bw * g.temporal_slots
    return visible_budget(params.rho, g.token_count)


def make_mask(geometry: PatchGeometry, params: MaskParams,
              objectness: Optional[ObjectnessMap] = None) -> MaskSpec:
    """Dispatch on ``params.strategy``; score-driven strategies need ``objectness``."""
    s = params.strategy
    if s in ("random", "tube", "block"):
        return baseline_mask(geometry, params)
    if objectness is None:
        raise ParameterError(f"strategy {s!r} needs an objectness map")
    check_geometry_match(geometry, objectness.geometry, "mask geometry and objectness map")
    if s == "object_aware":
        return object_aware_mask(objectness, params)
    if s == "leaky_3d":
        return leaky_3d_mask(token_scores(objectness), params)
    return ratio_x_mask(token_scores(objectness), visible_budget(params.rho, geometry.token_count),
                        params.x, params.seed)
