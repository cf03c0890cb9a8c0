"""Patch-level objectness from a pixel heatmap."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PatchGeometry
from .errors import ParameterError, ShapeError
from .heatmap import PixelHeatmap


@dataclass(frozen=True)
class ObjectnessMap:
    """Raw per-cell pixel sums over the (H/h, W/w) spatial grid."""

    geometry: PatchGeometry
    scores: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = self.geometry
        s = np.array(self.scores, dtype=np.float64).reshape(-1)
        if s.size != g.spatial_count:
            raise ShapeError(f"objectness map has {s.size} cells, geometry has {g.spatial_count}")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ParameterError("objectness scores must be finite and non-negative")
        s = s.reshape(g.grid_h, g.grid_w)
        s.flags.writeable = False
        object.__setattr__(self, "scores", s)

    @property
    def flat(self) -> np.ndarray:
        return self.scores.reshape(-1)


@dataclass(frozen=True)
class TokenScores:
    geometry: PatchGeometry
    scores: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.array(self.scores, dtype=np.float64).reshape(-1)
        if s.size != self.geometry.token_count:
            raise ShapeError(f"{s.size} token scores for {self.geometry.token_count} tokens")
        s.flags.writeable = False
        object.__setattr__(self, "scores", s)

    @property
    def mu(self) -> float:
        return float(self.scores.mean())


def patch_objectness(heatmap: PixelHeatmap, geometry: PatchGeometry) -> ObjectnessMap:
    g = geometry
    if heatmap.values.shape != (g.height, g.width):
        raise ShapeError(f"heatmap is {heatmap.values.shape}, geometry is {(g.height, g.width)}")
    cells = heatmap.values.reshape(g.grid_h, g.patch_h, g.grid_w, g.patch_w).sum(axis=(1, 3))
    return ObjectnessMap(g, cells)


def token_scores(omap: ObjectnessMap) -> TokenScores:
    """Broadcast the spatial map to every temporal slot."""
    return TokenScores(omap.geometry, np.tile(omap.flat, omap.geometry.temporal_slots))
