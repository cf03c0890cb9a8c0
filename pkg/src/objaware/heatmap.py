"""Gaussian center heatmaps built from detections."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import BoundingBox, DetectionSet, PatchGeometry
from .errors import ParameterError, RangeError

DEFAULT_SIGMA_SCALE = 1.0 / 6.0
TRUNCATE_RADIUS = 3.0


@dataclass(frozen=True)
class SigmaPolicy:
    """Either a fixed sigma in pixels or ``fraction * min(sx, sy)`` per box."""

    mode: str = "box"
    value: float = DEFAULT_SIGMA_SCALE

    def __post_init__(self):
        if self.mode not in ("fixed", "box"):
            raise ParameterError(f"unknown sigma mode {self.mode!r}")
        if not (math.isfinite(self.value) and self.value > 0):
            raise ParameterError(f"sigma parameter must be positive, got {self.value}")

    @classmethod
    def fixed(cls, sigma: float) -> "SigmaPolicy":
        return cls("fixed", float(sigma))

    @classmethod
    def box_scaled(cls, fraction: float = DEFAULT_SIGMA_SCALE) -> "SigmaPolicy":
        return cls("box", float(fraction))

    def sigma_for(self, box: BoundingBox) -> float:
        if self.mode == "fixed":
            return self.value
        return self.value * min(box.sx, box.sy)


@dataclass(frozen=True)
class PixelHeatmap:
    values: np.ndarray = field(repr=False)
    sigma: SigmaPolicy = SigmaPolicy()

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ParameterError("heatmap must be 2-D")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ParameterError("heatmap values must be finite and non-negative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _accumulate(out: np.ndarray, boxes: Sequence[BoundingBox], sigma: SigmaPolicy,
                truncate: bool) -> None:
    h, w = out.shape
    ys = np.arange(h, dtype=np.float64)[:, None]
    xs = np.arange(w, dtype=np.float64)[None, :]
    for box in boxes:
        s = sigma.sigma_for(box)
        if not s > 0:
            raise ParameterError(f"non-positive sigma {s}")
        d2 = (xs - box.cx) ** 2 + (ys - box.cy) ** 2
        g = np.exp(-d2 / (2.0 * s * s))
        if truncate:
            g[d2 > (TRUNCATE_RADIUS * s) ** 2] = 0.0
        out += g


def frame_heatmap(boxes: Sequence[BoundingBox], geometry: PatchGeometry,
                  sigma: Optional[SigmaPolicy] = None, truncate: bool = False) -> PixelHeatmap:
    """Sum of one isotropic Gaussian per box, evaluated at every pixel center.

    With ``truncate`` each Gaussian is zeroed beyond 3 sigma of its center, so
    the result differs from the exact map by at most ``exp(-4.5)`` per box.
    """
    sigma = sigma or SigmaPolicy()
    out = np.zeros((geometry.height, geometry.width))
    _accumulate(out, boxes, sigma, truncate)
    return PixelHeatmap(out, sigma)


def video_heatmap(dets: DetectionSet, geometry: PatchGeometry,
                  sigma: Optional[SigmaPolicy] = None, truncate: bool = False) -> PixelHeatmap:
    """Per-frame heatmaps averaged over the T frames of the clip."""
    sigma = sigma or SigmaPolicy()
    if dets.n_frames > geometry.frames:
        raise RangeError(f"detections cover {dets.n_frames} frames, video has {geometry.frames}")
    total = np.zeros((geometry.height, geometry.width))
    for boxes in dets.frames:
        if boxes:
            total += frame_heatmap(boxes, geometry, sigma, truncate).values
    return PixelHeatmap(total / geometry.frames, sigma)
