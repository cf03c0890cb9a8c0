"""Synthetic long-tailed clips: small textured objects on a noise background."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import BoundingBox, DetectionSet, PatchGeometry, VideoTensor
from .errors import ParameterError
from .rng import Stream, derive_seed


@dataclass(frozen=True)
class SynthConfig:
    geometry: PatchGeometry
    n_objects: int = 1
    object_size: Optional[int] = None
    coverage: float = 0.05
    drift: tuple[float, float] = (0.0, 0.0)
    texture_seed: Optional[int] = None
    # when set, object placement comes from this seed instead of the per-clip seed
    placement_seed: Optional[int] = None
    noise_amplitude: float = 0.1
    object_amplitude: float = 1.0
    # detector noise: center jitter and size jitter as fractions of the side, per-frame dropout
    center_jitter: float = 0.0
    size_jitter: float = 0.0
    dropout: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.coverage <= 0.5:
            raise ParameterError(f"coverage must lie in (0, 0.5], got {self.coverage}")
        if self.n_objects < 0:
            raise ParameterError("object count must be non-negative")
        side = self.side
        if side < 1 or side > min(self.geometry.height, self.geometry.width):
            raise ParameterError(f"object side {side} does not fit the frame")
        if not 0.0 <= self.dropout <= 1.0:
            raise ParameterError("dropout must lie in [0, 1]")
        if self.center_jitter < 0 or not 0.0 <= self.size_jitter < 1.0:
            raise ParameterError("jitter fractions must be non-negative (size jitter < 1)")

    @property
    def side(self) -> int:
        if self.object_size is not None:
            return int(self.object_size)
        return round(math.sqrt(self.coverage * self.geometry.height * self.geometry.width))

    @property
    def is_static(self) -> bool:
        return self.drift == (0.0, 0.0) or tuple(self.drift) == (0, 0)


@dataclass(frozen=True)
class SynthSample:
    video: VideoTensor
    detections: DetectionSet
    # per temporal slot, the sorted token indices overlapping an object
    object_tokens: tuple[tuple[int, ...], ...]
    # per frame, (x0, y0) pixel corner of every object
    corners: tuple[tuple[tuple[int, int], ...], ...] = field(repr=False, default=())

    def object_token_mask(self) -> np.ndarray:
        m = np.zeros(self.video.geometry.token_count, dtype=bool)
        for toks in self.object_tokens:
            m[list(toks)] = True
        return m


def _reflect(p: float, hi: float) -> float:
    """Fold ``p`` into [0, hi] by reflecting at both ends."""
    if hi <= 0:
        return 0.0
    period = 2.0 * hi
    p = math.fmod(p, period)
    if p < 0:
        p += period
    return period - p if p > hi else p


def object_texture(side: int, polarity: float, phase: int) -> np.ndarray:
    """Pixel-level checkerboard plus a diagonal ramp, in [-1, 1] before polarity."""
    v, u = np.mgrid[0:side, 0:side]
    checker = np.where((u + v + phase) % 2 == 0, 1.0, -1.0)
    ramp = (u + v) / max(2 * (side - 1), 1) * 2.0 - 1.0
    return polarity * (0.75 * checker + 0.25 * ramp)


def generate(config: SynthConfig, seed: int) -> SynthSample:
    g = config.geometry
    side = config.side
    rng = Stream(seed, "synth")
    tex_seed = config.texture_seed if config.texture_seed is not None else derive_seed(seed, "texture")
    tex_rng = Stream(tex_seed, "texture")

    data = rng.uniform_array(int(np.prod(g.shape)), -config.noise_amplitude,
                             config.noise_amplitude).reshape(g.shape)

    place_rng = rng if config.placement_seed is None else Stream(config.placement_seed, "placement")
    starts, textures = [], []
    for _ in range(config.n_objects):
        starts.append((float(place_rng.below(g.width - side + 1)),
                       float(place_rng.below(g.height - side + 1))))
        polarity = 1.0 if tex_rng.below(2) == 0 else -1.0
        textures.append(config.object_amplitude * object_texture(side, polarity, tex_rng.below(2)))

    det_rng = Stream(seed, "detector")
    frames, corners = [], []
    occupied = np.zeros((g.frames, g.height, g.width), dtype=bool)
    dx, dy = config.drift
    for t in range(g.frames):
        boxes, frame_corners = [], []
        for (x0, y0), tex in zip(starts, textures):
            x = int(round(_reflect(x0 + dx * t, g.width - side)))
            y = int(round(_reflect(y0 + dy * t, g.height - side)))
            data[t, :, y:y + side, x:x + side] = tex
            occupied[t, y:y + side, x:x + side] = True
            frame_corners.append((x, y))
            if config.dropout and det_rng.uniform() < config.dropout:
                continue
            cx = x + (side - 1) / 2.0
            cy = y + (side - 1) / 2.0
            sx = sy = float(side)
            if config.center_jitter:
                cx += (2 * det_rng.uniform() - 1) * config.center_jitter * side
                cy += (2 * det_rng.uniform() - 1) * config.center_jitter * side
            if config.size_jitter:
                sx *= 1 + (2 * det_rng.uniform() - 1) * config.size_jitter
                sy *= 1 + (2 * det_rng.uniform() - 1) * config.size_jitter
            boxes.append(BoundingBox(cx, cy, sx, sy))
        frames.append(tuple(boxes))
        corners.append(tuple(frame_corners))

    tokens = []
    for slot in range(g.temporal_slots):
        occ = occupied[slot * g.patch_t:(slot + 1) * g.patch_t].any(axis=0)
        cells = occ.reshape(g.grid_h, g.patch_h, g.grid_w, g.patch_w).any(axis=(1, 3)).reshape(-1)
        tokens.append(tuple(int(slot * g.spatial_count + c) for c in np.flatnonzero(cells)))

    return SynthSample(VideoTensor(g, data), DetectionSet(tuple(frames)), tuple(tokens),
                       tuple(corners))
