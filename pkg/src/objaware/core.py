"""Patch geometry, video tensors, detections and masks.

Tokens are flattened temporal-slot-major, then row-major over the spatial
patch grid:

    token = slot * N_s + row * (W / w) + col

Patch values are laid out as (t, C, h, w), C-order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParameterError, RangeError, ShapeError


@dataclass(frozen=True)
class PatchGeometry:
    frames: int
    channels: int
    height: int
    width: int
    patch_t: int
    patch_h: int
    patch_w: int

    def __post_init__(self):
        dims = (self.frames, self.channels, self.height, self.width,
                self.patch_t, self.patch_h, self.patch_w)
        if any(int(d) != d or d < 1 for d in dims):
            raise ParameterError(f"geometry dimensions must be positive integers, got {dims}")
        if self.frames % self.patch_t or self.height % self.patch_h or self.width % self.patch_w:
            raise ParameterError(
                f"patch {self.patch_t}x{self.patch_h}x{self.patch_w} does not tile "
                f"video {self.frames}x{self.height}x{self.width}"
            )

    @property
    def temporal_slots(self) -> int:
        return self.frames // self.patch_t

    @property
    def grid_h(self) -> int:
        return self.height // self.patch_h

    @property
    def grid_w(self) -> int:
        return self.width // self.patch_w

    @property
    def spatial_count(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def token_count(self) -> int:
        return self.temporal_slots * self.spatial_count

    @property
    def patch_size(self) -> int:
        return self.patch_t * self.channels * self.patch_h * self.patch_w

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.frames, self.channels, self.height, self.width)

    def to_dict(self) -> dict:
        return {
            "frames": self.frames, "channels": self.channels,
            "height": self.height, "width": self.width,
            "patch_t": self.patch_t, "patch_h": self.patch_h, "patch_w": self.patch_w,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PatchGeometry":
        return cls(**{k: int(d[k]) for k in (
            "frames", "channels", "height", "width", "patch_t", "patch_h", "patch_w")})


def token_index(slot: int, row: int, col: int, geometry: PatchGeometry) -> int:
    """Flat token index of a (temporal slot, patch row, patch col) triple."""
    if not (0 <= slot < geometry.temporal_slots
            and 0 <= row < geometry.grid_h
            and 0 <= col < geometry.grid_w):
        raise RangeError(f"token coordinates ({slot}, {row}, {col}) outside grid")
    return slot * geometry.spatial_count + row * geometry.grid_w + col


def token_coords(token: int, geometry: PatchGeometry) -> tuple[int, int, int]:
    """Inverse of :func:`token_index`."""
    if not 0 <= token < geometry.token_count:
        raise RangeError(f"token {token} outside [0, {geometry.token_count})")
    slot, cell = divmod(token, geometry.spatial_count)
    row, col = divmod(cell, geometry.grid_w)
    return slot, row, col


@dataclass(frozen=True)
class VideoTensor:
    geometry: PatchGeometry
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.size != int(np.prod(self.geometry.shape)):
            raise ShapeError(
                f"video data has {data.size} values, geometry needs {np.prod(self.geometry.shape)}")
        data = data.reshape(self.geometry.shape)
        if not np.all(np.isfinite(data)):
            raise ParameterError("video data contains non-finite values")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    def patches(self) -> np.ndarray:
        """All patches as an (N, t*C*h*w) array in token order."""
        g = self.geometry
        x = self.data.reshape(g.temporal_slots, g.patch_t, g.channels,
                              g.grid_h, g.patch_h, g.grid_w, g.patch_w)
        x = x.transpose(0, 3, 5, 1, 2, 4, 6)
        return x.reshape(g.token_count, g.patch_size).copy()

    @classmethod
    def from_patches(cls, patches: np.ndarray, geometry: PatchGeometry) -> "VideoTensor":
        g = geometry
        patches = np.asarray(patches, dtype=np.float64)
        if patches.shape != (g.token_count, g.patch_size):
            raise ShapeError(f"expected patches of shape {(g.token_count, g.patch_size)}, "
                             f"got {patches.shape}")
        x = patches.reshape(g.temporal_slots, g.grid_h, g.grid_w,
                            g.patch_t, g.channels, g.patch_h, g.patch_w)
        x = x.transpose(0, 3, 4, 1, 5, 2, 6)
        return cls(g, x.reshape(g.shape))


def extract_patch(video: VideoTensor, token: int) -> np.ndarray:
    g = video.geometry
    slot, row, col = token_coords(token, g)
    block = video.data[slot * g.patch_t:(slot + 1) * g.patch_t, :,
                       row * g.patch_h:(row + 1) * g.patch_h,
                       col * g.patch_w:(col + 1) * g.patch_w]
    return block.reshape(-1).copy()


@dataclass(frozen=True)
class BoundingBox:
    """Box center and size in continuous pixel units (origin at the top-left pixel center)."""

    cx: float
    cy: float
    sx: float
    sy: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.sx, self.sy)
        if not all(np.isfinite(v) for v in vals):
            raise ParameterError(f"non-finite box {vals}")
        if self.sx <= 0 or self.sy <= 0:
            raise ParameterError(f"box size must be positive, got ({self.sx}, {self.sy})")


@dataclass(frozen=True)
class DetectionSet:
    """Per-frame detections; every frame in [0, T) is present, possibly empty."""

    frames: tuple[tuple[BoundingBox, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(tuple(f) for f in self.frames))

    @classmethod
    def empty(cls, n_frames: int) -> "DetectionSet":
        return cls(tuple(() for _ in range(n_frames)))

    @classmethod
    def from_mapping(cls, boxes: Mapping[int, Iterable[BoundingBox]], n_frames: int) -> "DetectionSet":
        for t in boxes:
            if not 0 <= t < n_frames:
                raise RangeError(f"detection frame {t} outside [0, {n_frames})")
        return cls(tuple(tuple(boxes.get(t, ())) for t in range(n_frames)))

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def total_boxes(self) -> int:
        return sum(len(f) for f in self.frames)


@dataclass(frozen=True)
class MaskSpec:
    geometry: PatchGeometry
    visible: np.ndarray = field(repr=False)

    def __post_init__(self):
        vis = np.asarray(self.visible, dtype=bool).reshape(-1)
        if vis.size != self.geometry.token_count:
            raise ShapeError(f"mask has {vis.size} entries, geometry has "
                             f"{self.geometry.token_count} tokens")
        vis = vis.copy()
        vis.flags.writeable = False
        object.__setattr__(self, "visible", vis)

    @property
    def visible_count(self) -> int:
        return int(self.visible.sum())

    @property
    def visible_indices(self) -> np.ndarray:
        return np.flatnonzero(self.visible)

    @property
    def masked_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.visible)

    def slot_view(self) -> np.ndarray:
        """Visibility reshaped to (slots, grid_h, grid_w)."""
        g = self.geometry
        return self.visible.reshape(g.temporal_slots, g.grid_h, g.grid_w)

    def is_temporally_consistent(self) -> bool:
        v = self.visible.reshape(self.geometry.temporal_slots, -1)
        return bool(np.all(v == v[0]))

    def __eq__(self, other):
        if not isinstance(other, MaskSpec):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(self.visible, other.visible)

    __hash__ = None


def check_geometry_match(a: PatchGeometry, b: PatchGeometry, what: str = "inputs") -> None:
    if a != b:
        raise ShapeError(f"{what} disagree on geometry: {a} vs {b}")


def as_box_list(boxes: Sequence) -> list[BoundingBox]:
    return [b if isinstance(b, BoundingBox) else BoundingBox(*b) for b in boxes]
