"""File formats.

Tensor container (``.soart``)::

    b"SOART\\x01" | rank: u8 | dims: rank x u32 LE | payload: prod(dims) x f64 LE, C-order

Mask file (``.soarm``)::

    b"SOARM\\x01" | N: u32 LE | T, C, H, W, t, h, w: 7 x u32 LE | bitset: ceil(N/8) bytes

Bit ``i % 8`` of byte ``i // 8`` is 1 when token ``i`` is visible; unused
trailing bits are zero.

Detections are JSON lines ``{"frame", "cx", "cy", "sx", "sy"}``; loss weights
are JSON lines with a header object followed by ``{"token", "weight"}`` rows.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .core import BoundingBox, DetectionSet, MaskSpec, PatchGeometry, VideoTensor
from .errors import FormatError, LengthError, ParameterError, RangeError
from .loss import LossWeights

PathLike = Union[str, Path]

TENSOR_MAGIC = b"SOART\x01"
MASK_MAGIC = b"SOARM\x01"
MAX_RANK = 6
WEIGHTS_VERSION = 1


# -- tensor container ---------------------------------------------------------

def encode_tensor(array: np.ndarray) -> bytes:
    a = np.asarray(array, dtype=np.float64)
    if a.ndim > MAX_RANK:
        raise ParameterError(f"rank {a.ndim} exceeds {MAX_RANK}")
    if not np.all(np.isfinite(a)):
        raise ParameterError("refusing to write non-finite values")
    header = TENSOR_MAGIC + struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return header + np.ascontiguousarray(a).astype("<f8").tobytes()


def decode_tensor(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one container starting at ``offset``; returns (array, end offset)."""
    if len(buf) - offset < len(TENSOR_MAGIC) + 1:
        raise LengthError("truncated tensor header")
    if buf[offset:offset + 6] != TENSOR_MAGIC:
        raise FormatError("bad tensor magic")
    rank = buf[offset + 6]
    if rank > MAX_RANK:
        raise FormatError(f"tensor rank {rank} exceeds {MAX_RANK}")
    pos = offset + 7
    if len(buf) < pos + 4 * rank:
        raise LengthError("truncated tensor dims")
    dims = struct.unpack_from(f"<{rank}I", buf, pos)
    pos += 4 * rank
    nbytes = 8 * int(np.prod(dims, dtype=np.int64))
    if len(buf) < pos + nbytes:
        raise LengthError(f"tensor payload needs {nbytes} bytes, {len(buf) - pos} present")
    arr = np.frombuffer(buf, dtype="<f8", count=nbytes // 8, offset=pos).astype(np.float64)
    return arr.reshape(dims), pos + nbytes


def write_tensor(path: PathLike, array: np.ndarray) -> None:
    Path(path).write_bytes(encode_tensor(array))


def read_tensor(path: PathLike) -> np.ndarray:
    buf = Path(path).read_bytes()
    arr, end = decode_tensor(buf)
    if end != len(buf):
        raise FormatError(f"{len(buf) - end} trailing bytes after tensor")
    return arr


def write_tensors(path: PathLike, arrays: Iterable[np.ndarray]) -> None:
    """Several containers back to back (used for checkpoints)."""
    Path(path).write_bytes(b"".join(encode_tensor(a) for a in arrays))


def read_tensors(path: PathLike) -> list[np.ndarray]:
    buf = Path(path).read_bytes()
    out, pos = [], 0
    while pos < len(buf):
        arr, pos = decode_tensor(buf, pos)
        out.append(arr)
    return out


def write_video(path: PathLike, video: VideoTensor) -> None:
    write_tensor(path, video.data)


def read_video(path: PathLike, patch: tuple[int, int, int]) -> VideoTensor:
    arr = read_tensor(path)
    if arr.ndim != 4:
        raise FormatError(f"video tensor must be rank 4 (T, C, H, W), got rank {arr.ndim}")
    t, c, h, w = arr.shape
    return VideoTensor(PatchGeometry(t, c, h, w, *patch), arr)


# -- detections ---------------------------------------------------------------

def encode_detections(dets: DetectionSet) -> str:
    lines = []
    for t, boxes in enumerate(dets.frames):
        for b in boxes:
            lines.append(json.dumps({"frame": t, "cx": float(b.cx), "cy": float(b.cy),
                                     "sx": float(b.sx), "sy": float(b.sy)}))
    return "".join(line + "\n" for line in lines)


def decode_detections(text: str, n_frames: int) -> DetectionSet:
    per_frame: dict[int, list[BoundingBox]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            frame = rec["frame"]
            box = BoundingBox(float(rec["cx"]), float(rec["cy"]), float(rec["sx"]), float(rec["sy"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"detection line {lineno}: {exc}") from exc
        except ParameterError as exc:
            raise FormatError(f"detection line {lineno}: {exc}") from exc
        if not isinstance(frame, int) or isinstance(frame, bool) or frame < 0:
            raise FormatError(f"detection line {lineno}: frame must be a non-negative integer")
        if frame >= n_frames:
            raise RangeError(f"detection line {lineno}: frame {frame} outside [0, {n_frames})")
        per_frame.setdefault(frame, []).append(box)
    return DetectionSet.from_mapping(per_frame, n_frames)


def write_detections(path: PathLike, dets: DetectionSet) -> None:
    Path(path).write_text(encode_detections(dets))


def read_detections(path: PathLike, n_frames: int) -> DetectionSet:
    return decode_detections(Path(path).read_text(), n_frames)


# -- masks --------------------------------------------------------------------

def encode_mask(mask: MaskSpec) -> bytes:
    g = mask.geometry
    n = g.token_count
    bits = np.packbits(mask.visible.astype(np.uint8), bitorder="little")
    return (MASK_MAGIC + struct.pack("<I", n)
            + struct.pack("<7I", g.frames, g.channels, g.height, g.width,
                          g.patch_t, g.patch_h, g.patch_w)
            + bits.tobytes())


def decode_mask(buf: bytes) -> MaskSpec:
    if len(buf) < 6 + 4 + 28:
        raise LengthError("truncated mask header")
    if buf[:6] != MASK_MAGIC:
        raise FormatError("bad mask magic")
    (n,) = struct.unpack_from("<I", buf, 6)
    dims = struct.unpack_from("<7I", buf, 10)
    try:
        geometry = PatchGeometry(*dims)
    except ParameterError as exc:
        raise FormatError(f"mask geometry invalid: {exc}") from exc
    if geometry.token_count != n:
        raise FormatError(f"mask declares N={n}, geometry implies {geometry.token_count}")
    nbytes = (n + 7) // 8
    body = buf[38:]
    if len(body) < nbytes:
        raise LengthError(f"mask bitset needs {nbytes} bytes, {len(body)} present")
    if len(body) > nbytes:
        raise FormatError(f"{len(body) - nbytes} trailing bytes after mask bitset")
    bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8), bitorder="little")
    if bits[n:].any():
        raise FormatError("mask padding bits are not zero")
    return MaskSpec(geometry, bits[:n].astype(bool))


def write_mask(path: PathLike, mask: MaskSpec) -> None:
    Path(path).write_bytes(encode_mask(mask))


def read_mask(path: PathLike) -> MaskSpec:
    return decode_mask(Path(path).read_bytes())


# -- loss weights -------------------------------------------------------------

def encode_weights(weights: LossWeights) -> str:
    header = {"format": "loss-weights", "version": WEIGHTS_VERSION,
              "mu_used": bool(weights.mu_used), "mu_value": float(weights.mu_value)}
    lines = [json.dumps(header)]
    lines += [json.dumps({"token": int(i), "weight": float(w)})
              for i, w in zip(weights.indices, weights.weights)]
    return "".join(line + "\n" for line in lines)


def decode_weights(text: str) -> LossWeights:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty weights file")
    try:
        header = json.loads(lines[0])
        if header.get("format") != "loss-weights":
            raise FormatError("missing loss-weights header")
        if header.get("version") != WEIGHTS_VERSION:
            raise FormatError(f"unsupported weights version {header.get('version')!r}")
        rows = [json.loads(ln) for ln in lines[1:]]
        idx = [int(r["token"]) for r in rows]
        w = [float(r["weight"]) for r in rows]
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
        raise FormatError(f"malformed weights file: {exc}") from exc
    return LossWeights(np.array(idx, dtype=np.int64), np.array(w),
                       mu_used=bool(header["mu_used"]), mu_value=float(header["mu_value"]))


def write_weights(path: PathLike, weights: LossWeights) -> None:
    Path(path).write_text(encode_weights(weights))


def read_weights(path: PathLike) -> LossWeights:
    return decode_weights(Path(path).read_text())


# -- PGM preview --------------------------------------------------------------

def encode_pgm(values: np.ndarray) -> bytes:
    """8-bit binary PGM, min-max scaled; a constant map renders all black."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise ParameterError("PGM export needs a 2-D array")
    lo, hi = float(v.min()), float(v.max())
    if hi > lo and math.isfinite(hi - lo):
        img = np.rint((v - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        img = np.zeros(v.shape, dtype=np.uint8)
    h, w = v.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def write_pgm(path: PathLike, values: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(values))
