"""A linear masked autoencoder with hand-written gradients.

For token ``i`` with patch ``x_i`` and fixed sinusoidal position ``p_i``::

    z_i = x_i @ embed_w + embed_b + p_i        (visible tokens)
    u_i = z_i if visible else mask_token + p_i
    c   = mean of z_j over visible tokens
    h_i = tanh(u_i @ enc_w + c @ ctx_w)
    y_i = h_i @ dec_w + dec_b

``c`` is the only path by which visible content reaches masked tokens; without
it a masked token's prediction would depend on its position alone.
"""

from __future__ import annotations

import csv
import io as _io
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import io as fio
from .core import MaskSpec, PatchGeometry, VideoTensor, check_geometry_match
from .errors import ParameterError, ShapeError, TrainingError
from .heatmap import SigmaPolicy, video_heatmap
from .loss import (LossWeights, loss_weights, normalize_patches, reconstruction_targets,
                   uniform_weights)
from .masking import MaskParams, make_mask
from .objectness import ObjectnessMap, TokenScores, patch_objectness, token_scores
from .rng import Stream, derive_seed
from .synth import SynthConfig, generate

PARAM_NAMES = ("embed_w", "embed_b", "enc_w", "ctx_w", "mask_token", "dec_w", "dec_b")


def sinusoidal_positions(n: int, dim: int) -> np.ndarray:
    pos = np.arange(n, dtype=np.float64)[:, None]
    j = np.arange(dim)
    freq = 1.0 / (10000.0 ** ((j - j % 2) / dim))
    angles = pos * freq[None, :]
    return np.where(j % 2 == 0, np.sin(angles), np.cos(angles))


@dataclass(frozen=True)
class ToyModel:
    embed_w: np.ndarray
    embed_b: np.ndarray
    enc_w: np.ndarray
    ctx_w: np.ndarray
    mask_token: np.ndarray
    dec_w: np.ndarray
    dec_b: np.ndarray
    pos: np.ndarray = field(repr=False)

    def __post_init__(self):
        p, d = np.shape(self.embed_w)
        shapes = {"embed_b": (d,), "enc_w": (d, d), "ctx_w": (d, d), "mask_token": (d,),
                  "dec_w": (d, p), "dec_b": (p,)}
        for name, shape in shapes.items():
            if np.shape(getattr(self, name)) != shape:
                raise ShapeError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")
        if np.ndim(self.pos) != 2 or np.shape(self.pos)[1] != d:
            raise ShapeError("positional table must be (N, D)")
        for name in PARAM_NAMES + ("pos",):
            a = np.array(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(a)):
                raise ParameterError(f"{name} contains non-finite values")
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def dim(self) -> int:
        return self.embed_w.shape[1]

    @property
    def patch_size(self) -> int:
        return self.embed_w.shape[0]

    @property
    def n_tokens(self) -> int:
        return self.pos.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def with_params(self, **updates) -> "ToyModel":
        return replace(self, **updates)

    @classmethod
    def zeros(cls, geometry: PatchGeometry, dim: int) -> "ToyModel":
        p, n = geometry.patch_size, geometry.token_count
        return cls(np.zeros((p, dim)), np.zeros(dim), np.zeros((dim, dim)), np.zeros((dim, dim)),
                   np.zeros(dim), np.zeros((dim, p)), np.zeros(p), sinusoidal_positions(n, dim))

    @classmethod
    def init(cls, geometry: PatchGeometry, dim: int, seed: int) -> "ToyModel":
        """Uniform(+-1/sqrt(fan_in)) matrices, zero biases, small mask token."""
        if dim < 1:
            raise ParameterError("model width must be at least 1")
        p, n = geometry.patch_size, geometry.token_count
        rng = Stream(seed, "toymae-init")

        def u(shape, fan_in):
            a = 1.0 / math.sqrt(fan_in)
            return rng.uniform_array(int(np.prod(shape)), -a, a).reshape(shape)

        return cls(u((p, dim), p), np.zeros(dim), u((dim, dim), dim), u((dim, dim), dim),
                   u((dim,), dim) * 0.1, u((dim, p), dim), np.zeros(p),
                   sinusoidal_positions(n, dim))


def _check(model: ToyModel, video: VideoTensor, mask: MaskSpec) -> None:
    g = video.geometry
    check_geometry_match(g, mask.geometry, "video and mask")
    if model.patch_size != g.patch_size or model.n_tokens != g.token_count:
        raise ShapeError(f"model expects {model.n_tokens} tokens of size {model.patch_size}, "
                         f"video has {g.token_count} of size {g.patch_size}")


def _forward(model: ToyModel, patches: np.ndarray, visible: np.ndarray) -> dict:
    z = patches @ model.embed_w + model.embed_b + model.pos
    u = np.where(visible[:, None], z, model.mask_token + model.pos)
    n_vis = int(visible.sum())
    c = z[visible].mean(axis=0) if n_vis else np.zeros(model.dim)
    h = np.tanh(u @ model.enc_w + c @ model.ctx_w)
    y = h @ model.dec_w + model.dec_b
    return {"u": u, "c": c, "h": h, "y": y, "n_vis": n_vis}


def forward(model: ToyModel, video: VideoTensor, mask: MaskSpec) -> np.ndarray:
    """Predicted patches for all N tokens, shape (N, t*C*h*w)."""
    _check(model, video, mask)
    return _forward(model, video.patches(), mask.visible)["y"]


def _backward(model: ToyModel, patches: np.ndarray, targets: np.ndarray, vis: np.ndarray,
              weights: LossWeights) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    cache = _forward(model, patches, vis)
    y = cache["y"]
    idx = weights.indices
    diff = targets[idx] - y[idx]
    loss = float(weights.weights @ (diff ** 2).mean(axis=1))
    g_y = np.zeros_like(y)
    g_y[idx] = (-2.0 / y.shape[1]) * weights.weights[:, None] * diff

    h = cache["h"]
    g_a = (g_y @ model.dec_w.T) * (1.0 - h * h)
    g_a_sum = g_a.sum(axis=0)
    g_u = g_a @ model.enc_w.T
    g_z = np.where(vis[:, None], g_u, 0.0)
    if cache["n_vis"]:
        g_z[vis] += (model.ctx_w @ g_a_sum) / cache["n_vis"]
    grads = {
        "embed_w": patches.T @ g_z,
        "embed_b": g_z.sum(axis=0),
        "enc_w": cache["u"].T @ g_a,
        "ctx_w": np.outer(cache["c"], g_a_sum),
        "mask_token": g_u[~vis].sum(axis=0),
        "dec_w": h.T @ g_y,
        "dec_b": g_y.sum(axis=0),
    }
    return loss, grads, y


def backward(model: ToyModel, video: VideoTensor, mask: MaskSpec, weights: LossWeights,
             normalize_target: bool = False) -> tuple[float, dict[str, np.ndarray]]:
    """Weighted masked MSE of the forward pass and its gradient for every parameter."""
    _check(model, video, mask)
    if weights.indices.size and weights.indices.max() >= video.geometry.token_count:
        raise ShapeError("weights refer to tokens outside the video")
    loss, grads, _ = _backward(model, video.patches(), reconstruction_targets(video, normalize_target),
                               mask.visible, weights)
    return loss, grads


# -- training -----------------------------------------------------------------

@dataclass(frozen=True)
class ToySample:
    video: VideoTensor
    objectness: ObjectnessMap
    scores: TokenScores
    object_tokens: np.ndarray = field(repr=False)
    patches: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.patches is None:
            object.__setattr__(self, "patches", self.video.patches())

    def targets(self, normalize: bool = False) -> np.ndarray:
        return normalize_patches(self.patches) if normalize else self.patches


def make_sample(video: VideoTensor, objectness: ObjectnessMap,
                object_tokens: Optional[np.ndarray] = None) -> ToySample:
    g = video.geometry
    if object_tokens is None:
        object_tokens = np.zeros(g.token_count, dtype=bool)
    return ToySample(video, objectness, token_scores(objectness),
                     np.asarray(object_tokens, dtype=bool))


def synth_dataset(config: SynthConfig, size: int, seed: int,
                  sigma: Optional[SigmaPolicy] = None) -> list[ToySample]:
    """``size`` synthetic clips with objectness from their exact detections."""
    out = []
    for i in range(size):
        s = generate(config, derive_seed(seed, "dataset", i))
        hm = video_heatmap(s.detections, config.geometry, sigma)
        out.append(make_sample(s.video, patch_objectness(hm, config.geometry),
                               s.object_token_mask()))
    return out


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 200
    lr: float = 0.05
    seed: int = 0
    batch_size: int = 1
    mask: MaskParams = MaskParams()
    use_mu: bool = True
    object_loss: bool = True
    normalize_target: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ParameterError("steps must be >= 1")
        if not (math.isfinite(self.lr) and self.lr >= 0):
            raise ParameterError("learning rate must be finite and non-negative")
        if self.batch_size < 1:
            raise ParameterError("batch size must be >= 1")


@dataclass
class Trace:
    total_loss: list[float] = field(default_factory=list)
    object_mse: list[float] = field(default_factory=list)
    background_mse: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "total_loss", "object_mse", "background_mse"])
        for i, row in enumerate(zip(self.total_loss, self.object_mse, self.background_mse)):
            w.writerow([i] + [repr(float(v)) for v in row])
        return buf.getvalue()


def step_mask(sample: ToySample, params: MaskParams, run_seed: int, sample_id: int,
              step: int) -> MaskSpec:
    seeded = replace(params, seed=derive_seed(run_seed, sample_id, step))
    return make_mask(sample.video.geometry, seeded, sample.objectness)


def _split_errors(y: np.ndarray, targets: np.ndarray, mask: MaskSpec,
                  object_tokens: np.ndarray) -> tuple[float, int, float, int]:
    sq = ((y - targets) ** 2).sum(axis=1)
    inv = ~mask.visible
    obj, bg = inv & object_tokens, inv & ~object_tokens
    p = y.shape[1]
    return float(sq[obj].sum()), int(obj.sum()) * p, float(sq[bg].sum()), int(bg.sum()) * p


def _ratio(num: float, den: int) -> float:
    return num / den if den else float("nan")


def train(model: ToyModel, dataset: Sequence[ToySample],
          config: TrainConfig) -> tuple[ToyModel, Trace]:
    """Plain gradient descent; sample ``(step * B + b) mod len(dataset)`` fills batch slot b."""
    if not dataset:
        raise ParameterError("dataset is empty")
    trace = Trace()
    params = {k: v.copy() for k, v in model.params().items()}
    current = model
    for step in range(config.steps):
        total = {k: np.zeros_like(v) for k, v in params.items()}
        loss_sum = 0.0
        obj_se = bg_se = 0.0
        obj_n = bg_n = 0
        for b in range(config.batch_size):
            sid = (step * config.batch_size + b) % len(dataset)
            sample = dataset[sid]
            mask = step_mask(sample, config.mask, config.seed, sid, step)
            if config.object_loss:
                weights = loss_weights(sample.scores, mask, config.use_mu)
            else:
                weights = uniform_weights(mask)
            targets = sample.targets(config.normalize_target)
            # overflow is reported below as a TrainingError
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads, y = _backward(current, sample.patches, targets, mask.visible, weights)
            if not math.isfinite(loss):
                raise TrainingError(step)
            loss_sum += loss
            for k in PARAM_NAMES:
                total[k] += grads[k]
            o, on, g_, gn = _split_errors(y, targets, mask, sample.object_tokens)
            obj_se += o
            obj_n += on
            bg_se += g_
            bg_n += gn
        trace.total_loss.append(loss_sum / config.batch_size)
        trace.object_mse.append(_ratio(obj_se, obj_n))
        trace.background_mse.append(_ratio(bg_se, bg_n))
        if config.lr:
            scale = config.lr / config.batch_size
            with np.errstate(over="ignore", invalid="ignore"):
                for k in PARAM_NAMES:
                    params[k] = params[k] - scale * total[k]
            if not all(np.all(np.isfinite(v)) for v in params.values()):
                raise TrainingError(step, "non-finite parameters")
            current = current.with_params(**params)
    return current, trace


def evaluate(model: ToyModel, dataset: Sequence[ToySample], params: MaskParams, seed: int,
             draws: int = 4, normalize_target: bool = False) -> tuple[float, float]:
    """Pooled per-element MSE on masked object tokens and masked background tokens."""
    obj_se = bg_se = 0.0
    obj_n = bg_n = 0
    for sid, sample in enumerate(dataset):
        patches = sample.patches
        targets = sample.targets(normalize_target)
        for d in range(draws):
            mask = step_mask(sample, params, derive_seed(seed, "eval"), sid, d)
            y = _forward(model, patches, mask.visible)["y"]
            o, on, g_, gn = _split_errors(y, targets, mask, sample.object_tokens)
            obj_se += o
            obj_n += on
            bg_se += g_
            bg_n += gn
    return _ratio(obj_se, obj_n), _ratio(bg_se, bg_n)


# -- checkpoints --------------------------------------------------------------

def save_checkpoint(path, model: ToyModel) -> None:
    fio.write_tensors(path, [getattr(model, k) for k in PARAM_NAMES] + [model.pos])


def load_checkpoint(path) -> ToyModel:
    arrays = fio.read_tensors(path)
    if len(arrays) != len(PARAM_NAMES) + 1:
        raise ShapeError(f"checkpoint holds {len(arrays)} tensors, expected {len(PARAM_NAMES) + 1}")
    return ToyModel(*arrays)
