"""Object-aware reconstruction weights and the weighted masked MSE.

For masked tokens ``i``::

    w_i = (S_i + mu) / sum_j (S_j + mu)
    loss = sum_i w_i * mean((V_i - Vhat_i) ** 2)

where ``mu`` is the mean over all N token scores. The squared error is the
mean over the patch elements, so uniform weights give the ordinary
per-element masked MSE.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import MaskSpec, VideoTensor, check_geometry_match
from .errors import ParameterError, ShapeError
from .objectness import TokenScores

NORM_EPS = 1e-6


@dataclass(frozen=True)
class LossWeights:
    """Weights over the masked tokens ``indices`` (ascending)."""

    indices: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    mu_used: bool = True
    mu_value: float = 0.0

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64).reshape(-1)
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if idx.size != w.size:
            raise ShapeError("indices and weights differ in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ParameterError("weights must be finite and non-negative")
        idx.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(w) for i, w in zip(self.indices, self.weights)}

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.indices] = self.weights
        return out


def uniform_weights(mask: MaskSpec) -> LossWeights:
    inv = mask.masked_indices
    if inv.size == 0:
        raise ParameterError("nothing to reconstruct: every token is visible")
    return LossWeights(inv, np.full(inv.size, 1.0 / inv.size), mu_used=False, mu_value=0.0)


def loss_weights(scores: TokenScores, mask: MaskSpec, use_mu: bool = True) -> LossWeights:
    check_geometry_match(scores.geometry, mask.geometry, "scores and mask")
    inv = mask.masked_indices
    if inv.size == 0:
        raise ParameterError("nothing to reconstruct: every token is visible")
    mu = scores.mu
    num = scores.scores[inv] + (mu if use_mu else 0.0)
    # equal numerators (including all-zero) resolve to exact uniform weights
    if np.all(num == num[0]):
        w = np.full(inv.size, 1.0 / inv.size)
    else:
        w = num / num.sum()
    return LossWeights(inv, w, mu_used=use_mu, mu_value=mu)


def normalize_patches(patches: np.ndarray) -> np.ndarray:
    """Per-patch standardization, the optional normalized-target variant."""
    mean = patches.mean(axis=1, keepdims=True)
    var = patches.var(axis=1, keepdims=True)
    return (patches - mean) / np.sqrt(var + NORM_EPS)


def reconstruction_targets(original: VideoTensor, normalize_target: bool = False) -> np.ndarray:
    p = original.patches()
    return normalize_patches(p) if normalize_target else p


def _residuals(original: VideoTensor, reconstruction: np.ndarray, weights: LossWeights,
               normalize_target: bool, targets: Optional[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    g = original.geometry
    rec = np.asarray(reconstruction, dtype=np.float64)
    if rec.shape != (g.token_count, g.patch_size):
        raise ShapeError(f"reconstruction must be {(g.token_count, g.patch_size)}, got {rec.shape}")
    if weights.indices.size and weights.indices.max() >= g.token_count:
        raise ShapeError("weights refer to tokens outside the video")
    tgt = targets if targets is not None else reconstruction_targets(original, normalize_target)
    idx = weights.indices
    return idx, tgt[idx] - rec[idx]


def weighted_mse(original: VideoTensor, reconstruction: np.ndarray, weights: LossWeights,
                 normalize_target: bool = False, targets: Optional[np.ndarray] = None) -> float:
    """Weighted masked MSE; ``reconstruction`` is an (N, t*C*h*w) array of predicted patches.

    Rows for visible tokens are ignored.
    """
    _, diff = _residuals(original, reconstruction, weights, normalize_target, targets)
    per_token = (diff ** 2).mean(axis=1)
    return float(weights.weights @ per_token)


def weighted_mse_gradient(original: VideoTensor, reconstruction: np.ndarray,
                          weights: LossWeights, normalize_target: bool = False,
                          targets: Optional[np.ndarray] = None) -> np.ndarray:
    """d loss / d reconstruction, shape (N, t*C*h*w); zero on unweighted rows."""
    idx, diff = _residuals(original, reconstruction, weights, normalize_target, targets)
    grad = np.zeros(np.shape(reconstruction))
    grad[idx] = (-2.0 / diff.shape[1]) * weights.weights[:, None] * diff
    return grad
