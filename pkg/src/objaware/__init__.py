"""Object-aware masking and reconstruction weighting for masked video autoencoders."""

from .core import (BoundingBox, DetectionSet, MaskSpec, PatchGeometry, VideoTensor,
                   extract_patch, token_coords, token_index)
from .errors import (FormatError, LengthError, ObjawareError, ParameterError, RangeError,
                     ShapeError, TrainingError)
from .heatmap import PixelHeatmap, SigmaPolicy, frame_heatmap, video_heatmap
from .loss import LossWeights, loss_weights, uniform_weights, weighted_mse, weighted_mse_gradient
from .masking import (MaskParams, baseline_mask, leaky_3d_mask, make_mask, object_aware_mask,
                      ratio_x_mask)
from .objectness import ObjectnessMap, TokenScores, patch_objectness, token_scores

__version__ = "0.1.0"
