"""構造保持 (IoU) と外観類似度 (Gram 距離) の指標"""

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from xattn_transfer.domain.entities.analysis import GramMatrix
from xattn_transfer.domain.entities.latent import MaskGrid
from xattn_transfer.domain.errors import InvalidShapeError


def structure_iou(mask_out: MaskGrid, mask_struct: MaskGrid) -> float:
    """|A∩B| / |A∪B|。両方とも空なら 1"""
    if mask_out.shape != mask_struct.shape:
        raise InvalidShapeError(f"mask shapes differ: {mask_out.shape} != {mask_struct.shape}")
    union = np.count_nonzero(mask_out.data | mask_struct.data)
    if union == 0:
        return 1.0
    return float(np.count_nonzero(mask_out.data & mask_struct.data) / union)


def gram_matrix(features: npt.ArrayLike) -> GramMatrix:
    """特徴マップ [C, H, W] (または [C, N]) から G = F·Fᵀ / (C·H·W) を作る"""
    array = np.asarray(features, dtype=np.float64)
    if array.ndim < 2:
        raise InvalidShapeError(f"features must be at least [channels, positions] (got shape {array.shape})")
    unrolled = array.reshape(array.shape[0], -1)
    normalization = float(unrolled.shape[0] * unrolled.shape[1])
    return GramMatrix(matrix=unrolled @ unrolled.T / normalization, normalization=normalization)


def gram_distance(
    features_a: Sequence[npt.ArrayLike],
    features_b: Sequence[npt.ArrayLike],
    layer_weights: Sequence[float] | None = None,
) -> float:
    """Σ_l w_l·‖G_l(a) − G_l(b)‖_F

    Raises:
        InvalidShapeError: レイヤー数・チャネル数・重みの数が一致しない
    """
    if len(features_a) != len(features_b):
        raise InvalidShapeError(f"layer count differs: {len(features_a)} != {len(features_b)}")
    weights = [1.0] * len(features_a) if layer_weights is None else list(layer_weights)
    if len(weights) != len(features_a):
        raise InvalidShapeError(f"{len(weights)} weights for {len(features_a)} layers")

    total = 0.0
    for index, (layer_a, layer_b, weight) in enumerate(zip(features_a, features_b, weights, strict=True)):
        gram_a = gram_matrix(layer_a).matrix
        gram_b = gram_matrix(layer_b).matrix
        if gram_a.shape != gram_b.shape:
            raise InvalidShapeError(f"layer {index}: channel count differs ({gram_a.shape[0]} != {gram_b.shape[0]})")
        total += weight * float(np.linalg.norm(gram_a - gram_b))
    return total
