"""潜在グリッドの統計量合わせ (AdaIN とマスク版 AdaIN)"""

import numpy as np
import numpy.typing as npt

from xattn_transfer.domain.entities.latent import LatentGrid, MaskGrid
from xattn_transfer.domain.errors import ConfigError, InvalidShapeError

DEFAULT_EPSILON = 1e-5


def _selected_pixels(latent: LatentGrid, mask: MaskGrid | None) -> npt.NDArray[np.float64]:
    flat = latent.data.reshape(latent.channels, -1).astype(np.float64)
    if mask is None:
        return flat
    if mask.shape != latent.spatial_shape:
        raise InvalidShapeError(f"mask shape {mask.shape} does not match latent spatial shape {latent.spatial_shape}")
    mask.require_statistics_support()
    return flat[:, mask.data.reshape(-1)]


def channel_statistics(
    latent: LatentGrid,
    mask: MaskGrid | None = None,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """チャネルごとの平均と母標準偏差 (マスクがあれば選択画素のみ)

    Raises:
        InvalidShapeError: マスク形状が潜在の空間形状と異なる
        DegenerateMaskError: マスクの選択画素が 2 未満
    """
    pixels = _selected_pixels(latent, mask)
    return pixels.mean(axis=1), pixels.std(axis=1)


def adain(
    target: LatentGrid,
    reference: LatentGrid,
    target_mask: MaskGrid | None = None,
    reference_mask: MaskGrid | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> LatentGrid:
    """target の各チャネルを reference の平均・標準偏差に合わせる

    (target − μ_t)/(σ_t + ε)·σ_r + μ_r。統計量はそれぞれ自分のマスクで計算し、
    target_mask があればその画素だけを書き換える。
    """
    if target.channels != reference.channels:
        raise InvalidShapeError(f"channel count differs: {target.channels} != {reference.channels}")
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive (got {epsilon})")

    mean_t, std_t = channel_statistics(target, target_mask)
    mean_r, std_r = channel_statistics(reference, reference_mask)
    # 統計量が完全一致するなら恒等変換
    if np.array_equal(mean_t, mean_r) and np.array_equal(std_t, std_r):
        return target

    flat = target.data.reshape(target.channels, -1)
    normalized = (flat.astype(np.float64) - mean_t[:, None]) / (std_t[:, None] + epsilon)
    aligned = (normalized * std_r[:, None] + mean_r[:, None]).astype(np.float32)
    if target_mask is None:
        result = aligned
    else:
        selected = target_mask.data.reshape(-1)
        result = flat.copy()
        result[:, selected] = aligned[:, selected]
    return target.replace(result.reshape(target.shape))
