"""numpy だけで動くシード固定の畳み込み特徴抽出器

5 段の conv3×3 + ReLU + 2×2 平均プーリング。重みは He 初期化相当の乱数で、
torchvision が無い環境でも Gram 距離を再現可能に計算するために使う。
"""

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from xattn_transfer.domain.errors import InvalidShapeError

DEFAULT_CHANNELS = (16, 32, 64, 64, 64)


def _conv3x3_relu(features: npt.NDArray[np.float32], weights: npt.NDArray[np.float32]) -> npt.NDArray[np.float32]:
    padded = np.pad(features, ((0, 0), (1, 1), (1, 1)), mode="edge")
    windows = sliding_window_view(padded, (3, 3), axis=(1, 2))  # [C_in, H, W, 3, 3]
    out = np.einsum("chwij,ocij->ohw", windows, weights, optimize=True)
    return np.maximum(out, 0.0).astype(np.float32)


def _avg_pool2(features: npt.NDArray[np.float32]) -> npt.NDArray[np.float32]:
    c, h, w = features.shape
    h2, w2 = h // 2, w // 2
    trimmed = features[:, : h2 * 2, : w2 * 2]
    return trimmed.reshape(c, h2, 2, w2, 2).mean(axis=(2, 4), dtype=np.float32)


class SeededConvFeatureExtractor:
    """各段の ReLU 出力を特徴とする抽出器"""

    def __init__(self, seed: int = 0, channels: Sequence[int] = DEFAULT_CHANNELS) -> None:
        rng = np.random.Generator(np.random.Philox(seed))
        self._weights: list[npt.NDArray[np.float32]] = []
        in_channels = 3
        for out_channels in channels:
            std = np.sqrt(2.0 / (in_channels * 9))
            self._weights.append((rng.standard_normal((out_channels, in_channels, 3, 3)) * std).astype(np.float32))
            in_channels = out_channels
        self._seed = seed

    @property
    def name(self) -> str:
        return f"seeded_conv(seed={self._seed})"

    @property
    def layer_names(self) -> Sequence[str]:
        return [f"conv{index}_relu" for index in range(1, len(self._weights) + 1)]

    @property
    def layer_weights(self) -> Sequence[float]:
        return [1.0] * len(self._weights)

    def extract(self, image: npt.NDArray[np.uint8]) -> list[npt.NDArray[np.float32]]:
        if image.ndim != 3 or image.shape[2] != 3:
            raise InvalidShapeError(f"expected an H×W×3 RGB image (got shape {image.shape})")
        min_side = 2 ** (len(self._weights) - 1)
        if min(image.shape[:2]) < min_side:
            raise InvalidShapeError(f"image must be at least {min_side}×{min_side} pixels (got {image.shape[:2]})")
        features = (np.transpose(image, (2, 0, 1)).astype(np.float32) / 127.5) - 1.0
        outputs: list[npt.NDArray[np.float32]] = []
        for index, weights in enumerate(self._weights):
            if index > 0:
                features = _avg_pool2(features)
            features = _conv3x3_relu(features, weights)
            outputs.append(features)
        return outputs
