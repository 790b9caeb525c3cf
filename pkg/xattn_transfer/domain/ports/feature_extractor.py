"""Gram 距離に使う特徴抽出器の契約定義"""

from collections.abc import Sequence
from typing import Protocol

import numpy as np
import numpy.typing as npt


class FeatureExtractorPort(Protocol):
    """RGB 画像からレイヤーごとの特徴マップ [C, H, W] を取り出す"""

    @property
    def name(self) -> str: ...

    @property
    def layer_names(self) -> Sequence[str]: ...

    @property
    def layer_weights(self) -> Sequence[float]: ...

    def extract(self, image: npt.NDArray[np.uint8]) -> list[npt.NDArray[np.float32]]: ...
