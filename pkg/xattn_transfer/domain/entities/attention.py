"""アテンション計算に関わるドメイン型"""

from dataclasses import dataclass, field
from enum import StrEnum
import math

import numpy as np
import numpy.typing as npt

from xattn_transfer.domain.errors import InvalidShapeError


class AttentionMode(StrEnum):
    """どのブランチが K/V を供給するか"""

    SELF_ATTENTION = "self_attention"
    CROSS_IMAGE_APPEARANCE = "cross_image_appearance"
    CROSS_IMAGE_STRUCTURE = "cross_image_structure"


@dataclass(frozen=True, slots=True)
class AttentionContext:
    """1 レイヤー分の Q/K/V 射影

    Attributes:
        queries: [num_queries × d]
        keys: [num_keys × d]
        values: [num_keys × d_v]
        head_count: ヘッド数 (d と d_v を割り切る)
        scale: ロジットに掛ける係数。None の場合はヘッド次元から 1/√d を導出する
    """

    queries: npt.NDArray[np.floating]
    keys: npt.NDArray[np.floating]
    values: npt.NDArray[np.floating]
    head_count: int = 1
    scale: float | None = field(default=None)

    def __post_init__(self) -> None:
        if self.queries.ndim != 2 or self.keys.ndim != 2 or self.values.ndim != 2:
            raise InvalidShapeError("queries, keys and values must be 2-D matrices")
        if self.queries.shape[1] != self.keys.shape[1]:
            raise InvalidShapeError(
                f"queries/keys inner dimension differs: {self.queries.shape[1]} != {self.keys.shape[1]}"
            )
        if self.keys.shape[0] != self.values.shape[0]:
            raise InvalidShapeError(f"keys/values row count differs: {self.keys.shape[0]} != {self.values.shape[0]}")
        if self.head_count < 1:
            raise InvalidShapeError(f"head_count must be positive (got {self.head_count})")
        if self.queries.shape[1] % self.head_count or self.values.shape[1] % self.head_count:
            raise InvalidShapeError("feature dimensions must be divisible by head_count")
        if self.scale is None:
            object.__setattr__(self, "scale", 1.0 / math.sqrt(self.head_dim))
        elif self.scale <= 0:
            raise InvalidShapeError(f"scale must be positive (got {self.scale})")

    @property
    def head_dim(self) -> int:
        """1 ヘッドあたりのキー次元"""
        return self.queries.shape[1] // self.head_count

    @property
    def effective_scale(self) -> float:
        """__post_init__ で確定したスケール"""
        assert self.scale is not None
        return self.scale


@dataclass(frozen=True, slots=True)
class AttentionMap:
    """softmax 済み (またはコントラスト後の) アテンション重み

    形状は [..., num_queries, num_keys]。先頭の次元はヘッドやバッチに使う。
    コントラスト後は負の要素を含み得る。
    """

    weights: npt.NDArray[np.floating]

    def __post_init__(self) -> None:
        if self.weights.ndim < 2:
            raise InvalidShapeError(f"attention map must be at least 2-D (got shape {self.weights.shape})")

    @property
    def num_queries(self) -> int:
        return self.weights.shape[-2]

    @property
    def num_keys(self) -> int:
        return self.weights.shape[-1]
