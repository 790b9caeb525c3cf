"""潜在表現・マスク・ノイズ予測のドメイン型"""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from xattn_transfer.domain.entities.attention import AttentionMode
from xattn_transfer.domain.errors import DegenerateMaskError, InvalidShapeError

FloatArray = npt.NDArray[np.float32]


@dataclass(frozen=True, slots=True)
class LatentGrid:
    """channels × height × width の (ノイズ付き) 潜在コード z_t

    データは常に float32 で保持する。
    """

    data: FloatArray
    timestep_index: int = 0

    def __post_init__(self) -> None:
        array = np.asarray(self.data, dtype=np.float32)
        if array.ndim != 3:
            raise InvalidShapeError(f"latent must be [channels, height, width] (got shape {array.shape})")
        if min(array.shape) < 1:
            raise InvalidShapeError(f"latent dimensions must be positive (got shape {array.shape})")
        if not np.all(np.isfinite(array)):
            raise InvalidShapeError("latent contains non-finite entries")
        if self.timestep_index < 0:
            raise InvalidShapeError(f"timestep_index must be >= 0 (got {self.timestep_index})")
        object.__setattr__(self, "data", array)

    @property
    def shape(self) -> tuple[int, int, int]:
        channels, height, width = self.data.shape
        return channels, height, width

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    def replace(self, data: npt.ArrayLike, timestep_index: int | None = None) -> "LatentGrid":
        """データだけ差し替えた新しいグリッドを返す"""
        index = self.timestep_index if timestep_index is None else timestep_index
        return LatentGrid(np.asarray(data, dtype=np.float32), index)


@dataclass(frozen=True, slots=True)
class MaskGrid:
    """height × width の二値マスク (前景 = True)"""

    data: npt.NDArray[np.bool_]

    def __post_init__(self) -> None:
        array = np.asarray(self.data)
        if array.ndim != 2:
            raise InvalidShapeError(f"mask must be [height, width] (got shape {array.shape})")
        if array.dtype != np.bool_:
            if not np.all(np.isin(array, (0, 1))):
                raise InvalidShapeError("mask entries must be 0 or 1")
            array = array.astype(np.bool_)
        object.__setattr__(self, "data", array)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    @property
    def selected_count(self) -> int:
        return int(np.count_nonzero(self.data))

    def require_statistics_support(self) -> None:
        """統計量計算に必要な 2 画素以上が選択されているか検査する

        Raises:
            DegenerateMaskError: 選択画素が 2 未満
        """
        if self.selected_count < 2:
            raise DegenerateMaskError(f"mask selects {self.selected_count} pixel(s); at least 2 are required")


@dataclass(frozen=True, slots=True)
class NoisePrediction:
    """デノイザーが返したノイズ予測 ε と、それを生んだアテンションモード"""

    epsilon: FloatArray
    source_mode: AttentionMode = AttentionMode.SELF_ATTENTION

    def __post_init__(self) -> None:
        array = np.asarray(self.epsilon, dtype=np.float32)
        if array.ndim != 3:
            raise InvalidShapeError(f"noise prediction must be [channels, height, width] (got shape {array.shape})")
        object.__setattr__(self, "epsilon", array)

    @property
    def shape(self) -> tuple[int, int, int]:
        channels, height, width = self.epsilon.shape
        return channels, height, width
