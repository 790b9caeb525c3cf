"""対応抽出と評価指標のドメイン型"""

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

from xattn_transfer.domain.errors import InvalidShapeError


class Aggregation(StrEnum):
    """複数レイヤーのアテンションマップの集約方法"""

    SINGLE_LAYER = "single_layer"
    MEAN = "mean"


@dataclass(frozen=True, slots=True)
class CorrespondenceMap:
    """構造画像の各画素が対応する外観画像の (row, col)

    confidence は勝者キーのアテンション重み、low_confidence はその重みが
    一様分布に近い画素のフラグ。
    """

    rows: npt.NDArray[np.int64]
    cols: npt.NDArray[np.int64]
    confidence: npt.NDArray[np.float32]
    low_confidence: npt.NDArray[np.bool_]
    source_shape: tuple[int, int]

    def __post_init__(self) -> None:
        shape = self.rows.shape
        if len(shape) != 2 or any(a.shape != shape for a in (self.cols, self.confidence, self.low_confidence)):
            raise InvalidShapeError("correspondence grids must share one 2-D shape")
        height, width = self.source_shape
        if self.rows.size and (self.rows.min() < 0 or self.rows.max() >= height):
            raise InvalidShapeError("row indices out of bounds")
        if self.cols.size and (self.cols.min() < 0 or self.cols.max() >= width):
            raise InvalidShapeError("column indices out of bounds")

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape[0], self.rows.shape[1]

    @property
    def flat_indices(self) -> npt.NDArray[np.int64]:
        """外観グリッド上の平坦インデックス"""
        return self.rows * self.source_shape[1] + self.cols


@dataclass(frozen=True, slots=True)
class GramMatrix:
    """1 レイヤーの Gram 行列 G = F·Fᵀ / (C·H·W)"""

    matrix: npt.NDArray[np.float64]
    normalization: float


class EvaluationRow(BaseModel):
    """1 ペアの評価結果 (指標が計算できない場合は None)"""

    model_config = ConfigDict(frozen=True)

    pair_id: str
    domain: str = ""
    structure_iou: float | None = None
    gram_distance: float | None = None
    note: str = ""


class DomainSummary(BaseModel):
    """ドメインごとの平均"""

    model_config = ConfigDict(frozen=True)

    domain: str
    pair_count: int
    mean_structure_iou: float | None = None
    mean_gram_distance: float | None = None


class EvaluationReport(BaseModel):
    """評価全体の結果"""

    rows: list[EvaluationRow]
    domains: list[DomainSummary]
    mean_structure_iou: float | None = None
    mean_gram_distance: float | None = None
    extractor: str = ""
    extractor_layers: list[str] = []
