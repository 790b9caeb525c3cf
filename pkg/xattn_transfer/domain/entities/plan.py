"""レイヤーカタログと AttentionPlan"""

from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from enum import StrEnum
from types import MappingProxyType

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from xattn_transfer.domain.entities.attention import AttentionMode
from xattn_transfer.domain.entities.latent import NoisePrediction


class LayerLocation(StrEnum):
    """U-Net 内のレイヤー位置"""

    ENCODER = "encoder"
    DECODER = "decoder"


class LayerInfo(BaseModel):
    """レイヤーカタログの 1 エントリ

    resolution は実モデルでの出力解像度 (32 なら 32×32)。
    トイモデルでは名目上の値で、実トークン数は token_count に持つ。
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    layer_id: str
    resolution: int = Field(ge=1)
    location: LayerLocation
    token_count: int = Field(ge=1)
    key_dim: int = Field(ge=1)
    value_dim: int = Field(ge=1)
    head_count: int = Field(default=1, ge=1)


@dataclass(frozen=True, slots=True)
class LayerCapture:
    """1 レイヤーで捕捉した自前の射影とアテンションマップ

    attention_map はヘッド平均した softmax 直後 (コントラスト前) のマップ。
    """

    queries: npt.NDArray[np.float32]
    keys: npt.NDArray[np.float32]
    values: npt.NDArray[np.float32]
    attention_map: npt.NDArray[np.float32] | None = None


@dataclass(frozen=True, slots=True)
class LayerDirective:
    """1 レイヤーへの指示: どの K/V を使い、どれだけコントラストを掛けるか"""

    mode: AttentionMode
    contrast_factor: float = 1.0
    keys: npt.NDArray[np.float32] | None = None
    values: npt.NDArray[np.float32] | None = None

    @property
    def has_features(self) -> bool:
        return self.keys is not None and self.values is not None


@dataclass(frozen=True, slots=True)
class AttentionPlan:
    """1 回の順伝播に対するレイヤーごとの指示と捕捉フラグ"""

    directives: Mapping[str, LayerDirective] = field(default_factory=lambda: MappingProxyType({}))
    capture: frozenset[str] = frozenset()
    capture_maps: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "directives", MappingProxyType(dict(self.directives)))

    @property
    def is_empty(self) -> bool:
        """指示が 1 つもない (通常の自己アテンションと同じ)"""
        return not self.directives

    @property
    def modes(self) -> frozenset[AttentionMode]:
        return frozenset(directive.mode for directive in self.directives.values())

    @property
    def layer_ids(self) -> frozenset[str]:
        return frozenset(self.directives) | self.capture

    def with_capture(self, layer_ids: frozenset[str] | set[str], *, maps: bool | None = None) -> "AttentionPlan":
        """捕捉対象レイヤーを差し替えた plan を返す"""
        return AttentionPlan(
            directives=self.directives,
            capture=frozenset(layer_ids),
            capture_maps=self.capture_maps if maps is None else maps,
        )

    def with_features(self, features: Mapping[str, LayerCapture]) -> "AttentionPlan":
        """各指示に外部 K/V を埋めた plan を返す

        features に無いレイヤーの指示はそのまま残す (予測時に PlanError になる)。
        """
        filled: dict[str, LayerDirective] = {}
        for layer_id, directive in self.directives.items():
            source = features.get(layer_id)
            if source is None:
                filled[layer_id] = directive
            else:
                filled[layer_id] = replace(directive, keys=source.keys, values=source.values)
        return AttentionPlan(directives=filled, capture=self.capture, capture_maps=self.capture_maps)


@dataclass(frozen=True, slots=True)
class DenoiserOutput:
    """予測と、捕捉したレイヤー特徴"""

    prediction: NoisePrediction
    captures: Mapping[str, LayerCapture] = field(default_factory=lambda: MappingProxyType({}))
