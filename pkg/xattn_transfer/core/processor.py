"""アテンションレイヤーの処理器と AttentionPlan の検証

デノイザーは各アテンションレイヤーで処理器を呼び出し、K/V の差し替え・
コントラスト・特徴の捕捉はすべてここで行う。処理器は順伝播ごとに生成する。
"""

from collections.abc import Mapping, Sequence
import math
from types import MappingProxyType
from typing import Protocol

import numpy as np
import numpy.typing as npt

from xattn_transfer.core.attention import attend, merge_heads, split_heads
from xattn_transfer.domain.entities.attention import AttentionMode
from xattn_transfer.domain.entities.plan import AttentionPlan, LayerCapture, LayerInfo, LayerLocation
from xattn_transfer.domain.errors import InvalidShapeError, PlanError

FloatArray = npt.NDArray[np.float32]


class AttentionProcessor(Protocol):
    """1 レイヤー分の Q/K/V ([tokens × dim]) を受け取り、ヘッド結合後の出力を返す"""

    def __call__(self, layer: LayerInfo, queries: FloatArray, keys: FloatArray, values: FloatArray) -> FloatArray: ...


def catalog_index(catalog: Sequence[LayerInfo]) -> dict[str, LayerInfo]:
    """layer_id → LayerInfo"""
    return {layer.layer_id: layer for layer in catalog}


def decoder_layers(catalog: Sequence[LayerInfo], resolution: int) -> list[LayerInfo]:
    """指定解像度のデコーダー側レイヤー"""
    return [
        layer for layer in catalog if layer.location is LayerLocation.DECODER and layer.resolution == resolution
    ]


def validate_plan(plan: AttentionPlan, catalog: Sequence[LayerInfo]) -> None:
    """plan がカタログ内のレイヤーだけを参照し、外部特徴の次元が合っているか検査する

    Raises:
        PlanError: 未知のレイヤー、または特徴の欠けた画像間指示
        InvalidShapeError: 外部 K/V の次元がレイヤーと一致しない
    """
    index = catalog_index(catalog)
    unknown = sorted(plan.layer_ids - index.keys())
    if unknown:
        raise PlanError(f"plan references unknown layers: {unknown}")
    for layer_id, directive in plan.directives.items():
        if directive.mode is AttentionMode.SELF_ATTENTION:
            continue
        if directive.keys is None or directive.values is None:
            raise PlanError(f"directive for {layer_id} ({directive.mode}) has no external key/value features")
        layer = index[layer_id]
        keys, values = directive.keys, directive.values
        if keys.ndim != 2 or values.ndim != 2 or keys.shape[0] != values.shape[0]:
            raise InvalidShapeError(f"{layer_id}: external features must be [tokens × dim] with equal token counts")
        if keys.shape[1] != layer.key_dim or values.shape[1] != layer.value_dim:
            raise InvalidShapeError(
                f"{layer_id}: external features have dims ({keys.shape[1]}, {values.shape[1]}), "
                f"layer expects ({layer.key_dim}, {layer.value_dim})"
            )


def resulting_mode(plan: AttentionPlan | None) -> AttentionMode:
    """plan を適用した予測の source_mode"""
    if plan is None:
        return AttentionMode.SELF_ATTENTION
    modes = plan.modes - {AttentionMode.SELF_ATTENTION}
    if AttentionMode.CROSS_IMAGE_STRUCTURE in modes:
        return AttentionMode.CROSS_IMAGE_STRUCTURE
    if AttentionMode.CROSS_IMAGE_APPEARANCE in modes:
        return AttentionMode.CROSS_IMAGE_APPEARANCE
    return AttentionMode.SELF_ATTENTION


class PlanProcessor:
    """AttentionPlan の指示をレイヤー単位で適用する処理器"""

    def __init__(self, plan: AttentionPlan | None, catalog: Sequence[LayerInfo]) -> None:
        self._plan = plan if plan is not None else AttentionPlan()
        validate_plan(self._plan, catalog)
        self._captures: dict[str, LayerCapture] = {}

    @property
    def captures(self) -> Mapping[str, LayerCapture]:
        return MappingProxyType(dict(self._captures))

    def __call__(self, layer: LayerInfo, queries: FloatArray, keys: FloatArray, values: FloatArray) -> FloatArray:
        source_keys, source_values, contrast = keys, values, 1.0
        directive = self._plan.directives.get(layer.layer_id)
        if directive is not None and directive.mode is not AttentionMode.SELF_ATTENTION:
            assert directive.keys is not None and directive.values is not None
            source_keys, source_values = directive.keys, directive.values
            contrast = directive.contrast_factor

        heads = layer.head_count
        scale = 1.0 / math.sqrt(layer.key_dim // heads)
        output, attention_map = attend(
            split_heads(queries, heads),
            split_heads(source_keys, heads),
            split_heads(source_values, heads),
            scale,
            contrast,
        )
        if layer.layer_id in self._plan.capture:
            head_mean = attention_map.weights.mean(axis=0) if self._plan.capture_maps else None
            self._captures[layer.layer_id] = LayerCapture(
                queries=np.array(queries, dtype=np.float32),
                keys=np.array(keys, dtype=np.float32),
                values=np.array(values, dtype=np.float32),
                attention_map=head_mean,
            )
        return merge_heads(output)
