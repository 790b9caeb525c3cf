"""反復番号からレイヤーごとの注入指示を決める"""

from collections.abc import Sequence

from xattn_transfer.core.processor import decoder_layers
from xattn_transfer.domain.entities.attention import AttentionMode
from xattn_transfer.domain.entities.plan import AttentionPlan, LayerDirective, LayerInfo
from xattn_transfer.domain.entities.transfer import TransferConfig
from xattn_transfer.domain.errors import BackboneError


def step_plan(step_index: int, config: TransferConfig, layer_catalog: Sequence[LayerInfo]) -> AttentionPlan:
    """反復番号 step_index (0 がループ先頭、t = T) の AttentionPlan

    注入窓 [lo, hi) の内側にあるデコーダーレイヤーを外観モードにし、
    step_index が structure_injection_period の倍数のステップは構造モードにする。
    窓の外では空の plan (通常の自己アテンション) を返す。
    """
    period = config.structure_injection_period
    mode = (
        AttentionMode.CROSS_IMAGE_STRUCTURE
        if period is not None and step_index % period == 0
        else AttentionMode.CROSS_IMAGE_APPEARANCE
    )
    directives: dict[str, LayerDirective] = {}
    for resolution, (lo, hi) in config.injection_windows.items():
        if not lo <= step_index < hi:
            continue
        for layer in decoder_layers(layer_catalog, resolution):
            directives[layer.layer_id] = LayerDirective(mode=mode, contrast_factor=config.contrast_beta)
    return AttentionPlan(directives=directives)


def injection_layer_ids(config: TransferConfig, layer_catalog: Sequence[LayerInfo]) -> frozenset[str]:
    """注入対象になり得るすべてのレイヤー"""
    return frozenset(
        layer.layer_id for resolution in config.injection_windows for layer in decoder_layers(layer_catalog, resolution)
    )


def require_injection_layers(config: TransferConfig, layer_catalog: Sequence[LayerInfo]) -> None:
    """カタログに両方の注入解像度のデコーダーレイヤーがあるか検査する

    Raises:
        BackboneError: どちらかの解像度のデコーダーレイヤーが無い
    """
    missing = [resolution for resolution in config.injection_windows if not decoder_layers(layer_catalog, resolution)]
    if missing:
        raise BackboneError(f"denoiser catalog has no decoder attention layers at resolutions {missing}")
