"""転写ループ中の画像間アテンションから意味的対応を取り出すユースケース"""

from collections.abc import Sequence
from dataclasses import dataclass
import logging
import math

import numpy as np
import numpy.typing as npt

from xattn_transfer.core.attention import compute_attention_map, split_heads
from xattn_transfer.core.correspondence import extract_correspondences
from xattn_transfer.core.processor import decoder_layers
from xattn_transfer.domain.entities.analysis import Aggregation, CorrespondenceMap
from xattn_transfer.domain.entities.latent import LatentGrid
from xattn_transfer.domain.entities.plan import LayerInfo
from xattn_transfer.domain.entities.transfer import StepObservation, TransferConfig, TransferResult
from xattn_transfer.domain.errors import ConfigError, InvalidShapeError
from xattn_transfer.domain.ports.denoiser import DenoiserPort
from xattn_transfer.domain.ports.inversion_cache import InversionCachePort
from xattn_transfer.use_cases.appearance_transfer import AppearanceTransferUseCase

logger = logging.getLogger(__name__)


def token_grid(layer: LayerInfo) -> tuple[int, int]:
    """レイヤーのトークン列を正方グリッドとみなした形状"""
    side = math.isqrt(layer.token_count)
    if side * side != layer.token_count:
        raise InvalidShapeError(f"{layer.layer_id}: {layer.token_count} tokens do not form a square grid")
    return side, side


def cross_attention_map(
    queries: npt.NDArray[np.float32],
    keys: npt.NDArray[np.float32],
    layer: LayerInfo,
) -> npt.NDArray[np.float32]:
    """softmax(Q_out·K_appᵀ) のヘッド平均"""
    heads = layer.head_count
    scale = 1.0 / math.sqrt(layer.key_dim // heads)
    attention_map = compute_attention_map(split_heads(queries, heads), split_heads(keys, heads), scale)
    return attention_map.weights.mean(axis=0)


class CorrespondenceCollector:
    """指定ステップ・指定解像度のデコーダーレイヤーで Q_out·K_app マップを保存する"""

    def __init__(self, catalog: Sequence[LayerInfo], step_index: int, resolution: int) -> None:
        self._layers = decoder_layers(catalog, resolution)
        if not self._layers:
            raise ConfigError(f"no decoder attention layers at resolution {resolution}")
        self._step_index = step_index
        self.maps: dict[str, npt.NDArray[np.float32]] = {}

    @property
    def grid_shape(self) -> tuple[int, int]:
        return token_grid(self._layers[0])

    def observe(self, observation: StepObservation) -> None:
        if observation.step_index != self._step_index:
            return
        for layer in self._layers:
            out_capture = observation.output_captures.get(layer.layer_id)
            app_capture = observation.appearance_captures.get(layer.layer_id)
            if out_capture is None or app_capture is None:
                continue
            self.maps[layer.layer_id] = cross_attention_map(out_capture.queries, app_capture.keys, layer)


@dataclass(frozen=True, slots=True)
class CorrespondenceResult:
    """対応マップと、同時に得られた転写結果"""

    correspondence: CorrespondenceMap
    maps: dict[str, npt.NDArray[np.float32]]
    transfer: TransferResult


class CorrespondenceUseCase:
    """転写を走らせながら対応マップを抽出する"""

    def __init__(
        self,
        denoiser: DenoiserPort,
        config: TransferConfig,
        *,
        aggregation: Aggregation = Aggregation.MEAN,
        layer: str | None = None,
        cache: InversionCachePort | None = None,
    ) -> None:
        self._denoiser = denoiser
        self._config = config
        self._aggregation = aggregation
        self._layer = layer
        self._cache = cache

    def run(self, structure: LatentGrid, appearance: LatentGrid) -> CorrespondenceResult:
        config = self._config
        collector = CorrespondenceCollector(
            self._denoiser.layer_catalog,
            config.effective_correspondence_step,
            config.correspondence_resolution,
        )
        use_case = AppearanceTransferUseCase(self._denoiser, config, observers=[collector], cache=self._cache)
        result = use_case.run(structure, appearance)
        grid = collector.grid_shape
        logger.info(
            "Extracting correspondences from %d map(s) at step %d",
            len(collector.maps),
            config.effective_correspondence_step,
        )
        correspondence = extract_correspondences(
            collector.maps,
            query_shape=grid,
            key_shape=grid,
            aggregation=self._aggregation,
            layer=self._layer,
            low_confidence_factor=config.low_confidence_factor,
        )
        return CorrespondenceResult(correspondence=correspondence, maps=collector.maps, transfer=result)
