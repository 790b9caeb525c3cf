"""AdaIN マスクの供給戦略 (ファイル・アテンション推定・なし)"""

from collections.abc import Sequence
import logging
from pathlib import Path

import numpy as np
import numpy.typing as npt
from scipy import ndimage

from xattn_transfer.adapters.gateways.image_io import load_mask_file
from xattn_transfer.adapters.masks.otsu import threshold_otsu
from xattn_transfer.core.processor import decoder_layers
from xattn_transfer.domain.entities.latent import MaskGrid
from xattn_transfer.domain.entities.plan import LayerInfo
from xattn_transfer.domain.entities.transfer import MaskPair, MaskStrategy, StepObservation
from xattn_transfer.use_cases.correspondence import cross_attention_map, token_grid

logger = logging.getLogger(__name__)


class NullMaskProvider:
    """常にマスクなし"""

    @property
    def strategy(self) -> MaskStrategy:
        return MaskStrategy.NONE

    def observe(self, observation: StepObservation) -> None:
        return None

    def masks(self, spatial_shape: tuple[int, int]) -> MaskPair | None:
        return None


class UserFileMaskProvider:
    """ユーザーが用意したマスクファイル (画像または .xt) を潜在サイズに合わせて返す

    Args:
        structure_mask: 構造画像のマスク (出力ブランチに使う)
        appearance_mask: 外観画像のマスク
    """

    def __init__(self, structure_mask: Path | None, appearance_mask: Path | None) -> None:
        self._structure_mask = structure_mask
        self._appearance_mask = appearance_mask

    @property
    def strategy(self) -> MaskStrategy:
        return MaskStrategy.USER_FILE

    def observe(self, observation: StepObservation) -> None:
        return None

    def masks(self, spatial_shape: tuple[int, int]) -> MaskPair | None:
        target = load_mask_file(self._structure_mask, spatial_shape) if self._structure_mask else None
        reference = load_mask_file(self._appearance_mask, spatial_shape) if self._appearance_mask else None
        if target is None and reference is None:
            return None
        return MaskPair(target=target, reference=reference)


def _otsu_mask(mass: npt.NDArray[np.float64], spatial_shape: tuple[int, int]) -> MaskGrid | None:
    factors = (spatial_shape[0] / mass.shape[0], spatial_shape[1] / mass.shape[1])
    resized = ndimage.zoom(mass, factors, order=1) if factors != (1.0, 1.0) else mass
    mask = resized > threshold_otsu(resized)
    if np.count_nonzero(mask) < 2:
        return None
    return MaskGrid(mask)


class AttentionDerivedMaskProvider:
    """画像間アテンションの質量をステップ平均し、大津の閾値で前景を推定する

    外観側マスクは「出力のクエリが各外観画素に向けた重み」、出力側マスクは
    「外観のクエリが各出力画素に向けた重み」の平均から作る。
    まだ何も観測していないとき、または前景が 2 画素未満のときは None を返す。
    """

    def __init__(self, catalog: Sequence[LayerInfo], resolution: int = 32) -> None:
        self._layers = decoder_layers(catalog, resolution)
        self._output_mass: npt.NDArray[np.float64] | None = None
        self._appearance_mass: npt.NDArray[np.float64] | None = None
        self._observed = 0

    @property
    def strategy(self) -> MaskStrategy:
        return MaskStrategy.ATTENTION_DERIVED

    def observe(self, observation: StepObservation) -> None:
        for layer in self._layers:
            out_capture = observation.output_captures.get(layer.layer_id)
            app_capture = observation.appearance_captures.get(layer.layer_id)
            if out_capture is None or app_capture is None:
                continue
            grid = token_grid(layer)
            to_appearance = cross_attention_map(out_capture.queries, app_capture.keys, layer).mean(axis=0)
            to_output = cross_attention_map(app_capture.queries, out_capture.keys, layer).mean(axis=0)
            appearance_mass = to_appearance.reshape(grid).astype(np.float64)
            output_mass = to_output.reshape(grid).astype(np.float64)
            if self._appearance_mass is None or self._output_mass is None:
                self._appearance_mass, self._output_mass = appearance_mass, output_mass
            else:
                self._appearance_mass = self._appearance_mass + appearance_mass
                self._output_mass = self._output_mass + output_mass
            self._observed += 1

    def masks(self, spatial_shape: tuple[int, int]) -> MaskPair | None:
        if self._observed == 0 or self._output_mass is None or self._appearance_mass is None:
            logger.warning("No cross-image attention observed yet; AdaIN runs unmasked")
            return None
        target = _otsu_mask(self._output_mass / self._observed, spatial_shape)
        reference = _otsu_mask(self._appearance_mass / self._observed, spatial_shape)
        if target is None or reference is None:
            logger.warning("Attention-derived mask selects fewer than 2 pixels; AdaIN runs unmasked")
            return None
        return MaskPair(target=target, reference=reference)
