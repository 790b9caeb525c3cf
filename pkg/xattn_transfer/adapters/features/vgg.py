"""torchvision の VGG19 による特徴抽出器 (追加依存 `sd` が必要)"""

# pyright: reportUnknownMemberType=false, reportUnknownVariableType=false, reportUnknownArgumentType=false
# pyright: reportMissingImports=false, reportAttributeAccessIssue=false

from collections.abc import Sequence
import logging
from typing import Any

import numpy as np
import numpy.typing as npt

from xattn_transfer.domain.errors import BackboneError, InvalidShapeError

logger = logging.getLogger(__name__)

# torchvision vgg19().features における ReLU の位置
VGG19_LAYERS: dict[str, int] = {
    "relu1_1": 1,
    "relu2_1": 6,
    "relu3_1": 11,
    "relu4_1": 20,
    "relu5_1": 29,
}
IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


class VGG19FeatureExtractor:
    """ImageNet 学習済み VGG19 の relu{1..5}_1 を等重みで使う"""

    def __init__(self, device: str = "cpu") -> None:
        try:
            import torch
            from torchvision.models import VGG19_Weights, vgg19
        except ImportError as e:
            raise BackboneError("VGG19 features need torch and torchvision (install the 'sd' extra)") from e
        self._torch: Any = torch
        self._device = device
        last = max(VGG19_LAYERS.values())
        logger.info("Loading VGG19 weights on %s", device)
        self._model: Any = vgg19(weights=VGG19_Weights.IMAGENET1K_V1).features[: last + 1].eval().to(device)
        self._model.requires_grad_(False)

    @property
    def name(self) -> str:
        return "vgg19"

    @property
    def layer_names(self) -> Sequence[str]:
        return list(VGG19_LAYERS)

    @property
    def layer_weights(self) -> Sequence[float]:
        return [1.0] * len(VGG19_LAYERS)

    def extract(self, image: npt.NDArray[np.uint8]) -> list[npt.NDArray[np.float32]]:
        if image.ndim != 3 or image.shape[2] != 3:
            raise InvalidShapeError(f"expected an H×W×3 RGB image (got shape {image.shape})")
        torch = self._torch
        normalized = (image.astype(np.float32) / 255.0 - IMAGENET_MEAN) / IMAGENET_STD
        x = torch.from_numpy(np.transpose(normalized, (2, 0, 1))[None].copy()).to(self._device)
        wanted = {index: name for name, index in VGG19_LAYERS.items()}
        outputs: list[npt.NDArray[np.float32]] = []
        with torch.no_grad():
            for index, module in enumerate(self._model):
                x = module(x)
                if index in wanted:
                    outputs.append(x[0].float().cpu().numpy())
        return outputs
