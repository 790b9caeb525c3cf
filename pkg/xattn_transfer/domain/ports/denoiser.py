"""デノイザーと潜在コーデックの契約定義"""

from collections.abc import Sequence
from typing import Protocol

import numpy as np
import numpy.typing as npt

from xattn_transfer.domain.entities.latent import LatentGrid
from xattn_transfer.domain.entities.plan import AttentionPlan, DenoiserOutput, LayerInfo


class DenoiserPort(Protocol):
    """ノイズ予測器 ε_θ の契約

    予測に影響する状態は構築後に変えず、並行に呼び出せること (キャッシュはロックで守る)。
    捕捉した特徴は戻り値で返し、インスタンスに保持してはならない。同じ入力には同じ予測を返す。
    """

    @property
    def layer_catalog(self) -> Sequence[LayerInfo]: ...

    @property
    def fingerprint(self) -> str: ...

    def predict(
        self,
        latent: LatentGrid,
        t: int,
        conditioning: str,
        plan: AttentionPlan | None = None,
    ) -> DenoiserOutput: ...


class LatentCodecPort(Protocol):
    """画像 (H×W×3 uint8) と潜在グリッドの相互変換"""

    def encode(self, image: npt.NDArray[np.uint8]) -> LatentGrid: ...

    def decode(self, latent: LatentGrid) -> npt.NDArray[np.uint8]: ...
