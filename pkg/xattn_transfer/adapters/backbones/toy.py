"""オラクル検証用の決定的なトイデノイザーと潜在コーデック

4 チャネル 8×8 の潜在をトークン列 (64 × 4) として扱い、入力射影 → 3 つの
アテンションレイヤー (残差接続) → 線形出力ヘッドでノイズを予測する。
アテンションはすべて PlanProcessor を通るので、K/V 差し替えは実モデルと同じ経路で効く。
"""

from collections.abc import Sequence
from dataclasses import dataclass
import hashlib
import logging
import math
from pathlib import Path

import numpy as np
import numpy.typing as npt
from PIL import Image

from xattn_transfer.adapters.gateways.tensor_store import read_tensors, write_tensors
from xattn_transfer.core.processor import PlanProcessor, resulting_mode
from xattn_transfer.domain.entities.latent import LatentGrid, NoisePrediction
from xattn_transfer.domain.entities.plan import AttentionPlan, DenoiserOutput, LayerInfo, LayerLocation
from xattn_transfer.domain.errors import BackboneError, InvalidShapeError

logger = logging.getLogger(__name__)

TOY_CHANNELS = 4
TOY_SIZE = 8
TOY_MODEL_DIM = 8
TOY_HEADS = 4
TOY_WEIGHTS_KIND = "toy_weights"

TOY_CATALOG: tuple[LayerInfo, ...] = tuple(
    LayerInfo(
        layer_id=layer_id,
        resolution=resolution,
        location=location,
        token_count=TOY_SIZE * TOY_SIZE,
        key_dim=TOY_MODEL_DIM,
        value_dim=TOY_MODEL_DIM,
        head_count=TOY_HEADS,
    )
    for layer_id, resolution, location in (
        ("encoder.attn_64", 64, LayerLocation.ENCODER),
        ("decoder.attn_32", 32, LayerLocation.DECODER),
        ("decoder.attn_64", 64, LayerLocation.DECODER),
    )
)


@dataclass(frozen=True, slots=True)
class ToyWeights:
    """トイデノイザーの重み (レイヤー方向に積んだ射影行列)"""

    input_proj: npt.NDArray[np.float32]
    query: npt.NDArray[np.float32]
    key: npt.NDArray[np.float32]
    value: npt.NDArray[np.float32]
    output: npt.NDArray[np.float32]
    output_head: npt.NDArray[np.float32]

    @classmethod
    def from_seed(cls, seed: int = 0) -> "ToyWeights":
        """seed から重みを決定的に生成する"""
        rng = np.random.Generator(np.random.Philox(key=seed))
        layers = len(TOY_CATALOG)
        dim = TOY_MODEL_DIM

        def draw(shape: tuple[int, ...], gain: float) -> npt.NDArray[np.float32]:
            return (rng.standard_normal(shape) * gain).astype(np.float32)

        return cls(
            input_proj=draw((TOY_CHANNELS, dim), 1.0 / math.sqrt(TOY_CHANNELS)),
            query=draw((layers, dim, dim), 1.0 / math.sqrt(dim)),
            key=draw((layers, dim, dim), 1.0 / math.sqrt(dim)),
            value=draw((layers, dim, dim), 1.0 / math.sqrt(dim)),
            output=draw((layers, dim, dim), 0.5 / math.sqrt(dim)),
            output_head=draw((dim, TOY_CHANNELS), 1.0 / math.sqrt(dim)),
        )

    def tensors(self) -> dict[str, npt.NDArray[np.float32]]:
        return {
            "input_proj": self.input_proj,
            "query": self.query,
            "key": self.key,
            "value": self.value,
            "output": self.output,
            "output_head": self.output_head,
        }

    def digest(self) -> str:
        sha = hashlib.sha256()
        for name, tensor in self.tensors().items():
            sha.update(name.encode())
            sha.update(np.ascontiguousarray(tensor).tobytes())
        return sha.hexdigest()[:12]


def _prompt_bias(conditioning: str) -> float:
    # プロンプトはハッシュ由来のスカラーバイアスとしてだけ効く
    digest = hashlib.sha256(conditioning.encode("utf-8")).digest()
    return (int.from_bytes(digest[:4], "little") / 2**32 - 0.5) * 0.2


def _timestep_bias(t: int) -> float:
    return 0.1 * math.sin(t / 10.0)


class ToyDenoiser:
    """重み固定の小さなアテンションネットワーク

    Args:
        weights: 重み。省略時は seed から生成する
        seed: 重み生成の seed
        ablated_layers: アテンションを恒等写像にする (残差に何も足さない) レイヤー
    """

    def __init__(
        self,
        weights: ToyWeights | None = None,
        *,
        seed: int = 0,
        ablated_layers: frozenset[str] = frozenset(),
    ) -> None:
        self._weights = weights if weights is not None else ToyWeights.from_seed(seed)
        unknown = ablated_layers - {layer.layer_id for layer in TOY_CATALOG}
        if unknown:
            raise BackboneError(f"cannot ablate unknown layers: {sorted(unknown)}")
        self._ablated = ablated_layers

    @classmethod
    def from_file(cls, path: Path, *, ablated_layers: frozenset[str] = frozenset()) -> "ToyDenoiser":
        """save_weights で保存した重みから構築する"""
        kind, tensors, _ = read_tensors(path)
        if kind != TOY_WEIGHTS_KIND:
            raise BackboneError(f"{path} holds {kind!r}, not toy weights")
        try:
            weights = ToyWeights(**tensors)
        except TypeError as e:
            raise BackboneError(f"{path}: unexpected toy weight tensors ({sorted(tensors)})") from e
        return cls(weights, ablated_layers=ablated_layers)

    def save_weights(self, path: Path) -> None:
        write_tensors(path, TOY_WEIGHTS_KIND, self._weights.tensors(), meta={"digest": self._weights.digest()})

    @property
    def layer_catalog(self) -> Sequence[LayerInfo]:
        return TOY_CATALOG

    @property
    def fingerprint(self) -> str:
        suffix = f"-ablated:{','.join(sorted(self._ablated))}" if self._ablated else ""
        return f"toy-{self._weights.digest()}{suffix}"

    def predict(
        self,
        latent: LatentGrid,
        t: int,
        conditioning: str,
        plan: AttentionPlan | None = None,
    ) -> DenoiserOutput:
        if latent.shape != (TOY_CHANNELS, TOY_SIZE, TOY_SIZE):
            raise InvalidShapeError(
                f"toy denoiser expects latents of shape {(TOY_CHANNELS, TOY_SIZE, TOY_SIZE)} (got {latent.shape})"
            )
        processor = PlanProcessor(plan, TOY_CATALOG)
        weights = self._weights
        tokens = latent.data.reshape(TOY_CHANNELS, -1).T
        hidden = tokens @ weights.input_proj + np.float32(_timestep_bias(t) + _prompt_bias(conditioning))
        for index, layer in enumerate(TOY_CATALOG):
            if layer.layer_id in self._ablated:
                continue
            queries = hidden @ weights.query[index]
            keys = hidden @ weights.key[index]
            values = hidden @ weights.value[index]
            hidden = hidden + processor(layer, queries, keys, values) @ weights.output[index]
        epsilon = (hidden @ weights.output_head).T.reshape(latent.shape)
        return DenoiserOutput(
            prediction=NoisePrediction(epsilon, resulting_mode(plan)),
            captures=processor.captures,
        )


class ToyLatentCodec:
    """8 ビット RGB 画像と 4×8×8 潜在の変換

    画像を 8×8 に縮小して [−1, 1] に写し、4 チャネル目に輝度を置く。
    デコードは先頭 3 チャネルを使う。
    """

    def encode(self, image: npt.NDArray[np.uint8]) -> LatentGrid:
        if image.ndim != 3 or image.shape[2] != 3:
            raise InvalidShapeError(f"expected an RGB image (got shape {image.shape})")
        resized = Image.fromarray(image).resize((TOY_SIZE, TOY_SIZE), Image.Resampling.BILINEAR)
        rgb = np.asarray(resized, dtype=np.float32) / 127.5 - 1.0
        luminance = rgb @ np.array([0.299, 0.587, 0.114], dtype=np.float32)
        return LatentGrid(np.concatenate([rgb.transpose(2, 0, 1), luminance[None]], axis=0))

    def decode(self, latent: LatentGrid) -> npt.NDArray[np.uint8]:
        if latent.channels < 3:
            raise InvalidShapeError(f"need at least 3 channels to decode (got {latent.channels})")
        rgb = (latent.data[:3].transpose(1, 2, 0) + 1.0) * 127.5
        return np.clip(np.round(rgb), 0, 255).astype(np.uint8)
