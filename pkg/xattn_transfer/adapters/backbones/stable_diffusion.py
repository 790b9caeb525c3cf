"""diffusers の Stable Diffusion を DenoiserPort として使うアダプター (追加依存 `sd`)

U-Net の自己アテンション (`attn1`) をすべてブリッジ処理器に差し替え、Q/K/V を
numpy に移して PlanProcessor で処理する。K/V 差し替えとコントラストの意味は
トイデノイザーと同じ経路になる。
"""

# pyright: reportUnknownMemberType=false, reportUnknownVariableType=false, reportUnknownArgumentType=false
# pyright: reportMissingImports=false, reportAttributeAccessIssue=false
# torch/diffusersの型情報が不完全なため、このファイルでは一部の型チェックを緩和

from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
import hashlib
import logging
import re
import threading
from typing import Any

import numpy as np
import numpy.typing as npt
from PIL import Image

from xattn_transfer.core.processor import PlanProcessor, resulting_mode
from xattn_transfer.domain.entities.latent import LatentGrid, NoisePrediction
from xattn_transfer.domain.entities.plan import AttentionPlan, DenoiserOutput, LayerInfo, LayerLocation
from xattn_transfer.domain.errors import BackboneError, InvalidShapeError, XAttnError

logger = logging.getLogger(__name__)

VAE_SCALE_FACTOR = 0.18215
LATENT_DOWNSAMPLE = 8
# SD1.x 向けの FreeU 推奨値
FREEU_PARAMS = {"s1": 0.9, "s2": 0.2, "b1": 1.2, "b2": 1.4}

_SELF_ATTENTION_NAME = re.compile(
    r"^(?P<block>down_blocks|up_blocks)\.(?P<index>\d+)\.attentions\.(?P<attn>\d+)"
    r"\.transformer_blocks\.(?P<tb>\d+)\.attn1\.processor$"
)

# predict ごとの処理器。スレッド (コンテキスト) ごとに独立している
_ACTIVE_PROCESSOR: ContextVar[PlanProcessor | None] = ContextVar("xattn_active_processor", default=None)


def _import_diffusers() -> tuple[Any, Any, Any]:
    try:
        import diffusers
        from diffusers.models.attention_processor import AttnProcessor
        import torch
    except ImportError as e:
        raise BackboneError("the sd backbone needs torch, diffusers and transformers (install the 'sd' extra)") from e
    return torch, diffusers, AttnProcessor


def training_timestep(step: int, num_steps: int, training_steps: int) -> int:
    """推論ステップ t (1..T) に対応する学習スケジュール上のタイムステップ"""
    stride = training_steps // num_steps
    offset = 1 if stride > 1 else 0
    return (step - 1) * stride + offset


def layer_id_for(processor_name: str) -> str:
    """プロセッサ名 (`....attn1.processor`) から末尾の `.processor` を外したレイヤー ID"""
    return processor_name.removesuffix(".processor")


@contextmanager
def active_processor(processor: PlanProcessor) -> Iterator[None]:
    """この呼び出しの間だけブリッジ処理器が使う PlanProcessor を設定する"""
    token = _ACTIVE_PROCESSOR.set(processor)
    try:
        yield
    finally:
        _ACTIVE_PROCESSOR.reset(token)


@contextmanager
def torch_errors(stage: str) -> Iterator[None]:
    """torch / diffusers の実行時エラーを BackboneError に変換する"""
    try:
        yield
    except XAttnError:
        raise
    except RuntimeError as e:
        raise BackboneError(f"{stage} failed: {e}") from e


class _BridgeProcessor:
    """diffusers の処理器インターフェースから PlanProcessor を呼ぶ"""

    def __init__(self, torch: Any, layer: LayerInfo) -> None:
        self._torch = torch
        self._layer = layer

    def __call__(
        self,
        attn: Any,
        hidden_states: Any,
        encoder_hidden_states: Any = None,
        attention_mask: Any = None,
        temb: Any = None,
        *args: Any,
        **kwargs: Any,
    ) -> Any:
        torch = self._torch
        residual = hidden_states
        queries = attn.to_q(hidden_states)
        keys = attn.to_k(hidden_states)
        values = attn.to_v(hidden_states)

        processor = _ACTIVE_PROCESSOR.get()
        if processor is None:
            raise BackboneError(f"{self._layer.layer_id} was called outside StableDiffusionBackbone.predict")
        # バッチ (テキストガイダンス時は無条件 / 条件付き) ごとに処理し、捕捉は最後の条件付き側が残る
        outputs = [
            processor(
                self._layer,
                queries[b].float().cpu().numpy(),
                keys[b].float().cpu().numpy(),
                values[b].float().cpu().numpy(),
            )
            for b in range(hidden_states.shape[0])
        ]
        hidden = torch.from_numpy(np.stack(outputs)).to(device=hidden_states.device, dtype=hidden_states.dtype)
        hidden = attn.to_out[0](hidden)
        hidden = attn.to_out[1](hidden)
        if attn.residual_connection:
            hidden = hidden + residual
        return hidden / attn.rescale_output_factor


class StableDiffusionBackbone:
    """Stable Diffusion v1 系の U-Net を包むデノイザー

    Args:
        model_id: diffusers のモデル ID またはローカルパス
        device: torch デバイス
        num_steps: 推論ステップ数 (TransferConfig.num_steps と揃える)
        training_steps: 学習スケジュールのステップ数
        text_guidance_scale: テキストの classifier-free guidance 係数 (1.0 で無効)
        enable_freeu: パイプラインの FreeU を有効にする
        image_size: 入出力画像の一辺
    """

    def __init__(
        self,
        model_id: str,
        device: str = "cuda",
        *,
        num_steps: int = 100,
        training_steps: int = 1000,
        text_guidance_scale: float = 1.0,
        enable_freeu: bool = False,
        image_size: int = 512,
    ) -> None:
        torch, diffusers, attn_processor_cls = _import_diffusers()
        self.torch: Any = torch
        self._device = device
        self._num_steps = num_steps
        self._training_steps = training_steps
        self._text_guidance_scale = text_guidance_scale
        self._image_size = image_size
        self._model_id = model_id
        self._enable_freeu = enable_freeu

        logger.info("Loading %s on %s", model_id, device)
        try:
            pipe = diffusers.StableDiffusionPipeline.from_pretrained(
                model_id, torch_dtype=torch.float32, safety_checker=None
            ).to(device)
        except (OSError, ValueError) as e:
            raise BackboneError(f"cannot load diffusers model {model_id!r}: {e}") from e
        if enable_freeu:
            pipe.enable_freeu(**FREEU_PARAMS)
        self.pipe: Any = pipe
        self._embeddings: dict[str, Any] = {}
        self._embeddings_lock = threading.Lock()
        self._catalog = self._install_processors(attn_processor_cls)

    def _install_processors(self, attn_processor_cls: Any) -> tuple[LayerInfo, ...]:
        unet = self.pipe.unet
        torch_module = self.torch
        modules = dict(unet.named_modules())
        latent_side = self._image_size // LATENT_DOWNSAMPLE
        catalog: list[LayerInfo] = []
        processors: dict[str, Any] = {}
        for name in unet.attn_processors:
            match = _SELF_ATTENTION_NAME.match(name)
            if match is None:
                processors[name] = attn_processor_cls()
                continue
            index = int(match["index"])
            if match["block"] == "down_blocks":
                location, side = LayerLocation.ENCODER, latent_side // 2**index
            else:
                location, side = LayerLocation.DECODER, latent_side // 2 ** (3 - index)
            attn = modules[layer_id_for(name)]
            layer = LayerInfo(
                layer_id=layer_id_for(name),
                resolution=side,
                location=location,
                token_count=side * side,
                key_dim=attn.to_k.out_features,
                value_dim=attn.to_v.out_features,
                head_count=attn.heads,
            )
            catalog.append(layer)
            processors[name] = _BridgeProcessor(torch_module, layer)
        unet.set_attn_processor(processors)
        logger.info("Installed bridge processors on %d self-attention layers", len(catalog))
        return tuple(catalog)

    @property
    def layer_catalog(self) -> Sequence[LayerInfo]:
        return self._catalog

    @property
    def fingerprint(self) -> str:
        key = f"{self._model_id}|{self._image_size}|freeu={self._enable_freeu}|cfg={self._text_guidance_scale}"
        return "sd-" + hashlib.sha256(key.encode("utf-8")).hexdigest()[:12]

    def _embed(self, conditioning: str) -> Any:
        with self._embeddings_lock:
            cached = self._embeddings.get(conditioning)
            if cached is not None:
                return cached
            tokenizer, encoder = self.pipe.tokenizer, self.pipe.text_encoder
            prompts = [conditioning] if self._text_guidance_scale == 1.0 else ["", conditioning]
            tokens = tokenizer(
                prompts,
                padding="max_length",
                max_length=tokenizer.model_max_length,
                truncation=True,
                return_tensors="pt",
            )
            with self.torch.no_grad():
                embedding = encoder(tokens.input_ids.to(self._device))[0]
            self._embeddings[conditioning] = embedding
            return embedding

    def predict(
        self,
        latent: LatentGrid,
        t: int,
        conditioning: str,
        plan: AttentionPlan | None = None,
    ) -> DenoiserOutput:
        torch = self.torch
        side = self._image_size // LATENT_DOWNSAMPLE
        if latent.shape != (4, side, side):
            raise InvalidShapeError(f"sd backbone expects latents of shape {(4, side, side)} (got {latent.shape})")
        processor = PlanProcessor(plan, self._catalog)
        with torch_errors("denoiser forward pass"):
            embedding = self._embed(conditioning)
            sample = torch.from_numpy(latent.data[None].copy()).to(self._device)
            if embedding.shape[0] == 2:
                sample = sample.repeat(2, 1, 1, 1)
            timestep = training_timestep(t, self._num_steps, self._training_steps)
            with active_processor(processor), torch.no_grad():
                epsilon = self.pipe.unet(sample, timestep, encoder_hidden_states=embedding).sample
            if epsilon.shape[0] == 2:
                uncond, cond = epsilon.chunk(2)
                epsilon = uncond + self._text_guidance_scale * (cond - uncond)
            prediction = epsilon[0].float().cpu().numpy()
        return DenoiserOutput(
            prediction=NoisePrediction(prediction, resulting_mode(plan)),
            captures=processor.captures,
        )


class StableDiffusionLatentCodec:
    """VAE による画像 ⇄ 潜在の変換 (潜在は 0.18215 倍でスケール)"""

    def __init__(self, backbone: StableDiffusionBackbone, image_size: int = 512) -> None:
        self._backbone = backbone
        self._image_size = image_size

    def encode(self, image: npt.NDArray[np.uint8]) -> LatentGrid:
        torch = self._backbone.torch
        vae = self._backbone.pipe.vae
        resized = Image.fromarray(image).resize((self._image_size, self._image_size), Image.Resampling.BICUBIC)
        pixels = np.asarray(resized, dtype=np.float32) / 127.5 - 1.0
        x = torch.from_numpy(pixels.transpose(2, 0, 1)[None].copy()).to(vae.device)
        with torch_errors("vae encode"), torch.no_grad():
            latent = vae.encode(x).latent_dist.mean * VAE_SCALE_FACTOR
        return LatentGrid(latent[0].float().cpu().numpy())

    def decode(self, latent: LatentGrid) -> npt.NDArray[np.uint8]:
        torch = self._backbone.torch
        vae = self._backbone.pipe.vae
        z = torch.from_numpy(latent.data[None].copy()).to(vae.device) / VAE_SCALE_FACTOR
        with torch_errors("vae decode"), torch.no_grad():
            pixels = vae.decode(z).sample[0].float().cpu().numpy()
        rgb = (pixels.transpose(1, 2, 0) + 1.0) * 127.5
        return np.clip(np.round(rgb), 0, 255).astype(np.uint8)
