"""仕組みを 1 つずつ外した転写を比較するアブレーション"""

from dataclasses import dataclass
import logging

import numpy as np

from xattn_transfer.domain.entities.latent import LatentGrid
from xattn_transfer.domain.entities.transfer import TransferConfig
from xattn_transfer.domain.ports.denoiser import DenoiserPort
from xattn_transfer.domain.ports.inversion_cache import InversionCachePort
from xattn_transfer.use_cases.appearance_transfer import AppearanceTransferUseCase

logger = logging.getLogger(__name__)

EMPTY_WINDOW = (0, 0)


@dataclass(frozen=True, slots=True)
class AblationOutcome:
    """1 バリアントの結果

    Attributes:
        name: バリアント名
        config: 実際に使った設定
        output: 出力潜在
        distance_to_full: 全部入り出力との平均絶対差
        distance_to_baseline: 純粋な K/V 差し替え出力との平均絶対差
    """

    name: str
    config: TransferConfig
    output: LatentGrid
    distance_to_full: float
    distance_to_baseline: float


def ablation_variants(config: TransferConfig) -> dict[str, TransferConfig]:
    """全部入り・1 つずつ無効化・ベースライン (純粋な K/V 差し替え) の設定"""
    disabled = {
        "contrast": {"contrast_beta": 1.0},
        "adain": {"adain_window": EMPTY_WINDOW},
        "structure_injection": {"structure_injection_period": None},
        # α = 1 は画像間アテンションの予測だけを使う
        "guidance": {"guidance_alpha": 1.0},
    }
    variants = {"full": config}
    for name, update in disabled.items():
        variants[f"no_{name}"] = config.model_copy(update=update)
    baseline: dict[str, object] = {}
    for update in disabled.values():
        baseline.update(update)
    variants["baseline"] = config.model_copy(update=baseline)
    return variants


def _mean_abs(a: LatentGrid, b: LatentGrid) -> float:
    return float(np.mean(np.abs(a.data - b.data)))


def run_ablation_ladder(
    denoiser: DenoiserPort,
    config: TransferConfig,
    structure: LatentGrid,
    appearance: LatentGrid,
    cache: InversionCachePort | None = None,
) -> list[AblationOutcome]:
    """各バリアントで転写し、全部入りとベースラインからの距離を返す"""
    outputs: dict[str, tuple[TransferConfig, LatentGrid]] = {}
    for name, variant in ablation_variants(config).items():
        logger.info("Running ablation variant: %s", name)
        result = AppearanceTransferUseCase(denoiser, variant, cache=cache).run(structure, appearance)
        outputs[name] = (variant, result.output)

    full = outputs["full"][1]
    baseline = outputs["baseline"][1]
    return [
        AblationOutcome(
            name=name,
            config=variant,
            output=output,
            distance_to_full=_mean_abs(output, full),
            distance_to_baseline=_mean_abs(output, baseline),
        )
        for name, (variant, output) in outputs.items()
    ]
