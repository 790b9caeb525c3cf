"""CLI アダプタ共通のユーティリティ

終了コードの対応付け、バックボーンの組み立て、入力の読み込みなど
各コマンドで重複する処理を集約する。
"""

from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import StrEnum
import logging
import os
from pathlib import Path
import time

from pydantic import ValidationError
import typer

from xattn_transfer.adapters.backbones.toy import ToyDenoiser, ToyLatentCodec
from xattn_transfer.adapters.gateways.config_file import load_config
from xattn_transfer.adapters.gateways.image_io import read_rgb
from xattn_transfer.adapters.gateways.inversion_cache import DirectoryInversionCache
from xattn_transfer.adapters.gateways.run_artifacts import RunArtifactWriter, hash_inputs
from xattn_transfer.adapters.gateways.tensor_store import load_latent
from xattn_transfer.domain.entities.latent import LatentGrid
from xattn_transfer.domain.entities.run import RunManifest, RunStatus
from xattn_transfer.domain.entities.transfer import TransferConfig
from xattn_transfer.domain.errors import (
    BackboneError,
    ConfigError,
    DegenerateMaskError,
    InvalidShapeError,
    InversionDegenerateError,
    PlanError,
    XAttnError,
)
from xattn_transfer.domain.ports.denoiser import DenoiserPort, LatentCodecPort
from xattn_transfer.infrastructure.config import settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INVERSION = 3
EXIT_BACKBONE = 4


class Backbone(StrEnum):
    """--backbone の選択肢"""

    TOY = "toy"
    SD = "sd"


def resolve_workers(workers: int) -> int:
    """``--workers`` 引数を実行時の並列度に解決する

    - ``-1`` / ``0`` → ``os.cpu_count() or 1``
    - ``>= 1`` → そのまま
    - それ以外 → ``ValueError``
    """
    if workers in (-1, 0):
        return os.cpu_count() or 1
    if workers < 1:
        raise ValueError(f"workers must be -1, 0 or >= 1 (got {workers})")
    return workers


def exit_code_for(error: BaseException) -> int:
    """例外を終了コードに対応付ける"""
    if isinstance(error, (ConfigError, DegenerateMaskError, FileNotFoundError, ValidationError)):
        return EXIT_CONFIG
    if isinstance(error, InversionDegenerateError):
        return EXIT_INVERSION
    if isinstance(error, (BackboneError, PlanError, InvalidShapeError)):
        return EXIT_BACKBONE
    return EXIT_FAILURE


def parse_overrides(items: list[str] | None) -> dict[str, object]:
    """`--set key=value` の並びを辞書にする"""
    overrides: dict[str, object] = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value (got {item!r})")
        overrides[key.strip()] = value.strip()
    return overrides


def resolve_config(
    config_path: Path | None,
    overrides: list[str] | None,
    *,
    seed: int | None = None,
    domain: str | None = None,
    use_masks: bool | None = None,
) -> TransferConfig:
    """設定ファイル・--set・個別フラグの順に上書きして TransferConfig を作る"""
    values = parse_overrides(overrides)
    if seed is not None:
        values["seed"] = seed
    if domain is not None:
        values["domain_prompt"] = domain
    if use_masks is not None:
        values["use_masks"] = use_masks
    return load_config(config_path, values)


def build_backbone(
    backbone: Backbone,
    config: TransferConfig,
    toy_weights: Path | None = None,
) -> tuple[DenoiserPort, LatentCodecPort]:
    """バックボーンと潜在コーデックを組み立てる

    Raises:
        BackboneError: sd の追加依存が無い、またはモデルを読めない
    """
    if backbone is Backbone.TOY:
        denoiser = ToyDenoiser.from_file(toy_weights) if toy_weights else ToyDenoiser(seed=settings.toy_seed)
        return denoiser, ToyLatentCodec()

    from xattn_transfer.adapters.backbones.stable_diffusion import (  # noqa: PLC0415
        StableDiffusionBackbone,
        StableDiffusionLatentCodec,
    )

    sd = StableDiffusionBackbone(
        settings.sd_model_id,
        settings.sd_device,
        num_steps=config.num_steps,
        training_steps=config.training_steps or config.num_steps,
        text_guidance_scale=config.text_guidance_scale,
        enable_freeu=settings.sd_enable_freeu,
    )
    return sd, StableDiffusionLatentCodec(sd)


def load_input(path: Path, codec: LatentCodecPort) -> LatentGrid:
    """`.xt` は潜在としてそのまま、それ以外は画像としてエンコードする"""
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    if path.suffix == ".xt":
        return load_latent(path)
    return codec.encode(read_rgb(path))


def inversion_cache() -> DirectoryInversionCache | None:
    """XATTN_CACHE_DIR が設定されているときだけ反転記録をキャッシュする"""
    if settings.cache_dir is None:
        return None
    return DirectoryInversionCache(settings.effective_cache_dir)


def resolve_backbone(backbone: Backbone | None) -> Backbone:
    """未指定なら settings.default_backbone を使う"""
    if backbone is not None:
        return backbone
    try:
        return Backbone(settings.default_backbone)
    except ValueError as e:
        raise ConfigError(f"unknown default backbone {settings.default_backbone!r}") from e


@dataclass
class RunContext:
    """1 コマンド分のマニフェスト・経過時間・成果物をまとめる"""

    command: str
    writer: RunArtifactWriter
    backbone: str = ""
    seed: int = 0
    config: dict[str, object] = field(default_factory=dict[str, object])
    input_hashes: dict[str, str] = field(default_factory=dict[str, str])
    warnings: list[str] = field(default_factory=list[str])
    stage: str = "config"
    timings: dict[str, float] = field(default_factory=dict[str, float])

    def use_config(self, config: TransferConfig) -> None:
        self.seed = config.seed
        self.config = dict(config.to_key_values())

    def hash_inputs(self, inputs: dict[str, Path]) -> None:
        self.input_hashes = hash_inputs({name: path for name, path in inputs.items() if path.exists()})

    @contextmanager
    def stage_of(self, name: str) -> Iterator[None]:
        """ステージ名を記録し、経過時間を timings に積む"""
        self.stage = name
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - start

    def manifest(self, status: RunStatus, error: str | None = None) -> RunManifest:
        return RunManifest(
            command=self.command,
            status=status,
            backbone=self.backbone,
            seed=self.seed,
            config=self.config,
            input_hashes=self.input_hashes,
            artifacts=self.writer.artifacts,
            warnings=self.warnings,
            error=error,
            stage=self.stage if status is RunStatus.FAILED else "",
        )

    def finish(self) -> None:
        self.writer.write_manifest(self.manifest(RunStatus.SUCCEEDED))
        self.writer.write_timings(self.timings)

    def fail(self, error: BaseException) -> int:
        """失敗時もマニフェストを残し、終了コードを返す"""
        code = exit_code_for(error)
        logger.error("%s failed at stage %s: %s", self.command, self.stage, error)
        self.writer.write_manifest(self.manifest(RunStatus.FAILED, f"{type(error).__name__}: {error}"))
        self.writer.write_timings(self.timings)
        return code


def report_error(error: BaseException) -> None:
    typer.echo(typer.style(f"Error: {error}", fg=typer.colors.RED), err=True)


@contextmanager
def guarded_run(context: RunContext) -> Iterator[RunContext]:
    """コマンド本体の例外を終了コードに変換する"""
    try:
        yield context
    except (typer.Exit, typer.Abort):
        raise
    except (XAttnError, FileNotFoundError, ValidationError) as e:
        report_error(e)
        raise typer.Exit(code=context.fail(e)) from e
    except Exception as e:
        logger.exception("Unexpected error in %s at stage %s", context.command, context.stage)
        report_error(e)
        raise typer.Exit(code=context.fail(e)) from e
    context.finish()
