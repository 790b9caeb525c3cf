"""外観転写と再構成コマンドのCLI実装

終了コード: 成功=0 / 設定・入力エラー=2 / 反転失敗=3 / バックボーン・plan エラー=4
"""

from pathlib import Path
from typing import Annotated

import numpy as np
import typer

from xattn_transfer.adapters.cli._utils import (
    Backbone,
    RunContext,
    build_backbone,
    guarded_run,
    inversion_cache,
    load_input,
    resolve_backbone,
    resolve_config,
)
from xattn_transfer.adapters.gateways.run_artifacts import RunArtifactWriter
from xattn_transfer.adapters.masks.providers import AttentionDerivedMaskProvider, UserFileMaskProvider
from xattn_transfer.domain.entities.transfer import TransferConfig
from xattn_transfer.domain.ports.denoiser import DenoiserPort
from xattn_transfer.domain.ports.mask_provider import MaskProviderPort, StepObserverPort
from xattn_transfer.use_cases.appearance_transfer import AppearanceTransferUseCase, AttentionRecorder
from xattn_transfer.use_cases.inversion import reconstruct_latent

transfer_app = typer.Typer(help="Appearance transfer commands")

ConfigOption = Annotated[Path | None, typer.Option("--config", "-c", help="key = value 形式の設定ファイル")]
SetOption = Annotated[list[str] | None, typer.Option("--set", help="設定の上書き (key=value、複数指定可)")]
BackboneOption = Annotated[
    Backbone | None, typer.Option("--backbone", help="デノイザー (未指定なら XATTN_DEFAULT_BACKBONE)")
]
SeedOption = Annotated[int | None, typer.Option("--seed", help="反転ノイズの seed")]
ToyWeightsOption = Annotated[
    Path | None, typer.Option("--toy-weights", help="トイデノイザーの重みファイル (.xt)。未指定なら seed から生成")
]


def _mask_provider(
    config: TransferConfig,
    denoiser: DenoiserPort,
    mask_struct: Path | None,
    mask_app: Path | None,
) -> MaskProviderPort | None:
    if mask_struct is not None or mask_app is not None:
        for path in (mask_struct, mask_app):
            if path is not None and not path.exists():
                raise FileNotFoundError(f"mask not found: {path}")
        return UserFileMaskProvider(mask_struct, mask_app)
    if config.use_masks:
        return AttentionDerivedMaskProvider(denoiser.layer_catalog, config.correspondence_resolution)
    return None


@transfer_app.command("transfer")
def transfer(
    structure: Annotated[Path, typer.Option("--struct", help="構造画像 (.png) または潜在 (.xt)")],
    appearance: Annotated[Path, typer.Option("--app", help="外観画像 (.png) または潜在 (.xt)")],
    out: Annotated[Path, typer.Option("--out", "-o", help="成果物を書き出す実行ディレクトリ")],
    config_path: ConfigOption = None,
    overrides: SetOption = None,
    backbone: BackboneOption = None,
    seed: SeedOption = None,
    domain: Annotated[str | None, typer.Option("--domain", help="プロンプトに入れるドメイン名")] = None,
    mask_struct: Annotated[Path | None, typer.Option("--mask-struct", help="構造画像のマスク")] = None,
    mask_app: Annotated[Path | None, typer.Option("--mask-app", help="外観画像のマスク")] = None,
    record_attention: Annotated[
        bool, typer.Option("--record-attention/--no-record-attention", help="画像間アテンションマップを保存する")
    ] = False,
    toy_weights: ToyWeightsOption = None,
) -> None:
    r"""構造画像の形に外観画像の見た目を写した画像を生成する

    Example:
        xattn transfer --struct samples/structure.png --app samples/appearance.png \
            --out runs/demo --set num_steps=50
    """
    writer = RunArtifactWriter(out)
    context = RunContext(command="transfer", writer=writer)
    with guarded_run(context):
        with context.stage_of("config"):
            use_masks = True if mask_struct is not None or mask_app is not None else None
            config = resolve_config(config_path, overrides, seed=seed, domain=domain, use_masks=use_masks)
            context.use_config(config)
            chosen = resolve_backbone(backbone)

        with context.stage_of("inputs"):
            inputs = {"structure": structure, "appearance": appearance}
            inputs.update({name: path for name, path in (("mask_struct", mask_struct), ("mask_app", mask_app)) if path})
            context.hash_inputs(inputs)
            denoiser, codec = build_backbone(chosen, config, toy_weights)
            context.backbone = denoiser.fingerprint
            z_struct = load_input(structure, codec)
            z_app = load_input(appearance, codec)

        with context.stage_of("transfer"):
            recorder = AttentionRecorder()
            observers: list[StepObserverPort] = [recorder] if record_attention else []
            use_case = AppearanceTransferUseCase(
                denoiser,
                config,
                mask_provider=_mask_provider(config, denoiser, mask_struct, mask_app),
                observers=observers,
                cache=inversion_cache(),
                record_attention=record_attention,
            )
            result = use_case.run(z_struct, z_app)
            context.warnings.extend(result.warnings)

        with context.stage_of("artifacts"):
            output_path = writer.write_image(codec.decode(result.output))
            writer.write_latent(result.output)
            writer.write_config(config)
            writer.write_steps(result.steps)
            writer.write_drift(result, config.drift_tolerance)
            if record_attention:
                writer.write_attention(recorder.maps)
        typer.echo(typer.style(f"✓ Transfer saved to: {output_path}", fg=typer.colors.GREEN, bold=True))


@transfer_app.command("reconstruct")
def reconstruct(
    image: Annotated[Path, typer.Option("--image", "-i", help="再構成する画像 (.png) または潜在 (.xt)")],
    out: Annotated[Path, typer.Option("--out", "-o", help="成果物を書き出す実行ディレクトリ")],
    config_path: ConfigOption = None,
    overrides: SetOption = None,
    backbone: BackboneOption = None,
    seed: SeedOption = None,
    toy_weights: ToyWeightsOption = None,
) -> None:
    """画像を反転し、アテンションを改変せずに再生する (反転の健全性確認用)"""
    writer = RunArtifactWriter(out)
    context = RunContext(command="reconstruct", writer=writer)
    with guarded_run(context):
        with context.stage_of("config"):
            config = resolve_config(config_path, overrides, seed=seed)
            context.use_config(config)
            chosen = resolve_backbone(backbone)

        with context.stage_of("inputs"):
            context.hash_inputs({"image": image})
            denoiser, codec = build_backbone(chosen, config, toy_weights)
            context.backbone = denoiser.fingerprint
            latent = load_input(image, codec)

        with context.stage_of("reconstruct"):
            reconstructed = reconstruct_latent(latent, config, denoiser, inversion_cache())
            drift = float(np.max(np.abs(reconstructed.data - latent.data)))
            if drift > config.drift_tolerance:
                context.warnings.append(
                    f"reconstruction drift {drift:.3e} exceeds tolerance {config.drift_tolerance:.1e}"
                )

        with context.stage_of("artifacts"):
            output_path = writer.write_image(
                codec.decode(reconstructed), name="reconstruction", filename="reconstruction.png"
            )
            writer.write_latent(reconstructed, name="reconstruction_latent", filename="reconstruction_latent.xt")
            writer.write_config(config)
            lines = [f"drift = {drift:.6e}", f"tolerance = {config.drift_tolerance:.6e}"]
            lines.extend(f"WARNING {warning}" for warning in context.warnings)
            writer.write_text("drift", "drift.log", "\n".join(lines) + "\n")
        typer.echo(f"max-abs drift: {drift:.3e}")
        typer.echo(typer.style(f"✓ Reconstruction saved to: {output_path}", fg=typer.colors.GREEN, bold=True))
