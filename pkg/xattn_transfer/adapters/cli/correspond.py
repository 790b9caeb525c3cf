"""意味的対応の抽出コマンドのCLI実装"""

from pathlib import Path
from typing import Annotated

import typer

from xattn_transfer.adapters.cli._utils import (
    RunContext,
    build_backbone,
    guarded_run,
    inversion_cache,
    load_input,
    resolve_backbone,
    resolve_config,
)
from xattn_transfer.adapters.cli.transfer import BackboneOption, ConfigOption, SeedOption, SetOption, ToyWeightsOption
from xattn_transfer.adapters.gateways.run_artifacts import RunArtifactWriter
from xattn_transfer.adapters.gateways.tensor_store import save_correspondence
from xattn_transfer.adapters.gateways.visualization.correspondence_plot import save_correspondence_figure
from xattn_transfer.domain.entities.analysis import Aggregation
from xattn_transfer.use_cases.correspondence import CorrespondenceUseCase

correspond_app = typer.Typer(help="Correspondence commands")


@correspond_app.command("correspond")
def correspond(
    structure: Annotated[Path, typer.Option("--struct", help="構造画像 (.png) または潜在 (.xt)")],
    appearance: Annotated[Path, typer.Option("--app", help="外観画像 (.png) または潜在 (.xt)")],
    out: Annotated[Path, typer.Option("--out", "-o", help="成果物を書き出す実行ディレクトリ")],
    config_path: ConfigOption = None,
    overrides: SetOption = None,
    backbone: BackboneOption = None,
    seed: SeedOption = None,
    aggregation: Annotated[
        Aggregation, typer.Option("--aggregation", help="レイヤー間の集約 (mean / single_layer)")
    ] = Aggregation.MEAN,
    layer: Annotated[str | None, typer.Option("--layer", help="single_layer 集約で使うレイヤー ID")] = None,
    gray_low_confidence: Annotated[
        bool, typer.Option("--gray-low-confidence/--no-gray-low-confidence", help="低信頼の画素を灰色で塗る")
    ] = True,
    toy_weights: ToyWeightsOption = None,
) -> None:
    """転写ループ中の画像間アテンションから構造画素 → 外観画素の対応を取り出す

    correspondence.png (図) と correspondence.xt (行・列インデックスと信頼度) を書き出す。
    """
    writer = RunArtifactWriter(out)
    context = RunContext(command="correspond", writer=writer)
    with guarded_run(context):
        with context.stage_of("config"):
            config = resolve_config(config_path, overrides, seed=seed)
            context.use_config(config)
            chosen = resolve_backbone(backbone)

        with context.stage_of("inputs"):
            context.hash_inputs({"structure": structure, "appearance": appearance})
            denoiser, codec = build_backbone(chosen, config, toy_weights)
            context.backbone = denoiser.fingerprint
            z_struct = load_input(structure, codec)
            z_app = load_input(appearance, codec)

        with context.stage_of("correspond"):
            use_case = CorrespondenceUseCase(
                denoiser, config, aggregation=aggregation, layer=layer, cache=inversion_cache()
            )
            result = use_case.run(z_struct, z_app)
            context.warnings.extend(result.transfer.warnings)
            low = int(result.correspondence.low_confidence.sum())
            if low:
                context.warnings.append(f"{low} of {result.correspondence.rows.size} pixels have low confidence")

        with context.stage_of("artifacts"):
            transferred = codec.decode(result.transfer.output)
            writer.write_image(transferred)
            save_correspondence(writer.run_dir / "correspondence.xt", result.correspondence)
            writer.register("correspondence_index", "correspondence.xt")
            figure = writer.run_dir / "correspondence.png"
            save_correspondence_figure(
                result.correspondence,
                figure,
                structure=codec.decode(z_struct),
                appearance=codec.decode(z_app),
                transferred=transferred,
                gray_low_confidence=gray_low_confidence,
            )
            writer.register("correspondence_figure", "correspondence.png")
            writer.write_config(config)
        typer.echo(typer.style(f"✓ Correspondence saved to: {figure}", fg=typer.colors.GREEN, bold=True))
