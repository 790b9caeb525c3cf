"""評価コマンドのCLI実装"""

from enum import StrEnum
from pathlib import Path
from typing import Annotated

import typer

from xattn_transfer.adapters.cli._utils import EXIT_CONFIG, exit_code_for, report_error, resolve_workers
from xattn_transfer.adapters.features.conv_stack import SeededConvFeatureExtractor
from xattn_transfer.adapters.gateways.evaluation_report import read_pairs, write_report
from xattn_transfer.adapters.gateways.image_io import read_mask_image, read_rgb
from xattn_transfer.domain.errors import ConfigError, XAttnError
from xattn_transfer.domain.ports.feature_extractor import FeatureExtractorPort
from xattn_transfer.infrastructure.config import settings
from xattn_transfer.use_cases.evaluation import EvaluationUseCase

evaluate_app = typer.Typer(help="Evaluation commands")


class Extractor(StrEnum):
    """Gram 距離に使う特徴抽出器"""

    SEEDED = "seeded"
    VGG19 = "vgg19"


def _build_extractor(extractor: Extractor, device: str) -> FeatureExtractorPort:
    if extractor is Extractor.SEEDED:
        return SeededConvFeatureExtractor(seed=0)
    from xattn_transfer.adapters.features.vgg import VGG19FeatureExtractor  # noqa: PLC0415

    return VGG19FeatureExtractor(device=device)


@evaluate_app.command("evaluate")
def evaluate(
    pairs: Annotated[Path, typer.Option("--pairs", help="pair_id,structure,appearance[,domain] の CSV")],
    outputs: Annotated[Path, typer.Option("--outputs", help="{pair_id}.png を置いた転写結果ディレクトリ")],
    masks: Annotated[Path, typer.Option("--masks", help="{pair_id}_output.png / {pair_id}_structure.png のディレクトリ")],
    report_dir: Annotated[
        Path | None, typer.Option("--report-dir", help="評価結果の出力先 (未指定なら --outputs)")
    ] = None,
    extractor: Annotated[Extractor, typer.Option("--extractor", help="特徴抽出器")] = Extractor.SEEDED,
    workers: Annotated[
        int | None, typer.Option("--workers", "-w", help="並列数 (-1 / 0 で CPU コア数)")
    ] = None,
) -> None:
    """構造 IoU と Gram 距離でペアごと・ドメインごと・全体の評価を行う

    欠けたファイルはその行の指標を N/A にするだけで、終了コードは 0 のまま。
    """
    try:
        n_jobs = resolve_workers(settings.evaluate_workers if workers is None else workers)
    except ValueError as e:
        report_error(e)
        raise typer.Exit(code=EXIT_CONFIG) from e

    try:
        pair_list = read_pairs(pairs, outputs, masks)
        if not pair_list:
            raise ConfigError(f"{pairs} lists no pairs")
        use_case = EvaluationUseCase(
            _build_extractor(extractor, settings.sd_device),
            read_rgb,
            read_mask_image,
            n_jobs=n_jobs,
        )
        report = use_case.evaluate(pair_list)
        paths = write_report(report, report_dir or outputs)
    except (XAttnError, FileNotFoundError) as e:
        report_error(e)
        raise typer.Exit(code=exit_code_for(e)) from e

    typer.echo(f"mean structure IoU:  {report.mean_structure_iou if report.mean_structure_iou is not None else 'N/A'}")
    typer.echo(f"mean Gram distance: {report.mean_gram_distance if report.mean_gram_distance is not None else 'N/A'}")
    typer.echo(typer.style(f"✓ Report saved to: {paths['summary']}", fg=typer.colors.GREEN, bold=True))
