"""設定の表示・初期化・レイヤーカタログ出力のCLI実装"""

import json
from pathlib import Path
from typing import Annotated

import typer

from xattn_transfer.adapters.cli._utils import (
    EXIT_CONFIG,
    build_backbone,
    exit_code_for,
    report_error,
    resolve_backbone,
    resolve_config,
)
from xattn_transfer.adapters.cli.transfer import BackboneOption, ConfigOption, SetOption
from xattn_transfer.adapters.gateways.config_file import render_config
from xattn_transfer.domain.entities.transfer import TransferConfig
from xattn_transfer.domain.errors import XAttnError

config_app = typer.Typer(help="Configuration commands")


@config_app.command("show")
def show(config_path: ConfigOption = None, overrides: SetOption = None) -> None:
    """既定値・設定ファイル・--set を解決した転写設定を表示する"""
    try:
        config = resolve_config(config_path, overrides)
    except XAttnError as e:
        report_error(e)
        raise typer.Exit(code=exit_code_for(e)) from e
    typer.echo(render_config(config), nl=False)


@config_app.command("init")
def init(
    path: Annotated[Path, typer.Argument(help="書き出す設定ファイル")] = Path("xattn.conf"),
    force: Annotated[bool, typer.Option("--force", "-f", help="既存ファイルを上書きする")] = False,
) -> None:
    """既定値をすべて書き出した設定ファイルを作る"""
    if path.exists() and not force:
        typer.echo(typer.style(f"Error: {path} already exists (use --force)", fg=typer.colors.RED), err=True)
        raise typer.Exit(code=EXIT_CONFIG)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("# xattn transfer config\n" + render_config(TransferConfig()), encoding="utf-8")
    typer.echo(typer.style(f"✓ Config written to: {path}", fg=typer.colors.GREEN, bold=True))


@config_app.command("catalog")
def catalog(backbone: BackboneOption = None) -> None:
    """デノイザーのアテンションレイヤーカタログを JSON で表示する"""
    try:
        denoiser, _ = build_backbone(resolve_backbone(backbone), TransferConfig())
    except XAttnError as e:
        report_error(e)
        raise typer.Exit(code=exit_code_for(e)) from e
    layers = [layer.model_dump(mode="json") for layer in denoiser.layer_catalog]
    typer.echo(json.dumps({"backbone": denoiser.fingerprint, "layers": layers}, indent=2))

