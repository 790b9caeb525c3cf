"""CLI パッケージの初期化とコマンド統合。"""

from pathlib import Path
from typing import Annotated

import typer
from typer import Typer

from xattn_transfer.adapters.cli.config import config_app
from xattn_transfer.adapters.cli.correspond import correspond_app
from xattn_transfer.adapters.cli.evaluate import evaluate_app
from xattn_transfer.adapters.cli.samples import samples_app
from xattn_transfer.adapters.cli.transfer import transfer_app
from xattn_transfer.infrastructure.logging_config import setup_logging

app = Typer(help="xattn - 画像間アテンションによるゼロショット外観転写")


@app.callback()
def _configure(
    log_level: Annotated[str | None, typer.Option("--log-level", help="ログレベル (DEBUG, INFO, ...)")] = None,
    log_file: Annotated[Path | None, typer.Option("--log-file", help="ログファイルのパス")] = None,
) -> None:
    setup_logging(log_level=log_level, log_file=log_file)


app.registered_commands.extend(transfer_app.registered_commands)
app.registered_commands.extend(correspond_app.registered_commands)
app.registered_commands.extend(evaluate_app.registered_commands)
app.registered_commands.extend(samples_app.registered_commands)

app.add_typer(config_app, name="config")


def main() -> None:
    """CLI のエントリーポイント。"""
    app()


__all__ = ["app", "main"]
