"""サンプル画像の生成コマンドのCLI実装"""

from pathlib import Path
from typing import Annotated

import typer

from xattn_transfer.adapters.backbones.toy import ToyLatentCodec
from xattn_transfer.adapters.gateways.image_io import write_mask_image, write_rgb
from xattn_transfer.adapters.gateways.sample_images import synthesize_pair
from xattn_transfer.adapters.gateways.tensor_store import save_latent

samples_app = typer.Typer(help="Sample data commands")


@samples_app.command("samples")
def samples(
    out: Annotated[Path, typer.Option("--out", "-o", help="出力ディレクトリ")] = Path("samples"),
    size: Annotated[int, typer.Option("--size", min=8, help="画像の一辺 (ピクセル)")] = 64,
    seed: Annotated[int, typer.Option("--seed", min=0, help="ノイズの seed")] = 0,
) -> None:
    """スモーク実行用のサンプル画像・マスク・トイ潜在を書き出す

    structure.png / appearance.png、その 8 ビットマスク、トイコーデックで
    エンコードした structure.xt / appearance.xt を作る。
    """
    pair = synthesize_pair(size, seed)
    codec = ToyLatentCodec()
    out.mkdir(parents=True, exist_ok=True)
    write_rgb(out / "structure.png", pair.structure)
    write_rgb(out / "appearance.png", pair.appearance)
    write_mask_image(out / "structure_mask.png", pair.structure_mask)
    write_mask_image(out / "appearance_mask.png", pair.appearance_mask)
    save_latent(out / "structure.xt", codec.encode(pair.structure))
    save_latent(out / "appearance.xt", codec.encode(pair.appearance))
    typer.echo(typer.style(f"✓ Samples written to: {out}", fg=typer.colors.GREEN, bold=True))
