"""samples コマンドのテスト"""

from collections.abc import Callable
from pathlib import Path

from typer.testing import Result

from xattn_transfer.adapters.gateways.image_io import read_rgb
from xattn_transfer.adapters.gateways.tensor_store import load_latent

Invoke = Callable[..., Result]


def test_writes_images_masks_and_latents(invoke: Invoke, tmp_path: Path) -> None:
    """画像・マスク・トイ潜在の 6 ファイルを書き出すことを確認する"""
    out = tmp_path / "samples"

    result = invoke("samples", "--out", str(out), "--size", "32", "--seed", "1")

    assert result.exit_code == 0
    assert sorted(path.name for path in out.iterdir()) == [
        "appearance.png",
        "appearance.xt",
        "appearance_mask.png",
        "structure.png",
        "structure.xt",
        "structure_mask.png",
    ]
    assert read_rgb(out / "structure.png").shape == (32, 32, 3)
    assert load_latent(out / "appearance.xt").shape == (4, 8, 8)


def test_size_below_minimum_is_rejected(invoke: Invoke, tmp_path: Path) -> None:
    result = invoke("samples", "--out", str(tmp_path), "--size", "4")

    assert result.exit_code != 0
