"""CLI テスト用のフィクスチャ"""

from collections.abc import Callable, Iterator
import logging
from pathlib import Path

import numpy as np
import pytest
from typer.testing import CliRunner, Result

from xattn_transfer.adapters.cli import app
from xattn_transfer.adapters.gateways.image_io import write_rgb

SMALL_CONFIG_TEXT = """\
# 10 ステップの縮小設定
num_steps = 10
injection_window_32 = 1,7
injection_window_64 = 1,9
adain_window = 2,10
structure_injection_period = 5
"""


@pytest.fixture(autouse=True)
def _reset_root_logger() -> Iterator[None]:
    """CliRunner が閉じたストリームにハンドラーを残さないようにする"""
    yield
    logging.getLogger().handlers.clear()


@pytest.fixture
def invoke(runner: CliRunner, tmp_path: Path) -> Callable[..., Result]:
    """ログを tmp_path に向けて xattn を実行する"""

    def _invoke(*args: str) -> Result:
        return runner.invoke(app, ["--log-file", str(tmp_path / "xattn.log"), "--log-level", "WARNING", *args])

    return _invoke


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    path = tmp_path / "small.conf"
    path.write_text(SMALL_CONFIG_TEXT, encoding="utf-8")
    return path


@pytest.fixture
def image_pair(tmp_path: Path) -> tuple[Path, Path]:
    """16×16 の構造画像と外観画像"""
    rng = np.random.default_rng(0)
    structure = tmp_path / "structure.png"
    appearance = tmp_path / "appearance.png"
    write_rgb(structure, rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
    write_rgb(appearance, rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
    return structure, appearance
