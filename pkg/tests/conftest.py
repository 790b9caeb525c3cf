"""pytest 共通フィクスチャ

トイデノイザー・コーデック・小さな転写設定など、各層のテストで共有するものを提供する。
"""

from collections.abc import Callable

import numpy as np
import pytest
from typer.testing import CliRunner

from xattn_transfer.adapters.backbones.toy import TOY_CHANNELS, TOY_SIZE, ToyDenoiser, ToyLatentCodec
from xattn_transfer.domain.entities.latent import LatentGrid
from xattn_transfer.domain.entities.transfer import TransferConfig

SMALL_CONFIG = {
    "num_steps": 20,
    "injection_window_32": (2, 14),
    "injection_window_64": (2, 18),
    "adain_window": (4, 20),
    "structure_injection_period": 5,
}


@pytest.fixture
def runner() -> CliRunner:
    """Typer の CliRunner を提供するフィクスチャ"""
    return CliRunner()


@pytest.fixture
def toy_denoiser() -> ToyDenoiser:
    """seed 0 のトイデノイザー"""
    return ToyDenoiser(seed=0)


@pytest.fixture
def toy_codec() -> ToyLatentCodec:
    return ToyLatentCodec()


@pytest.fixture
def small_config() -> TransferConfig:
    """20 ステップに縮めた転写設定 (窓・周期は既定値と同じ比率)"""
    return TransferConfig(**SMALL_CONFIG)


@pytest.fixture
def make_latent() -> Callable[[int], LatentGrid]:
    """seed から 4×8×8 のランダム潜在を作る関数"""

    def _make(seed: int) -> LatentGrid:
        rng = np.random.default_rng(seed)
        return LatentGrid(rng.standard_normal((TOY_CHANNELS, TOY_SIZE, TOY_SIZE)).astype(np.float32))

    return _make


@pytest.fixture
def structure_latent(make_latent: Callable[[int], LatentGrid]) -> LatentGrid:
    return make_latent(1)


@pytest.fixture
def appearance_latent(make_latent: Callable[[int], LatentGrid]) -> LatentGrid:
    return make_latent(2)
