"""反転・再構成ユースケースのテスト"""

from pathlib import Path
from unittest.mock import patch

import numpy as np

from xattn_transfer.adapters.backbones.toy import ToyDenoiser, ToyLatentCodec
from xattn_transfer.adapters.gateways.inversion_cache import DirectoryInversionCache, MemoryInversionCache
from xattn_transfer.domain.entities.transfer import TransferConfig
from xattn_transfer.use_cases.inversion import (
    InversionService,
    build_schedule,
    inversion_cache_key,
    reconstruct,
    reconstruct_latent,
)


class TestInversionService:
    def test_second_inversion_hits_cache(self, toy_denoiser: ToyDenoiser, small_config, structure_latent):
        """同じ入力の 2 回目の反転はデノイザーを呼ばないことを確認する"""
        # Arrange
        service = InversionService(toy_denoiser, build_schedule(small_config), MemoryInversionCache())
        first = service.invert(structure_latent, small_config.prompt, seed=0)

        # Act
        with patch.object(toy_denoiser, "predict", wraps=toy_denoiser.predict) as mock_predict:
            second = service.invert(structure_latent, small_config.prompt, seed=0)

        # Assert
        mock_predict.assert_not_called()
        assert second is first

    def test_directory_cache_round_trip(
        self, tmp_path: Path, toy_denoiser: ToyDenoiser, small_config, structure_latent
    ):
        cache = DirectoryInversionCache(tmp_path / "inversions")
        service = InversionService(toy_denoiser, build_schedule(small_config), cache)

        record = service.invert(structure_latent, small_config.prompt, seed=3)
        cached = InversionService(toy_denoiser, build_schedule(small_config), cache).invert(
            structure_latent, small_config.prompt, seed=3
        )

        assert len(list((tmp_path / "inversions").glob("*.xt"))) == 1
        np.testing.assert_array_equal(cached.terminal_latent.data, record.terminal_latent.data)
        assert cached.seed == 3

    def test_corrupt_cache_entry_is_ignored(
        self, tmp_path: Path, toy_denoiser: ToyDenoiser, small_config, structure_latent
    ):
        """読めないキャッシュファイルは無視して反転し直すことを確認する"""
        schedule = build_schedule(small_config)
        key = inversion_cache_key(structure_latent, schedule, toy_denoiser.fingerprint, small_config.prompt, 0, 1.0)
        (tmp_path / f"{key}.xt").write_bytes(b"broken")

        record = InversionService(toy_denoiser, schedule, DirectoryInversionCache(tmp_path)).invert(
            structure_latent, small_config.prompt, seed=0
        )

        assert record.num_steps == 20

    def test_cache_key_depends_on_inputs(
        self, toy_denoiser: ToyDenoiser, small_config, structure_latent, appearance_latent
    ):
        schedule = build_schedule(small_config)
        fingerprint = toy_denoiser.fingerprint

        base = inversion_cache_key(structure_latent, schedule, fingerprint, "p", 0, 1.0)

        assert base == inversion_cache_key(structure_latent, schedule, fingerprint, "p", 0, 1.0)
        assert base != inversion_cache_key(appearance_latent, schedule, fingerprint, "p", 0, 1.0)
        assert base != inversion_cache_key(structure_latent, schedule, fingerprint, "p", 1, 1.0)
        assert base != inversion_cache_key(structure_latent, schedule, fingerprint, "q", 0, 1.0)
        assert base != inversion_cache_key(structure_latent, schedule, "other", "p", 0, 1.0)


class TestReconstruct:
    def test_latent_reconstruction(self, toy_denoiser: ToyDenoiser, small_config, structure_latent):
        reconstructed = reconstruct_latent(structure_latent, small_config, toy_denoiser)

        np.testing.assert_allclose(reconstructed.data, structure_latent.data, atol=1e-4)

    def test_image_reconstruction(self, toy_denoiser: ToyDenoiser, toy_codec: ToyLatentCodec):
        """8×8 画像のエンコード → 反転 → 再生 → デコードが元画像を再現することを確認する"""
        rng = np.random.default_rng(0)
        image = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
        config = TransferConfig(
            num_steps=10, injection_window_32=(0, 0), injection_window_64=(0, 0), adain_window=(0, 0)
        )

        restored = reconstruct(image, config, toy_denoiser, toy_codec)

        assert np.max(np.abs(restored.astype(int) - image.astype(int))) <= 1
