"""`.xt` テンソルコンテナのテスト"""

from pathlib import Path

import numpy as np
import pytest

from xattn_transfer.adapters.gateways.tensor_store import (
    load_correspondence,
    load_inversion_record,
    load_latent,
    load_mask,
    read_tensors,
    save_correspondence,
    save_inversion_record,
    save_latent,
    write_tensors,
)
from xattn_transfer.domain.entities.analysis import CorrespondenceMap
from xattn_transfer.domain.entities.latent import LatentGrid
from xattn_transfer.domain.errors import ConfigError
from xattn_transfer.use_cases.inversion import InversionService, build_schedule


class TestContainer:
    def test_tensors_and_meta(self, tmp_path: Path):
        path = tmp_path / "a.xt"
        write_tensors(path, "custom", {"x": np.arange(6).reshape(2, 3), "y": np.ones(1)}, meta={"note": "hi"})

        kind, tensors, meta = read_tensors(path)

        assert kind == "custom"
        assert list(tensors) == ["x", "y"]
        assert tensors["x"].dtype == np.float32
        np.testing.assert_array_equal(tensors["x"], np.arange(6).reshape(2, 3))
        assert meta == {"note": "hi"}

    @pytest.mark.parametrize("content", [b"", b"XAT", b"NOPE\x01\x00\x00\x00\x00"])
    def test_broken_files(self, tmp_path: Path, content: bytes):
        path = tmp_path / "broken.xt"
        path.write_bytes(content)

        with pytest.raises(ConfigError):
            read_tensors(path)

    def test_truncated_body(self, tmp_path: Path):
        path = tmp_path / "a.xt"
        write_tensors(path, "custom", {"x": np.zeros(16)})
        path.write_bytes(path.read_bytes()[:-8])

        with pytest.raises(ConfigError, match="truncated"):
            read_tensors(path)

    def test_kind_is_checked(self, tmp_path: Path, structure_latent: LatentGrid):
        """種類の違うコンテナを読み込もうとするとエラーになることを確認する"""
        path = tmp_path / "latent.xt"
        save_latent(path, structure_latent)

        with pytest.raises(ConfigError, match="not a mask grid"):
            load_mask(path)
        with pytest.raises(ConfigError, match="not an inversion record"):
            load_inversion_record(path)


class TestTypedContainers:
    def test_latent_keeps_timestep(self, tmp_path: Path, structure_latent: LatentGrid):
        path = tmp_path / "latent.xt"
        save_latent(path, LatentGrid(structure_latent.data, 7))

        loaded = load_latent(path)

        assert loaded.timestep_index == 7
        np.testing.assert_array_equal(loaded.data, structure_latent.data)

    def test_inversion_record(self, tmp_path: Path, toy_denoiser, small_config, structure_latent):
        """反転記録のヘッダーとノイズマップが保存・復元されることを確認する"""
        record = InversionService(toy_denoiser, build_schedule(small_config)).invert(
            structure_latent, small_config.prompt, seed=5
        )
        path = tmp_path / "record.xt"

        save_inversion_record(path, record)
        loaded = load_inversion_record(path)

        assert (loaded.num_steps, loaded.seed, loaded.prompt) == (20, 5, small_config.prompt)
        assert loaded.schedule_fingerprint == record.schedule_fingerprint
        np.testing.assert_array_equal(loaded.noise_map(20).data, record.noise_map(20).data)
        np.testing.assert_array_equal(loaded.terminal_latent.data, record.terminal_latent.data)

    def test_correspondence(self, tmp_path: Path):
        rows, cols = np.mgrid[0:3, 0:4]
        correspondence = CorrespondenceMap(
            rows=rows.astype(np.int64),
            cols=cols.astype(np.int64),
            confidence=np.full((3, 4), 0.5, dtype=np.float32),
            low_confidence=np.eye(3, 4, dtype=bool),
            source_shape=(3, 4),
        )
        path = tmp_path / "correspondence.xt"

        save_correspondence(path, correspondence)
        loaded = load_correspondence(path)

        np.testing.assert_array_equal(loaded.flat_indices, correspondence.flat_indices)
        np.testing.assert_array_equal(loaded.low_confidence, correspondence.low_confidence)
        assert loaded.source_shape == (3, 4)
