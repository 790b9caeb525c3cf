"""correspondence のテスト"""

import numpy as np
import pytest
from scipy.special import softmax

from xattn_transfer.core.attention import compute_attention_map, contrast_map
from xattn_transfer.core.correspondence import (
    LOW_CONFIDENCE_GRAY,
    aggregate_maps,
    extract_correspondences,
    position_colormap,
    render_correspondence,
)
from xattn_transfer.domain.entities.analysis import Aggregation
from xattn_transfer.domain.entities.attention import AttentionMap
from xattn_transfer.domain.errors import ConfigError, InvalidShapeError

GRID = (32, 32)
TOKENS = GRID[0] * GRID[1]
DIM = 128


def _permuted_features(seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """外観キーと、それを並べ替えた出力クエリを作る"""
    rng = np.random.default_rng(seed)
    keys = rng.standard_normal((TOKENS, DIM)).astype(np.float32)
    permutation = rng.permutation(TOKENS)
    return keys[permutation], keys, permutation


class TestExtractCorrespondences:
    @pytest.mark.parametrize("seed", range(16))
    def test_recovers_known_permutation(self, seed: int):
        """並べ替えた特徴グリッドから既知の並べ替えを 95% 以上復元することを確認する"""
        # Arrange
        queries, keys, permutation = _permuted_features(seed)
        attention_map = compute_attention_map(queries, keys, scale=1 / np.sqrt(DIM)).weights

        # Act
        correspondence = extract_correspondences({"decoder": attention_map}, GRID, GRID)

        # Assert
        matched = np.mean(correspondence.flat_indices.ravel() == permutation)
        assert matched >= 0.95

        brute_force = np.array(
            [int(np.argmax(keys.astype(np.float64) @ queries[i].astype(np.float64))) for i in range(TOKENS)]
        )
        np.testing.assert_array_equal(correspondence.flat_indices.ravel(), brute_force)

    def test_ties_pick_smallest_index(self):
        """同点のキーは平坦インデックスの小さい方を選ぶことを確認する"""
        weights = np.full((4, 4), 0.25, dtype=np.float32)

        correspondence = extract_correspondences({"layer": weights}, (2, 2), (2, 2))

        np.testing.assert_array_equal(correspondence.rows, np.zeros((2, 2)))
        np.testing.assert_array_equal(correspondence.cols, np.zeros((2, 2)))

    def test_uniform_rows_are_low_confidence(self):
        """一様なマップの画素はすべて低信頼になることを確認する"""
        weights = np.full((4, 4), 0.25, dtype=np.float32)

        correspondence = extract_correspondences({"layer": weights}, (2, 2), (2, 2))

        assert correspondence.low_confidence.all()

    def test_peaked_rows_are_confident(self):
        weights = np.eye(4, dtype=np.float32)

        correspondence = extract_correspondences({"layer": weights}, (2, 2), (2, 2))

        assert not correspondence.low_confidence.any()
        np.testing.assert_array_equal(correspondence.flat_indices.ravel(), np.arange(4))

    @pytest.mark.parametrize("beta", [0.5, 1.67, 3.0])
    def test_contrast_keeps_winning_keys(self, beta: float):
        """β > 0 のコントラストや exp を掛けても各行の最大キーが変わらないことを確認する"""
        # Arrange
        rng = np.random.default_rng(7)
        weights = softmax(rng.standard_normal((16, 16)) * 3.0, axis=-1)
        expected = extract_correspondences({"layer": weights}, (4, 4), (4, 4)).flat_indices

        # Act
        contrasted = contrast_map(AttentionMap(weights), beta).weights
        exponentiated = np.exp(weights)

        # Assert
        for transformed in (contrasted, exponentiated):
            correspondence = extract_correspondences({"layer": transformed}, (4, 4), (4, 4))
            np.testing.assert_array_equal(correspondence.flat_indices, expected)

    def test_shape_mismatch_raises(self):
        with pytest.raises(InvalidShapeError):
            extract_correspondences({"layer": np.eye(4)}, (3, 3), (2, 2))


class TestAggregateMaps:
    def test_mean_of_layers(self):
        maps = {"a": np.eye(2), "b": np.zeros((2, 2))}

        np.testing.assert_allclose(aggregate_maps(maps), 0.5 * np.eye(2))

    def test_single_layer_selects_named_layer(self):
        maps = {"a": np.eye(2), "b": np.ones((2, 2))}

        np.testing.assert_array_equal(aggregate_maps(maps, Aggregation.SINGLE_LAYER, "b"), np.ones((2, 2)))

    def test_single_layer_without_name_needs_one_map(self):
        with pytest.raises(ConfigError):
            aggregate_maps({"a": np.eye(2), "b": np.eye(2)}, Aggregation.SINGLE_LAYER)

    def test_unknown_layer_raises(self):
        with pytest.raises(ConfigError):
            aggregate_maps({"a": np.eye(2)}, Aggregation.SINGLE_LAYER, "missing")

    def test_empty_maps_raise(self):
        with pytest.raises(ConfigError):
            aggregate_maps({})

    def test_mixed_resolutions_cannot_be_averaged(self):
        with pytest.raises(InvalidShapeError):
            aggregate_maps({"a": np.eye(2), "b": np.eye(3)})


class TestRenderCorrespondence:
    def test_identity_map_reproduces_colormap(self):
        """恒等対応では外観のカラーマップがそのまま描かれることを確認する"""
        colormap = position_colormap(2, 2)
        correspondence = extract_correspondences({"layer": np.eye(4)}, (2, 2), (2, 2))

        rendered = render_correspondence(correspondence, colormap)

        np.testing.assert_array_equal(rendered, colormap)

    def test_low_confidence_pixels_are_gray(self):
        colormap = position_colormap(2, 2)
        correspondence = extract_correspondences({"layer": np.full((4, 4), 0.25)}, (2, 2), (2, 2))

        rendered = render_correspondence(correspondence, colormap, gray_low_confidence=True)

        assert np.all(rendered == LOW_CONFIDENCE_GRAY)

    def test_colormap_resolution_must_match(self):
        correspondence = extract_correspondences({"layer": np.eye(4)}, (2, 2), (2, 2))

        with pytest.raises(InvalidShapeError):
            render_correspondence(correspondence, position_colormap(3, 3))

    def test_colormap_corners(self):
        colormap = position_colormap(5, 7)

        assert colormap.shape == (5, 7, 3)
        assert colormap.dtype == np.uint8
        assert tuple(colormap[0, 0]) == (0, 0, 255)
        assert tuple(colormap[-1, -1]) == (255, 255, 0)
