"""attention のテスト"""

import numpy as np
import pytest
from scipy.special import softmax

from xattn_transfer.core.attention import (
    apply_attention,
    attend,
    compute_attention_map,
    contrast_map,
    cross_image_attention,
    merge_heads,
    self_attention,
    split_heads,
)
from xattn_transfer.domain.entities.attention import AttentionContext, AttentionMap
from xattn_transfer.domain.errors import ConfigError, InvalidShapeError


@pytest.fixture
def random_rows() -> np.ndarray:
    """1,000 行の softmax 済みマップ (float64)"""
    rng = np.random.default_rng(0)
    return softmax(rng.standard_normal((1000, 16)) * 2.0, axis=-1)


class TestComputeAttentionMap:
    def test_rows_are_probability_distributions(self):
        """各行の和が 1、要素が非負であることを確認する"""
        # Arrange
        rng = np.random.default_rng(1)
        queries = rng.standard_normal((12, 8)).astype(np.float32)
        keys = rng.standard_normal((20, 8)).astype(np.float32)

        # Act
        attention_map = compute_attention_map(queries, keys, scale=1 / np.sqrt(8))

        # Assert
        assert attention_map.weights.shape == (12, 20)
        assert attention_map.weights.dtype == np.float32
        assert np.all(attention_map.weights >= 0)
        np.testing.assert_allclose(attention_map.weights.sum(axis=-1), 1.0, atol=1e-6)

    def test_large_logits_do_not_overflow(self):
        """大きなロジットでも有限の値になることを確認する"""
        queries = np.full((2, 4), 1e3, dtype=np.float32)
        keys = np.array([[1e3] * 4, [-1e3] * 4], dtype=np.float32)

        attention_map = compute_attention_map(queries, keys, scale=1.0)

        assert np.all(np.isfinite(attention_map.weights))
        np.testing.assert_allclose(attention_map.weights[:, 0], 1.0)

    def test_inner_dimension_mismatch_raises(self):
        """Q と K の次元が合わないと InvalidShapeError になることを確認する"""
        with pytest.raises(InvalidShapeError):
            compute_attention_map(np.zeros((3, 4)), np.zeros((5, 6)), scale=1.0)

    def test_non_positive_scale_raises(self):
        with pytest.raises(ConfigError):
            compute_attention_map(np.zeros((3, 4)), np.zeros((5, 4)), scale=0.0)

    def test_leading_head_dimension(self):
        """[H, N, d] の入力をヘッドごとに計算することを確認する"""
        rng = np.random.default_rng(2)
        queries = rng.standard_normal((4, 6, 2)).astype(np.float32)
        keys = rng.standard_normal((4, 9, 2)).astype(np.float32)

        attention_map = compute_attention_map(queries, keys, scale=0.5)

        assert attention_map.weights.shape == (4, 6, 9)
        single = compute_attention_map(queries[3], keys[3], scale=0.5)
        np.testing.assert_allclose(attention_map.weights[3], single.weights, atol=1e-7)


class TestApplyAttention:
    @pytest.mark.parametrize(
        ("weights", "values", "expected"),
        [
            ([[1.0]], [[7.0, 7.0]], [[7.0, 7.0]]),
            ([[0.25, 0.75]], [[4.0], [0.0]], [[1.0]]),
        ],
    )
    def test_hand_evaluated_products(self, weights, values, expected):
        """手計算した map·V と一致することを確認する"""
        output = apply_attention(AttentionMap(np.array(weights)), np.array(values))

        np.testing.assert_allclose(output, expected, rtol=0, atol=1e-12)

    def test_key_permutation_leaves_output_unchanged(self, random_rows: np.ndarray):
        """キー (マップの列) と値の行を同じ置換で並べ替えても出力が変わらないことを確認する"""
        # Arrange
        rng = np.random.default_rng(5)
        weights = random_rows[:50]
        values = rng.standard_normal((16, 3))
        permutation = rng.permutation(16)

        # Act
        permuted = apply_attention(AttentionMap(weights[:, permutation]), values[permutation])

        # Assert
        np.testing.assert_allclose(permuted, apply_attention(AttentionMap(weights), values), rtol=0, atol=1e-9)

    def test_value_count_mismatch_raises(self):
        with pytest.raises(InvalidShapeError):
            apply_attention(AttentionMap(np.array([[0.5, 0.5]])), np.zeros((3, 2)))


class TestContrastMap:
    @pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 1.67, 3.0])
    def test_mean_preserved_and_variance_scaled(self, random_rows: np.ndarray, beta: float):
        """行平均を保ち、行分散を β² 倍にすることを確認する"""
        # Act
        contrasted = contrast_map(AttentionMap(random_rows), beta).weights

        # Assert
        np.testing.assert_allclose(contrasted.mean(axis=-1), random_rows.mean(axis=-1), rtol=0, atol=1e-9)
        np.testing.assert_allclose(contrasted.var(axis=-1), beta**2 * random_rows.var(axis=-1), rtol=0, atol=1e-9)
        np.testing.assert_allclose(contrasted.sum(axis=-1), 1.0, atol=1e-6)

    def test_beta_one_is_identity(self, random_rows: np.ndarray):
        """β = 1 では入力そのものを返すことを確認する"""
        attention_map = AttentionMap(random_rows)

        assert contrast_map(attention_map, 1.0) is attention_map

    def test_hand_evaluated_row(self):
        """[0.1, 0.2, 0.7] に β = 1.67 を掛けた手計算の値と一致することを確認する"""
        row = AttentionMap(np.array([[0.1, 0.2, 0.7]]))

        contrasted = contrast_map(row, 1.67).weights

        np.testing.assert_allclose(contrasted[0], [-0.056333, 0.110667, 0.945667], atol=1e-6)

    @pytest.mark.parametrize("beta", [0.0, 1.67, 3.0])
    def test_uniform_row_is_fixed_point(self, beta: float):
        """一様な行は β に関係なく変わらないことを確認する"""
        contrasted = contrast_map(AttentionMap(np.array([[0.5, 0.5]])), beta).weights

        np.testing.assert_allclose(contrasted, [[0.5, 0.5]])

    def test_beta_zero_gives_row_mean(self, random_rows: np.ndarray):
        contrasted = contrast_map(AttentionMap(random_rows), 0.0).weights

        np.testing.assert_allclose(contrasted, np.full_like(random_rows, 1 / 16), atol=1e-12)

    def test_precision_is_kept(self, random_rows: np.ndarray):
        """float64 のマップは float64 のまま計算されることを確認する"""
        assert contrast_map(AttentionMap(random_rows), 2.0).weights.dtype == np.float64
        assert contrast_map(AttentionMap(random_rows.astype(np.float32)), 2.0).weights.dtype == np.float32

    def test_negative_beta_raises(self, random_rows: np.ndarray):
        with pytest.raises(ConfigError):
            contrast_map(AttentionMap(random_rows), -0.1)


class TestCrossImageAttention:
    def test_beta_one_matches_plain_attention_bitwise(self):
        """β = 1 の画像間アテンションが map·V と同一になることを確認する"""
        # Arrange
        rng = np.random.default_rng(3)
        q_out = rng.standard_normal((10, 4)).astype(np.float32)
        k_src = rng.standard_normal((14, 4)).astype(np.float32)
        v_src = rng.standard_normal((14, 6)).astype(np.float32)

        # Act
        output = cross_image_attention(q_out, k_src, v_src, 0.5, 1.0)

        # Assert
        expected = apply_attention(compute_attention_map(q_out, k_src, 0.5), v_src)
        np.testing.assert_array_equal(output, expected)

    def test_contrast_sharpens_output(self):
        """β > 1 で出力が最大重みのキーの値に近づくことを確認する"""
        q_out = np.array([[1.0, 0.0]], dtype=np.float32)
        k_src = np.array([[2.0, 0.0], [0.0, 0.0], [-2.0, 0.0]], dtype=np.float32)
        v_src = np.array([[1.0], [0.0], [-1.0]], dtype=np.float32)

        plain = cross_image_attention(q_out, k_src, v_src, 1.0, 1.0)
        sharpened = cross_image_attention(q_out, k_src, v_src, 1.0, 1.67)

        assert sharpened[0, 0] > plain[0, 0]

    def test_attend_returns_pre_contrast_map(self):
        rng = np.random.default_rng(4)
        q = rng.standard_normal((5, 4)).astype(np.float32)
        k = rng.standard_normal((7, 4)).astype(np.float32)
        v = rng.standard_normal((7, 4)).astype(np.float32)

        _, attention_map = attend(q, k, v, 0.5, contrast_factor=3.0)

        np.testing.assert_array_equal(attention_map.weights, compute_attention_map(q, k, 0.5).weights)

    def test_key_value_count_mismatch_raises(self):
        with pytest.raises(InvalidShapeError):
            cross_image_attention(np.zeros((2, 4)), np.zeros((3, 4)), np.zeros((4, 4)), 1.0)


class TestHeads:
    def test_split_and_merge_round_trip(self):
        """split_heads → merge_heads で元に戻ることを確認する"""
        x = np.arange(24, dtype=np.float32).reshape(3, 8)

        heads = split_heads(x, 4)

        assert heads.shape == (4, 3, 2)
        np.testing.assert_array_equal(merge_heads(heads), x)

    def test_indivisible_dimension_raises(self):
        with pytest.raises(InvalidShapeError):
            split_heads(np.zeros((3, 6)), 4)

    def test_self_attention_with_single_key_returns_value(self):
        """キーが 1 つならその値がそのまま出力になることを確認する"""
        context = AttentionContext(
            queries=np.ones((3, 4), dtype=np.float32),
            keys=np.ones((1, 4), dtype=np.float32),
            values=np.array([[1.0, 2.0, 3.0, 4.0]], dtype=np.float32),
            head_count=2,
        )

        output = self_attention(context, contrast_factor=1.67)

        np.testing.assert_allclose(output, np.tile([1.0, 2.0, 3.0, 4.0], (3, 1)), atol=1e-6)

    def test_context_derives_scale(self):
        context = AttentionContext(
            queries=np.zeros((2, 8)), keys=np.zeros((3, 8)), values=np.zeros((3, 8)), head_count=2
        )

        assert context.effective_scale == pytest.approx(0.5)
