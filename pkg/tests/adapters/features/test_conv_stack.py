"""シード固定畳み込み特徴抽出器のテスト"""

import numpy as np
import pytest

from xattn_transfer.adapters.features.conv_stack import DEFAULT_CHANNELS, SeededConvFeatureExtractor
from xattn_transfer.domain.errors import InvalidShapeError


@pytest.fixture
def image() -> np.ndarray:
    rng = np.random.default_rng(0)
    return rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)


class TestSeededConvFeatureExtractor:
    def test_layer_shapes(self, image: np.ndarray):
        """各段の出力がチャネル数どおりで、解像度が段ごとに半分になることを確認する"""
        extractor = SeededConvFeatureExtractor()

        features = extractor.extract(image)

        assert extractor.layer_names == ["conv1_relu", "conv2_relu", "conv3_relu", "conv4_relu", "conv5_relu"]
        assert [feature.shape for feature in features] == [
            (channels, 32 // 2**index, 32 // 2**index) for index, channels in enumerate(DEFAULT_CHANNELS)
        ]
        assert all(np.all(feature >= 0.0) for feature in features)

    def test_is_deterministic(self, image: np.ndarray):
        first = SeededConvFeatureExtractor(seed=3).extract(image)
        second = SeededConvFeatureExtractor(seed=3).extract(image)

        for a, b in zip(first, second, strict=True):
            np.testing.assert_array_equal(a, b)

    def test_seed_changes_features(self, image: np.ndarray):
        first = SeededConvFeatureExtractor(seed=0).extract(image)
        second = SeededConvFeatureExtractor(seed=1).extract(image)

        assert not np.array_equal(first[0], second[0])

    @pytest.mark.parametrize("shape", [(8, 8, 3), (32, 32), (32, 32, 4)])
    def test_invalid_image_raises(self, shape: tuple[int, ...]):
        with pytest.raises(InvalidShapeError):
            SeededConvFeatureExtractor().extract(np.zeros(shape, dtype=np.uint8))
