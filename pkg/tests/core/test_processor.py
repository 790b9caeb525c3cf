"""processor (AttentionPlan の適用) のテスト"""

import math

import numpy as np
import pytest

from xattn_transfer.adapters.backbones.toy import TOY_CATALOG, ToyDenoiser
from xattn_transfer.core.attention import attend, merge_heads, split_heads
from xattn_transfer.core.processor import PlanProcessor, decoder_layers, resulting_mode, validate_plan
from xattn_transfer.domain.entities.attention import AttentionMode
from xattn_transfer.domain.entities.plan import AttentionPlan, LayerDirective
from xattn_transfer.domain.errors import InvalidShapeError, PlanError

PROMPT = "A photo of a object"
ALL_LAYERS = frozenset(layer.layer_id for layer in TOY_CATALOG)


def _substitution_plan(captures, contrast: float = 1.0) -> AttentionPlan:
    return AttentionPlan(
        directives={
            layer_id: LayerDirective(
                mode=AttentionMode.CROSS_IMAGE_APPEARANCE,
                contrast_factor=contrast,
                keys=capture.keys,
                values=capture.values,
            )
            for layer_id, capture in captures.items()
        }
    )


class TestSelfSubstitution:
    def test_own_features_reproduce_plain_prediction(self, toy_denoiser: ToyDenoiser, make_latent):
        """自分の K/V を β=1 で差し込むと通常の予測と 1e−5 以内で一致することを確認する (100 潜在)"""
        for seed in range(100):
            # Arrange
            latent = make_latent(seed)
            t = 1 + seed % 100
            plain = toy_denoiser.predict(latent, t, PROMPT, AttentionPlan(capture=ALL_LAYERS))

            # Act
            substituted = toy_denoiser.predict(latent, t, PROMPT, _substitution_plan(plain.captures))

            # Assert
            error = np.max(np.abs(substituted.prediction.epsilon - plain.prediction.epsilon))
            assert error < 1e-5

    def test_own_features_still_apply_contrast(self):
        """自分の K/V を渡しても β≠1 ならコントラストを掛けたカーネルと一致することを確認する"""
        # Arrange
        layer = decoder_layers(TOY_CATALOG, 32)[0]
        rng = np.random.default_rng(0)
        queries, keys, values = (rng.standard_normal((64, 8)).astype(np.float32) for _ in range(3))
        directive = LayerDirective(
            mode=AttentionMode.CROSS_IMAGE_STRUCTURE, contrast_factor=1.67, keys=keys, values=values
        )
        processor = PlanProcessor(AttentionPlan(directives={layer.layer_id: directive}), TOY_CATALOG)
        scale = 1.0 / math.sqrt(layer.key_dim // layer.head_count)
        heads = layer.head_count

        # Act
        output = processor(layer, queries, keys, values)

        # Assert
        contrasted, _ = attend(
            split_heads(queries, heads), split_heads(keys, heads), split_heads(values, heads), scale, 1.67
        )
        plain, _ = attend(split_heads(queries, heads), split_heads(keys, heads), split_heads(values, heads), scale)
        np.testing.assert_allclose(output, merge_heads(contrasted), rtol=0, atol=1e-6)
        assert not np.allclose(output, merge_heads(plain), atol=1e-3)

    def test_foreign_features_change_prediction(self, toy_denoiser: ToyDenoiser, structure_latent, appearance_latent):
        donor = toy_denoiser.predict(appearance_latent, 50, PROMPT, AttentionPlan(capture=ALL_LAYERS))
        plain = toy_denoiser.predict(structure_latent, 50, PROMPT)

        swapped = toy_denoiser.predict(structure_latent, 50, PROMPT, _substitution_plan(donor.captures))

        assert not np.allclose(swapped.prediction.epsilon, plain.prediction.epsilon)
        assert swapped.prediction.source_mode is AttentionMode.CROSS_IMAGE_APPEARANCE


class TestPlanProcessor:
    def test_capture_maps_are_head_means(self, toy_denoiser: ToyDenoiser, structure_latent):
        """capture_maps のときヘッド平均のマップ (行和 1) を捕捉することを確認する"""
        plan = AttentionPlan(capture=ALL_LAYERS, capture_maps=True)

        output = toy_denoiser.predict(structure_latent, 10, PROMPT, plan)

        for capture in output.captures.values():
            assert capture.attention_map is not None
            assert capture.attention_map.shape == (64, 64)
            np.testing.assert_allclose(capture.attention_map.sum(axis=-1), 1.0, atol=1e-5)

    def test_maps_are_not_captured_by_default(self, toy_denoiser: ToyDenoiser, structure_latent):
        output = toy_denoiser.predict(structure_latent, 10, PROMPT, AttentionPlan(capture=ALL_LAYERS))

        assert set(output.captures) == ALL_LAYERS
        assert all(capture.attention_map is None for capture in output.captures.values())

    def test_unknown_layer_raises(self):
        plan = AttentionPlan(directives={"decoder.missing": LayerDirective(mode=AttentionMode.SELF_ATTENTION)})

        with pytest.raises(PlanError, match="unknown layers"):
            PlanProcessor(plan, TOY_CATALOG)

    def test_cross_directive_without_features_raises(self):
        plan = AttentionPlan(directives={"decoder.attn_32": LayerDirective(mode=AttentionMode.CROSS_IMAGE_STRUCTURE)})

        with pytest.raises(PlanError, match="no external"):
            validate_plan(plan, TOY_CATALOG)

    def test_feature_dimension_mismatch_raises(self):
        directive = LayerDirective(
            mode=AttentionMode.CROSS_IMAGE_APPEARANCE,
            keys=np.zeros((64, 4), dtype=np.float32),
            values=np.zeros((64, 4), dtype=np.float32),
        )

        with pytest.raises(InvalidShapeError):
            validate_plan(AttentionPlan(directives={"decoder.attn_32": directive}), TOY_CATALOG)

    def test_external_token_count_may_differ(self):
        """外部 K/V のトークン数は自分と違ってよいことを確認する"""
        directive = LayerDirective(
            mode=AttentionMode.CROSS_IMAGE_APPEARANCE,
            keys=np.ones((10, 8), dtype=np.float32),
            values=np.ones((10, 8), dtype=np.float32),
        )
        layer = decoder_layers(TOY_CATALOG, 32)[0]
        processor = PlanProcessor(AttentionPlan(directives={layer.layer_id: directive}), TOY_CATALOG)

        output = processor(layer, np.ones((64, 8), dtype=np.float32), np.zeros((64, 8)), np.zeros((64, 8)))

        np.testing.assert_allclose(output, np.ones((64, 8)), atol=1e-6)


class TestResultingMode:
    @pytest.mark.parametrize(
        ("modes", "expected"),
        [
            ((), AttentionMode.SELF_ATTENTION),
            ((AttentionMode.SELF_ATTENTION,), AttentionMode.SELF_ATTENTION),
            ((AttentionMode.CROSS_IMAGE_APPEARANCE,), AttentionMode.CROSS_IMAGE_APPEARANCE),
            (
                (AttentionMode.CROSS_IMAGE_APPEARANCE, AttentionMode.CROSS_IMAGE_STRUCTURE),
                AttentionMode.CROSS_IMAGE_STRUCTURE,
            ),
        ],
    )
    def test_mode_of_plan(self, modes, expected):
        plan = AttentionPlan(directives={f"layer{i}": LayerDirective(mode=mode) for i, mode in enumerate(modes)})

        assert resulting_mode(plan) is expected

    def test_no_plan_is_self_attention(self):
        assert resulting_mode(None) is AttentionMode.SELF_ATTENTION
