"""アブレーションのテスト"""

from xattn_transfer.adapters.backbones.toy import ToyDenoiser
from xattn_transfer.domain.entities.transfer import TransferConfig
from xattn_transfer.use_cases.ablation import EMPTY_WINDOW, ablation_variants, run_ablation_ladder


class TestAblationVariants:
    def test_variants_disable_one_mechanism_each(self):
        """各バリアントが仕組みを 1 つだけ外していることを確認する"""
        config = TransferConfig()

        variants = ablation_variants(config)

        assert list(variants) == [
            "full",
            "no_contrast",
            "no_adain",
            "no_structure_injection",
            "no_guidance",
            "baseline",
        ]
        assert variants["no_contrast"].contrast_beta == 1.0
        assert variants["no_contrast"].guidance_alpha == 3.5
        assert variants["no_adain"].adain_window == EMPTY_WINDOW
        assert variants["no_structure_injection"].structure_injection_period is None
        assert variants["no_guidance"].guidance_alpha == 1.0

    def test_baseline_disables_everything_but_keeps_windows(self):
        baseline = ablation_variants(TransferConfig())["baseline"]

        assert baseline.contrast_beta == 1.0
        assert baseline.adain_window == EMPTY_WINDOW
        assert baseline.structure_injection_period is None
        assert baseline.guidance_alpha == 1.0
        assert baseline.injection_window_32 == (10, 70)


class TestRunAblationLadder:
    def test_distances(self, toy_denoiser: ToyDenoiser, small_config, structure_latent, appearance_latent):
        """全部入りとベースラインの自分自身への距離が 0 になることを確認する"""
        # Act
        outcomes = {
            outcome.name: outcome
            for outcome in run_ablation_ladder(toy_denoiser, small_config, structure_latent, appearance_latent)
        }

        # Assert
        assert set(outcomes) == {"full", "no_contrast", "no_adain", "no_structure_injection", "no_guidance", "baseline"}
        assert outcomes["full"].distance_to_full == 0.0
        assert outcomes["baseline"].distance_to_baseline == 0.0
        assert outcomes["baseline"].distance_to_full > 0.0
        assert all(outcome.distance_to_full >= 0.0 for outcome in outcomes.values())

    def test_removing_a_mechanism_moves_toward_baseline(
        self, toy_denoiser: ToyDenoiser, small_config, structure_latent, appearance_latent
    ):
        """コントラスト・AdaIN・ガイダンスを 1 つ外すと全部入りよりベースラインに近づくことを確認する"""
        # Act
        outcomes = {
            outcome.name: outcome
            for outcome in run_ablation_ladder(toy_denoiser, small_config, structure_latent, appearance_latent)
        }

        # Assert
        full_gap = outcomes["full"].distance_to_baseline
        for name in ("no_contrast", "no_adain", "no_guidance"):
            assert outcomes[name].distance_to_baseline < full_gap, name
