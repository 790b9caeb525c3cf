"""TransferConfig と転写状態のテスト"""

import numpy as np
from pydantic import ValidationError
import pytest

from xattn_transfer.domain.entities.latent import LatentGrid
from xattn_transfer.domain.entities.schedule import BetaSpacing
from xattn_transfer.domain.entities.transfer import BranchState, TransferConfig
from xattn_transfer.domain.errors import InvalidShapeError


class TestTransferConfig:
    def test_defaults(self):
        """既定値が付録のハイパーパラメータと一致することを確認する"""
        config = TransferConfig()

        assert config.num_steps == 100
        assert config.injection_window_32 == (10, 70)
        assert config.injection_window_64 == (10, 90)
        assert config.contrast_beta == 1.67
        assert config.guidance_alpha == 3.5
        assert config.adain_window == (20, 100)
        assert config.structure_injection_period == 5
        assert config.beta_schedule is BetaSpacing.SCALED_LINEAR
        assert config.prompt == "A photo of a object"

    def test_string_values_are_parsed(self):
        """設定ファイル由来の文字列が型付きで解釈されることを確認する"""
        config = TransferConfig.model_validate(
            {
                "num_steps": "120",
                "injection_window_32": "5, 30",
                "structure_injection_period": "none",
                "training_steps": "off",
                "use_masks": "true",
            }
        )

        assert config.num_steps == 120
        assert config.injection_window_32 == (5, 30)
        assert config.structure_injection_period is None
        assert config.training_steps is None
        assert config.use_masks is True

    @pytest.mark.parametrize(
        "values",
        [
            {"injection_window_32": (70, 10)},
            {"injection_window_64": (10, 101)},
            {"num_steps": 50},
            {"contrast_beta": -1.0},
            {"structure_injection_period": 0},
            {"eta": 1.5},
            {"training_steps": 10},
            {"correspondence_step": 100},
            {"prompt_template": "no placeholder"},
            {"injection_window_32": "10"},
            {"unknown_key": 1},
        ],
    )
    def test_invalid_values_raise(self, values):
        with pytest.raises(ValidationError):
            TransferConfig.model_validate(values)

    def test_adain_window_is_half_open(self):
        config = TransferConfig()

        assert not config.adain_active(19)
        assert config.adain_active(20)
        assert config.adain_active(99)

    def test_correspondence_step_defaults_to_middle(self):
        assert TransferConfig().effective_correspondence_step == 50
        assert TransferConfig(correspondence_step=3).effective_correspondence_step == 3

    def test_key_values_round_trip(self):
        """to_key_values の文字列からもとの設定を復元できることを確認する"""
        config = TransferConfig(structure_injection_period=None, use_masks=True, domain_prompt="cat")

        restored = TransferConfig.model_validate(dict(config.to_key_values()))

        assert restored == config
        assert dict(config.to_key_values())["injection_window_32"] == "10,70"

    def test_config_is_frozen(self):
        config = TransferConfig()

        with pytest.raises(ValidationError):
            config.num_steps = 10  # type: ignore[misc]


class TestBranchState:
    def test_shape_mismatch_raises(self):
        a = LatentGrid(np.zeros((4, 8, 8), dtype=np.float32))
        b = LatentGrid(np.zeros((4, 4, 4), dtype=np.float32))

        with pytest.raises(InvalidShapeError):
            BranchState(z_out=a, z_app=b, z_struct=a)

    def test_advance_clears_features(self):
        latent = LatentGrid(np.zeros((4, 8, 8), dtype=np.float32))
        state = BranchState(z_out=latent, z_app=latent, z_struct=latent)
        state.appearance_features = {"layer": None}  # type: ignore[dict-item]

        state.advance(latent, latent, latent)

        assert state.step_index == 1
        assert state.appearance_features == {}
