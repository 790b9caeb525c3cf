"""画像間アテンションによる外観転写のユースケース

構造画像と外観画像をそれぞれ反転し、z_T^out = z_T^struct から 3 本の潜在
(out / app / struct) を同じステップで進める。1 反復の順序は
捕捉 → 画像間アテンション (コントラスト込み) → ガイダンス → サンプリング → AdaIN。
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import logging

import numpy as np
import numpy.typing as npt

from xattn_transfer.core.diffusion_schedule import sampling_step
from xattn_transfer.core.guidance import combine
from xattn_transfer.core.latent_ops import adain
from xattn_transfer.domain.entities.attention import AttentionMode
from xattn_transfer.domain.entities.latent import LatentGrid, NoisePrediction
from xattn_transfer.domain.entities.plan import AttentionPlan, LayerCapture
from xattn_transfer.domain.entities.transfer import (
    BranchState,
    MaskPair,
    StepObservation,
    StepRecord,
    TransferConfig,
    TransferResult,
)
from xattn_transfer.domain.errors import InvalidShapeError
from xattn_transfer.domain.ports.denoiser import DenoiserPort, LatentCodecPort
from xattn_transfer.domain.ports.inversion_cache import InversionCachePort
from xattn_transfer.domain.ports.mask_provider import MaskProviderPort, StepObserverPort
from xattn_transfer.use_cases.inversion import InversionService, build_schedule
from xattn_transfer.use_cases.step_planning import injection_layer_ids, require_injection_layers, step_plan

logger = logging.getLogger(__name__)


@dataclass
class AttentionRecorder:
    """出力ブランチの画像間アテンションマップ (ヘッド平均・コントラスト前) を集める"""

    maps: dict[str, npt.NDArray[np.float32]] = field(default_factory=dict[str, npt.NDArray[np.float32]])

    def observe(self, observation: StepObservation) -> None:
        for layer_id, capture in observation.output_captures.items():
            if capture.attention_map is not None and layer_id in observation.plan.directives:
                self.maps[f"step{observation.step_index:03d}/{layer_id}"] = capture.attention_map


class AppearanceTransferUseCase:
    """外観転写ループ

    Args:
        denoiser: ノイズ予測器
        config: ハイパーパラメータ
        mask_provider: AdaIN 用マスクの供給元 (config.use_masks が真のときだけ使う)
        observers: 各ステップの捕捉結果を受け取る購読者
        cache: 反転記録のキャッシュ
        record_attention: 出力ブランチの画像間アテンションマップを捕捉するか
    """

    def __init__(
        self,
        denoiser: DenoiserPort,
        config: TransferConfig,
        *,
        mask_provider: MaskProviderPort | None = None,
        observers: Sequence[StepObserverPort] = (),
        cache: InversionCachePort | None = None,
        record_attention: bool = False,
    ) -> None:
        self._denoiser = denoiser
        self._config = config
        self._mask_provider = mask_provider if config.use_masks else None
        self._observers: list[StepObserverPort] = list(observers)
        if self._mask_provider is not None:
            self._observers.append(self._mask_provider)
        self._cache = cache
        self._record_attention = record_attention
        self._schedule = build_schedule(config)

    def run(self, structure: LatentGrid, appearance: LatentGrid) -> TransferResult:
        """構造潜在と外観潜在から出力潜在 z_0^out を作る

        Raises:
            InvalidShapeError: 2 つの潜在の形状が異なる
            BackboneError: カタログに注入解像度のレイヤーが無い
            InversionDegenerateError: 反転に失敗した
        """
        if structure.shape != appearance.shape:
            raise InvalidShapeError(f"structure {structure.shape} and appearance {appearance.shape} differ in shape")
        config = self._config
        catalog = self._denoiser.layer_catalog
        require_injection_layers(config, catalog)
        prompt = config.prompt

        inverter = InversionService(self._denoiser, self._schedule, self._cache)
        record_struct = inverter.invert(structure, prompt, config.seed, config.eta)
        record_app = inverter.invert(appearance, prompt, config.seed, config.eta)

        state = BranchState(
            z_out=record_struct.terminal_latent,
            z_app=record_app.terminal_latent,
            z_struct=record_struct.terminal_latent,
        )
        injection_layers = injection_layer_ids(config, catalog)
        watched = injection_layers if self._observers else frozenset[str]()
        num_steps = self._schedule.num_steps
        records: list[StepRecord] = []

        logger.info("Starting transfer over %d steps (prompt=%r)", num_steps, prompt)
        for step_index in range(num_steps):
            t = num_steps - step_index
            plan = step_plan(step_index, config, catalog)
            needs_structure = AttentionMode.CROSS_IMAGE_STRUCTURE in plan.modes

            app_output = self._denoiser.predict(state.z_app, t, prompt, AttentionPlan(capture=injection_layers))
            struct_output = self._denoiser.predict(
                state.z_struct,
                t,
                prompt,
                AttentionPlan(capture=frozenset(plan.directives) if needs_structure else frozenset()),
            )
            state.appearance_features = dict(app_output.captures)
            state.structure_features = dict(struct_output.captures)

            eps_out, out_captures, guided = self._predict_output(state, t, plan, watched)

            z_out = sampling_step(state.z_out, eps_out, t, self._schedule, record_struct.noise_map(t), config.eta)
            z_app = sampling_step(
                state.z_app, app_output.prediction, t, self._schedule, record_app.noise_map(t), config.eta
            )
            z_struct = sampling_step(
                state.z_struct, struct_output.prediction, t, self._schedule, record_struct.noise_map(t), config.eta
            )

            observation = StepObservation(
                step_index=step_index,
                timestep=t,
                plan=plan,
                output_captures=out_captures,
                appearance_captures=app_output.captures,
                structure_captures=struct_output.captures,
            )
            for observer in self._observers:
                observer.observe(observation)

            adain_applied = config.adain_active(step_index)
            masks: MaskPair | None = None
            if adain_applied:
                if self._mask_provider is not None:
                    masks = self._mask_provider.masks(z_out.spatial_shape)
                z_out = adain(
                    z_out,
                    z_app,
                    masks.target if masks else None,
                    masks.reference if masks else None,
                    config.adain_epsilon,
                )

            state.advance(z_out, z_app, z_struct)
            records.append(
                StepRecord(
                    step_index=step_index,
                    timestep=t,
                    directives={layer_id: d.mode for layer_id, d in plan.directives.items()},
                    guidance_applied=guided,
                    adain_applied=adain_applied,
                    masked=masks is not None,
                )
            )

        appearance_drift = float(np.max(np.abs(state.z_app.data - appearance.data)))
        structure_drift = float(np.max(np.abs(state.z_struct.data - structure.data)))
        warnings: list[str] = []
        for branch, drift in (("appearance", appearance_drift), ("structure", structure_drift)):
            if drift > config.drift_tolerance:
                message = (
                    f"{branch} branch reconstruction drift {drift:.3e} exceeds tolerance {config.drift_tolerance:.1e}"
                )
                logger.warning(message)
                warnings.append(message)
        logger.info(
            "Transfer finished (appearance drift=%.3e, structure drift=%.3e)", appearance_drift, structure_drift
        )

        return TransferResult(
            output=state.z_out,
            appearance=state.z_app,
            structure=state.z_struct,
            steps=tuple(records),
            appearance_drift=appearance_drift,
            structure_drift=structure_drift,
            warnings=tuple(warnings),
        )

    def _predict_output(
        self,
        state: BranchState,
        t: int,
        plan: AttentionPlan,
        watched: frozenset[str],
    ) -> tuple[NoisePrediction, Mapping[str, LayerCapture], bool]:
        """出力ブランチの予測 (予測, 捕捉, ガイダンス適用有無)"""
        prompt = self._config.prompt
        if plan.is_empty:
            plain = self._denoiser.predict(state.z_out, t, prompt, AttentionPlan(capture=watched))
            return plain.prediction, plain.captures, False

        capture = watched | frozenset(plan.directives)
        if AttentionMode.CROSS_IMAGE_STRUCTURE in plan.modes:
            # 構造注入ステップは注入済みの予測をそのまま使う
            filled = plan.with_features(state.structure_features).with_capture(capture, maps=self._record_attention)
            injected = self._denoiser.predict(state.z_out, t, prompt, filled)
            return injected.prediction, injected.captures, False

        filled = plan.with_features(state.appearance_features).with_capture(capture, maps=self._record_attention)
        cross = self._denoiser.predict(state.z_out, t, prompt, filled)
        plain = self._denoiser.predict(state.z_out, t, prompt)
        return combine(plain.prediction, cross.prediction, self._config.guidance_alpha), cross.captures, True


def transfer(
    image_struct: npt.NDArray[np.uint8],
    image_app: npt.NDArray[np.uint8],
    config: TransferConfig,
    denoiser: DenoiserPort,
    codec: LatentCodecPort,
    mask_provider: MaskProviderPort | None = None,
) -> tuple[npt.NDArray[np.uint8], TransferResult]:
    """画像 2 枚から転写画像を作る (エンコード → 転写ループ → デコード)"""
    use_case = AppearanceTransferUseCase(denoiser, config, mask_provider=mask_provider)
    result = use_case.run(codec.encode(image_struct), codec.encode(image_app))
    return codec.decode(result.output), result
