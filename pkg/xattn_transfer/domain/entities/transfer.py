"""外観転写の設定と実行状態"""

from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Annotated, Any

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from xattn_transfer.domain.entities.attention import AttentionMode
from xattn_transfer.domain.entities.latent import LatentGrid, MaskGrid
from xattn_transfer.domain.entities.plan import AttentionPlan, LayerCapture
from xattn_transfer.domain.entities.schedule import BetaSpacing
from xattn_transfer.domain.errors import InvalidShapeError

MAX_SEED = 2**64


def _parse_window(value: Any) -> Any:
    # 設定ファイルでは "10,70" と書く
    if isinstance(value, str):
        parts = [part.strip() for part in value.split(",")]
        if len(parts) != 2:
            raise ValueError(f"window must be written as 'lo,hi' (got {value!r})")
        return (int(parts[0]), int(parts[1]))
    return value


def _parse_optional(value: Any) -> Any:
    if isinstance(value, str) and value.strip().lower() in {"", "none", "off"}:
        return None
    return value


Window = Annotated[tuple[int, int], BeforeValidator(_parse_window)]


class TransferConfig(BaseModel):
    """転写のハイパーパラメータ一式

    窓 (lo, hi) はサンプリングループ開始からの反復番号で数え、lo 以上 hi 未満が有効。
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_steps: int = Field(default=100, ge=1)
    injection_window_32: Window = (10, 70)
    injection_window_64: Window = (10, 90)
    contrast_beta: float = Field(default=1.67, ge=0.0)
    guidance_alpha: float = 3.5
    adain_window: Window = (20, 100)
    structure_injection_period: Annotated[int | None, BeforeValidator(_parse_optional)] = Field(default=5, ge=1)
    domain_prompt: str = "object"
    prompt_template: str = "A photo of a {domain}"
    seed: int = Field(default=0, ge=0, lt=MAX_SEED)
    use_masks: bool = False
    eta: float = Field(default=1.0, ge=0.0, le=1.0)
    adain_epsilon: float = Field(default=1e-5, gt=0.0)
    beta_start: float = Field(default=0.00085, gt=0.0, lt=1.0)
    beta_end: float = Field(default=0.012, gt=0.0, lt=1.0)
    beta_schedule: BetaSpacing = BetaSpacing.SCALED_LINEAR
    training_steps: Annotated[int | None, BeforeValidator(_parse_optional)] = Field(default=1000, ge=1)
    text_guidance_scale: float = Field(default=1.0, ge=0.0)
    drift_tolerance: float = Field(default=1e-3, gt=0.0)
    correspondence_step: Annotated[int | None, BeforeValidator(_parse_optional)] = Field(default=None, ge=0)
    correspondence_resolution: int = Field(default=32, ge=1)
    low_confidence_factor: float = Field(default=2.0, gt=0.0)

    @model_validator(mode="after")
    def _check_windows(self) -> "TransferConfig":
        for name in ("injection_window_32", "injection_window_64", "adain_window"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi <= self.num_steps:
                raise ValueError(f"{name}=({lo}, {hi}) must satisfy 0 <= lo <= hi <= num_steps={self.num_steps}")
        if self.beta_start > self.beta_end:
            raise ValueError("beta_start must not exceed beta_end")
        if self.training_steps is not None and self.training_steps < self.num_steps:
            raise ValueError("training_steps must be >= num_steps")
        if self.correspondence_step is not None and self.correspondence_step >= self.num_steps:
            raise ValueError("correspondence_step must be < num_steps")
        if "{domain}" not in self.prompt_template:
            raise ValueError("prompt_template must contain '{domain}'")
        return self

    @property
    def prompt(self) -> str:
        """デノイザーに渡す条件付けテキスト"""
        return self.prompt_template.format(domain=self.domain_prompt)

    @property
    def injection_windows(self) -> dict[int, tuple[int, int]]:
        """解像度 → 注入窓"""
        return {32: self.injection_window_32, 64: self.injection_window_64}

    @property
    def effective_correspondence_step(self) -> int:
        return self.num_steps // 2 if self.correspondence_step is None else self.correspondence_step

    def adain_active(self, step_index: int) -> bool:
        lo, hi = self.adain_window
        return lo <= step_index < hi

    def to_key_values(self) -> list[tuple[str, str]]:
        """設定ファイル書式 (key = value) の行に変換する"""
        rows: list[tuple[str, str]] = []
        for key, value in self.model_dump(mode="json").items():
            if value is None:
                text = "none"
            elif isinstance(value, list):
                text = ",".join(str(item) for item in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            else:
                text = str(value)
            rows.append((key, text))
        return rows


class MaskStrategy(StrEnum):
    """AdaIN マスクの入手方法"""

    USER_FILE = "user_file"
    ATTENTION_DERIVED = "attention_derived"
    NONE = "none"


@dataclass(frozen=True, slots=True)
class MaskPair:
    """出力ブランチ (target) と外観ブランチ (reference) のマスク"""

    target: MaskGrid | None = None
    reference: MaskGrid | None = None


@dataclass(slots=True)
class BranchState:
    """現在ステップでの 3 本の潜在と、そのステップで捕捉した K/V"""

    z_out: LatentGrid
    z_app: LatentGrid
    z_struct: LatentGrid
    step_index: int = 0
    appearance_features: dict[str, LayerCapture] = field(default_factory=dict[str, LayerCapture])
    structure_features: dict[str, LayerCapture] = field(default_factory=dict[str, LayerCapture])

    def __post_init__(self) -> None:
        self._check_shapes()

    def _check_shapes(self) -> None:
        if not self.z_out.shape == self.z_app.shape == self.z_struct.shape:
            raise InvalidShapeError(
                f"branch latents differ in shape: out={self.z_out.shape} app={self.z_app.shape} "
                f"struct={self.z_struct.shape}"
            )

    def advance(self, z_out: LatentGrid, z_app: LatentGrid, z_struct: LatentGrid) -> None:
        """3 本を同時に次のステップへ進める"""
        self.z_out, self.z_app, self.z_struct = z_out, z_app, z_struct
        self._check_shapes()
        self.step_index += 1
        self.appearance_features = {}
        self.structure_features = {}


@dataclass(frozen=True, slots=True)
class StepObservation:
    """1 ステップ分の捕捉結果 (マスク推定・対応抽出が購読する)"""

    step_index: int
    timestep: int
    plan: AttentionPlan
    output_captures: Mapping[str, LayerCapture]
    appearance_captures: Mapping[str, LayerCapture]
    structure_captures: Mapping[str, LayerCapture]


@dataclass(frozen=True, slots=True)
class StepRecord:
    """steps.txt に書き出す 1 ステップ分のエコー"""

    step_index: int
    timestep: int
    directives: Mapping[str, AttentionMode]
    guidance_applied: bool
    adain_applied: bool
    masked: bool = False


@dataclass(frozen=True, slots=True)
class TransferResult:
    """転写ループの結果"""

    output: LatentGrid
    appearance: LatentGrid
    structure: LatentGrid
    steps: tuple[StepRecord, ...]
    appearance_drift: float
    structure_drift: float
    warnings: tuple[str, ...] = ()
