"""ノイズスケジュールと反転記録"""

from dataclasses import dataclass
from enum import StrEnum
import hashlib

import numpy as np
import numpy.typing as npt

from xattn_transfer.domain.entities.latent import LatentGrid
from xattn_transfer.domain.errors import ConfigError, InvalidShapeError


@dataclass(frozen=True, slots=True)
class DiffusionSchedule:
    """推論ステップ 1..T の β と ᾱ

    Attributes:
        betas: 推論ステップごとの実効 β (長さ T)
        alpha_bars: ᾱ_t (長さ T)。直接構成では Π_{s≤t}(1−β_s)、
            ストライド構成では final_alpha_bar · Π_{s≤t}(1−β_s)
        final_alpha_bar: 最終ステップが目標とする x_0 側の ᾱ (t = 0 の値)
    """

    betas: npt.NDArray[np.float64]
    alpha_bars: npt.NDArray[np.float64]
    final_alpha_bar: float

    def __post_init__(self) -> None:
        betas = np.asarray(self.betas, dtype=np.float64)
        alpha_bars = np.asarray(self.alpha_bars, dtype=np.float64)
        if betas.ndim != 1 or betas.shape != alpha_bars.shape or betas.size < 1:
            raise InvalidShapeError("betas and alpha_bars must be non-empty vectors of equal length")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise ConfigError("betas must lie in (0, 1)")
        if np.any(alpha_bars <= 0) or np.any(alpha_bars >= 1):
            raise ConfigError("alpha_bars must lie in (0, 1)")
        if np.any(np.diff(alpha_bars) >= 0):
            raise ConfigError("alpha_bars must be strictly decreasing")
        if not alpha_bars[0] < self.final_alpha_bar <= 1.0:
            raise ConfigError("final_alpha_bar must exceed alpha_bars[0] and not exceed 1")
        betas.setflags(write=False)
        alpha_bars.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bars", alpha_bars)

    @property
    def num_steps(self) -> int:
        return int(self.betas.size)

    def alpha_bar(self, t: int) -> float:
        """ステップ t (0..T) の ᾱ。t = 0 は final_alpha_bar"""
        if not 0 <= t <= self.num_steps:
            raise ConfigError(f"timestep {t} outside [0, {self.num_steps}]")
        if t == 0:
            return float(self.final_alpha_bar)
        return float(self.alpha_bars[t - 1])

    def fingerprint(self) -> str:
        """スケジュール内容のハッシュ (キャッシュキーや記録の照合に使う)"""
        digest = hashlib.sha256()
        digest.update(self.alpha_bars.tobytes())
        digest.update(np.float64(self.final_alpha_bar).tobytes())
        return digest.hexdigest()[:16]


@dataclass(frozen=True, slots=True)
class InversionRecord:
    """edit-friendly DDPM 反転の結果

    noise_maps[t - 1] がステップ t で注入するノイズ z_t。
    """

    terminal_latent: LatentGrid
    noise_maps: tuple[LatentGrid, ...]
    prompt: str
    seed: int
    eta: float = 1.0
    schedule_fingerprint: str = ""

    def __post_init__(self) -> None:
        if not self.noise_maps:
            raise InvalidShapeError("an inversion record needs at least one noise map")
        shape = self.terminal_latent.shape
        for index, noise in enumerate(self.noise_maps, start=1):
            if noise.shape != shape:
                raise InvalidShapeError(f"noise map for step {index} has shape {noise.shape}, expected {shape}")

    @property
    def num_steps(self) -> int:
        return len(self.noise_maps)

    def noise_map(self, t: int) -> LatentGrid:
        """ステップ t (1..T) の注入ノイズ"""
        if not 1 <= t <= self.num_steps:
            raise ConfigError(f"timestep {t} outside [1, {self.num_steps}]")
        return self.noise_maps[t - 1]


class BetaSpacing(StrEnum):
    """β の並べ方"""

    LINEAR = "linear"
    SCALED_LINEAR = "scaled_linear"
