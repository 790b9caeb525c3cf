"""ノイズスケジュール・サンプリングステップ・edit-friendly DDPM 反転

ステップ t のノイズは Philox(key=[seed, t]) から生成するので、同じ seed なら
反転結果はビット単位で再現する。
"""

from collections.abc import Callable
import logging
import math

import numpy as np
import numpy.typing as npt

from xattn_transfer.domain.entities.latent import LatentGrid, NoisePrediction
from xattn_transfer.domain.entities.plan import AttentionPlan
from xattn_transfer.domain.entities.schedule import BetaSpacing, DiffusionSchedule, InversionRecord
from xattn_transfer.domain.errors import ConfigError, InvalidShapeError, InversionDegenerateError
from xattn_transfer.domain.ports.denoiser import DenoiserPort

logger = logging.getLogger(__name__)

PlanFactory = Callable[[int], AttentionPlan | None]


def _beta_ramp(count: int, beta_start: float, beta_end: float, spacing: BetaSpacing) -> npt.NDArray[np.float64]:
    if spacing is BetaSpacing.SCALED_LINEAR:
        return np.linspace(math.sqrt(beta_start), math.sqrt(beta_end), count, dtype=np.float64) ** 2
    return np.linspace(beta_start, beta_end, count, dtype=np.float64)


def make_schedule(
    num_steps: int,
    beta_start: float,
    beta_end: float,
    spacing: BetaSpacing | str = BetaSpacing.LINEAR,
    training_steps: int | None = None,
) -> DiffusionSchedule:
    """推論用スケジュールを構築する

    training_steps が None なら num_steps 個の β を直接並べる。指定した場合は
    training_steps 個の学習スケジュールから ᾱ をストライド training_steps // num_steps、
    オフセット 1 で間引く。

    Raises:
        ConfigError: β の範囲やステップ数が不正
    """
    spacing = BetaSpacing(spacing)
    if num_steps < 1:
        raise ConfigError(f"num_steps must be >= 1 (got {num_steps})")
    if not 0 < beta_start <= beta_end < 1:
        raise ConfigError(f"betas must satisfy 0 < beta_start <= beta_end < 1 (got {beta_start}, {beta_end})")

    if training_steps is None:
        betas = _beta_ramp(num_steps, beta_start, beta_end, spacing)
        alpha_bars = np.cumprod(1.0 - betas)
        # 最終ステップの目標は半ステップ分だけノイズを残した水準
        final_alpha_bar = 1.0 - betas[0] / 2.0
        return DiffusionSchedule(betas=betas, alpha_bars=alpha_bars, final_alpha_bar=float(final_alpha_bar))

    if training_steps < num_steps:
        raise ConfigError(f"training_steps ({training_steps}) must be >= num_steps ({num_steps})")
    train_betas = _beta_ramp(training_steps, beta_start, beta_end, spacing)
    train_alpha_bars = np.cumprod(1.0 - train_betas)
    stride = training_steps // num_steps
    offset = 1 if stride > 1 else 0
    alpha_bars = train_alpha_bars[np.arange(num_steps) * stride + offset]
    final_alpha_bar = float(train_alpha_bars[0]) if offset else float(1.0 - train_betas[0] / 2.0)
    previous = np.concatenate(([final_alpha_bar], alpha_bars[:-1]))
    betas = 1.0 - alpha_bars / previous
    return DiffusionSchedule(betas=betas, alpha_bars=alpha_bars, final_alpha_bar=final_alpha_bar)


def _epsilon_array(epsilon: NoisePrediction | LatentGrid | npt.ArrayLike) -> npt.NDArray[np.float32]:
    if isinstance(epsilon, NoisePrediction):
        return epsilon.epsilon
    if isinstance(epsilon, LatentGrid):
        return epsilon.data
    return np.asarray(epsilon, dtype=np.float32)


def predict_x0(
    x_t: LatentGrid,
    epsilon: NoisePrediction | LatentGrid | npt.ArrayLike,
    alpha_bar_t: float,
) -> LatentGrid:
    """(x_t − √(1−ᾱ_t)·ε)/√ᾱ_t"""
    if not 0 < alpha_bar_t <= 1:
        raise ConfigError(f"alpha_bar must lie in (0, 1] (got {alpha_bar_t})")
    eps = _epsilon_array(epsilon)
    if eps.shape != x_t.data.shape:
        raise InvalidShapeError(f"epsilon shape {eps.shape} does not match latent shape {x_t.data.shape}")
    x0 = (x_t.data - math.sqrt(1.0 - alpha_bar_t) * eps) / math.sqrt(alpha_bar_t)
    return x_t.replace(x0, timestep_index=0)


def step_sigma(t: int, schedule: DiffusionSchedule, eta: float) -> float:
    """DDIM の分散項 σ_t に eta を掛けた値"""
    alpha_bar_t = schedule.alpha_bar(t)
    alpha_bar_prev = schedule.alpha_bar(t - 1)
    variance = (1.0 - alpha_bar_prev) / (1.0 - alpha_bar_t) * (1.0 - alpha_bar_t / alpha_bar_prev)
    return eta * math.sqrt(max(variance, 0.0))


def sampling_step(
    x_t: LatentGrid,
    epsilon: NoisePrediction | LatentGrid | npt.ArrayLike,
    t: int,
    schedule: DiffusionSchedule,
    injected_noise: LatentGrid | None = None,
    eta: float = 0.0,
) -> LatentGrid:
    """x_t から x_{t−1} を計算する

    x_{t−1} = √ᾱ_{t−1}·x̂_0 + √(1−ᾱ_{t−1}−σ_t²)·ε + σ_t·z。eta = 0 は決定的 DDIM、
    eta = 1 と記録済みノイズの組み合わせが edit-friendly DDPM の再生経路。

    Raises:
        ConfigError: t や eta が範囲外、または eta > 0 でノイズが無い
    """
    if not 1 <= t <= schedule.num_steps:
        raise ConfigError(f"timestep {t} outside [1, {schedule.num_steps}]")
    if not 0 <= eta <= 1:
        raise ConfigError(f"eta must lie in [0, 1] (got {eta})")
    if eta > 0 and injected_noise is None:
        raise ConfigError("injected_noise is required when eta > 0")

    eps = _epsilon_array(epsilon)
    alpha_bar_prev = schedule.alpha_bar(t - 1)
    sigma = step_sigma(t, schedule, eta)
    x0 = predict_x0(x_t, eps, schedule.alpha_bar(t))
    direction = math.sqrt(max(1.0 - alpha_bar_prev - sigma**2, 0.0))
    x_prev = math.sqrt(alpha_bar_prev) * x0.data + direction * eps
    if eta > 0 and injected_noise is not None:
        if injected_noise.shape != x_t.shape:
            raise InvalidShapeError(f"noise shape {injected_noise.shape} does not match latent shape {x_t.shape}")
        x_prev = x_prev + sigma * injected_noise.data
    return x_t.replace(x_prev, timestep_index=t - 1)


def step_noise(seed: int, t: int, shape: tuple[int, ...]) -> npt.NDArray[np.float32]:
    """(seed, t) から決まる標準正規ノイズ"""
    key = np.array([seed, t], dtype=np.uint64)
    generator = np.random.Generator(np.random.Philox(key=key))
    return generator.standard_normal(shape, dtype=np.float32)


def invert(
    x_0: LatentGrid,
    schedule: DiffusionSchedule,
    denoiser: DenoiserPort,
    prompt: str,
    seed: int,
    eta: float = 1.0,
) -> InversionRecord:
    """edit-friendly DDPM 反転

    各ステップで独立に x_t ~ √ᾱ_t·x_0 + √(1−ᾱ_t)·η_t を作り、デノイザーの予測の下で
    x_t を x_{t−1} に写すノイズ z_t を解く。z_t を解いた直後に sampling_step で
    次の x_{t−1} を作り直すため、再生はこの連鎖とビット単位で一致する。

    Raises:
        InversionDegenerateError: あるステップで σ_t = 0
    """
    num_steps = schedule.num_steps
    shape = x_0.shape
    auxiliary: list[LatentGrid] = [x_0]
    for t in range(1, num_steps + 1):
        alpha_bar = schedule.alpha_bar(t)
        noisy = math.sqrt(alpha_bar) * x_0.data + math.sqrt(1.0 - alpha_bar) * step_noise(seed, t, shape)
        auxiliary.append(x_0.replace(noisy, timestep_index=t))

    zeros = x_0.replace(np.zeros(shape, dtype=np.float32))
    current = auxiliary[num_steps]
    noise_maps: list[LatentGrid] = [zeros] * num_steps
    for t in range(num_steps, 0, -1):
        sigma = step_sigma(t, schedule, eta)
        if sigma == 0.0:
            raise InversionDegenerateError(f"sigma is zero at step {t} (eta={eta}); noise maps cannot be solved")
        epsilon = denoiser.predict(current, t, prompt).prediction
        mean = sampling_step(current, epsilon, t, schedule, zeros, eta)
        noise = x_0.replace((auxiliary[t - 1].data - mean.data) / sigma, timestep_index=t)
        noise_maps[t - 1] = noise
        current = sampling_step(current, epsilon, t, schedule, noise, eta)

    logger.debug("Inverted latent %s over %d steps (seed=%d)", shape, num_steps, seed)
    return InversionRecord(
        terminal_latent=auxiliary[num_steps],
        noise_maps=tuple(noise_maps),
        prompt=prompt,
        seed=seed,
        eta=eta,
        schedule_fingerprint=schedule.fingerprint(),
    )


def replay(
    record: InversionRecord,
    schedule: DiffusionSchedule,
    denoiser: DenoiserPort,
    plan_for_step: PlanFactory | None = None,
) -> LatentGrid:
    """記録済みノイズでサンプリングを再生する

    plan_for_step を渡さなければアテンションは無改変で、元の潜在が再構成される。
    """
    if record.num_steps != schedule.num_steps:
        raise ConfigError(f"record has {record.num_steps} steps but schedule has {schedule.num_steps}")
    if record.schedule_fingerprint and record.schedule_fingerprint != schedule.fingerprint():
        raise ConfigError("inversion record was produced with a different schedule")
    current = record.terminal_latent
    for t in range(schedule.num_steps, 0, -1):
        plan = plan_for_step(t) if plan_for_step is not None else None
        epsilon = denoiser.predict(current, t, record.prompt, plan).prediction
        current = sampling_step(current, epsilon, t, schedule, record.noise_map(t), record.eta)
    return current
