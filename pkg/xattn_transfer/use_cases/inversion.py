"""反転と再構成のユースケース"""

import hashlib
import logging

import numpy as np
import numpy.typing as npt

from xattn_transfer.core.diffusion_schedule import invert, make_schedule, replay
from xattn_transfer.domain.entities.latent import LatentGrid
from xattn_transfer.domain.entities.schedule import DiffusionSchedule, InversionRecord
from xattn_transfer.domain.entities.transfer import TransferConfig
from xattn_transfer.domain.ports.denoiser import DenoiserPort, LatentCodecPort
from xattn_transfer.domain.ports.inversion_cache import InversionCachePort

logger = logging.getLogger(__name__)


def build_schedule(config: TransferConfig) -> DiffusionSchedule:
    """TransferConfig からスケジュールを構築する"""
    return make_schedule(
        config.num_steps,
        config.beta_start,
        config.beta_end,
        config.beta_schedule,
        config.training_steps,
    )


def inversion_cache_key(
    latent: LatentGrid,
    schedule: DiffusionSchedule,
    denoiser_fingerprint: str,
    prompt: str,
    seed: int,
    eta: float,
) -> str:
    """反転結果を一意に決める入力のハッシュ"""
    sha = hashlib.sha256()
    sha.update(np.ascontiguousarray(latent.data).tobytes())
    sha.update(repr(latent.shape).encode())
    for part in (schedule.fingerprint(), denoiser_fingerprint, prompt, str(seed), repr(eta)):
        sha.update(b"\x00" + part.encode("utf-8"))
    return sha.hexdigest()


class InversionService:
    """edit-friendly DDPM 反転をキャッシュ付きで実行する"""

    def __init__(
        self,
        denoiser: DenoiserPort,
        schedule: DiffusionSchedule,
        cache: InversionCachePort | None = None,
    ) -> None:
        self._denoiser = denoiser
        self._schedule = schedule
        self._cache = cache

    @property
    def schedule(self) -> DiffusionSchedule:
        return self._schedule

    def invert(self, latent: LatentGrid, prompt: str, seed: int, eta: float = 1.0) -> InversionRecord:
        key = inversion_cache_key(latent, self._schedule, self._denoiser.fingerprint, prompt, seed, eta)
        if self._cache is not None:
            cached = self._cache.load(key)
            if cached is not None:
                logger.info("Inversion cache hit: %s", key[:12])
                return cached
        logger.info("Inverting latent %s over %d steps (seed=%d)", latent.shape, self._schedule.num_steps, seed)
        record = invert(latent, self._schedule, self._denoiser, prompt, seed, eta)
        if self._cache is not None:
            self._cache.store(key, record)
        return record

    def replay(self, record: InversionRecord) -> LatentGrid:
        return replay(record, self._schedule, self._denoiser)

    def reconstruct(self, latent: LatentGrid, prompt: str, seed: int, eta: float = 1.0) -> LatentGrid:
        """反転してからアテンションを改変せずに再生する"""
        return self.replay(self.invert(latent, prompt, seed, eta))


def reconstruct_latent(
    latent: LatentGrid,
    config: TransferConfig,
    denoiser: DenoiserPort,
    cache: InversionCachePort | None = None,
) -> LatentGrid:
    service = InversionService(denoiser, build_schedule(config), cache)
    return service.reconstruct(latent, config.prompt, config.seed, config.eta)


def reconstruct(
    image: npt.NDArray[np.uint8],
    config: TransferConfig,
    denoiser: DenoiserPort,
    codec: LatentCodecPort,
    cache: InversionCachePort | None = None,
) -> npt.NDArray[np.uint8]:
    """画像をエンコード → 反転 → 再生 → デコードする"""
    return codec.decode(reconstruct_latent(codec.encode(image), config, denoiser, cache))
