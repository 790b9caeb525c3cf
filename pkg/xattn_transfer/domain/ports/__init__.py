from xattn_transfer.domain.ports.denoiser import DenoiserPort, LatentCodecPort
from xattn_transfer.domain.ports.feature_extractor import FeatureExtractorPort
from xattn_transfer.domain.ports.inversion_cache import InversionCachePort
from xattn_transfer.domain.ports.mask_provider import MaskProviderPort, StepObserverPort

__all__ = [
    "DenoiserPort",
    "FeatureExtractorPort",
    "InversionCachePort",
    "LatentCodecPort",
    "MaskProviderPort",
    "StepObserverPort",
]
