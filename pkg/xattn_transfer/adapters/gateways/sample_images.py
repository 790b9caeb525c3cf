"""スモークテスト用の決定的なサンプル画像ペア

構造画像は左寄りの円、外観画像は右寄りで色と模様の違う円。円の外は背景。
"""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from xattn_transfer.domain.entities.latent import MaskGrid


@dataclass(frozen=True, slots=True)
class SamplePair:
    structure: npt.NDArray[np.uint8]
    appearance: npt.NDArray[np.uint8]
    structure_mask: MaskGrid
    appearance_mask: MaskGrid


def _disk(size: int, center: tuple[float, float], radius: float) -> npt.NDArray[np.bool_]:
    ys, xs = np.mgrid[0:size, 0:size]
    return (ys - center[0]) ** 2 + (xs - center[1]) ** 2 <= radius**2


def _to_uint8(image: npt.NDArray[np.float64]) -> npt.NDArray[np.uint8]:
    return np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)


def synthesize_pair(size: int = 64, seed: int = 0) -> SamplePair:
    """seed と size だけで決まるサンプルペアを作る"""
    rng = np.random.Generator(np.random.Philox(seed))
    ys, xs = np.mgrid[0:size, 0:size] / max(size - 1, 1)

    structure_mask = _disk(size, (size * 0.5, size * 0.4), size * 0.28)
    structure = np.empty((size, size, 3), dtype=np.float64)
    structure[...] = np.stack([0.2 + 0.3 * ys, 0.3 + 0.2 * xs, np.full_like(xs, 0.6)], axis=-1)
    structure[structure_mask] = [0.85, 0.55, 0.2]

    appearance_mask = _disk(size, (size * 0.45, size * 0.62), size * 0.25)
    stripes = 0.5 + 0.5 * np.sin(xs * 8 * np.pi + ys * 4 * np.pi)
    appearance = np.empty((size, size, 3), dtype=np.float64)
    appearance[...] = np.stack([np.full_like(xs, 0.15), 0.5 + 0.3 * ys, 0.3 + 0.2 * xs], axis=-1)
    texture = np.stack([0.3 + 0.5 * stripes, 0.2 + 0.2 * stripes, 0.8 - 0.3 * stripes], axis=-1)
    appearance[appearance_mask] = texture[appearance_mask]

    noise = rng.normal(0.0, 0.02, size=(2, size, size, 3))
    return SamplePair(
        structure=_to_uint8(structure + noise[0]),
        appearance=_to_uint8(appearance + noise[1]),
        structure_mask=MaskGrid(structure_mask),
        appearance_mask=MaskGrid(appearance_mask),
    )
