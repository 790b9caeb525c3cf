"""PNG 画像とマスクファイルの入出力 (Pillow)"""

import hashlib
from pathlib import Path

import numpy as np
import numpy.typing as npt
from PIL import Image

from xattn_transfer.adapters.gateways.tensor_store import load_mask
from xattn_transfer.domain.entities.latent import MaskGrid
from xattn_transfer.domain.errors import ConfigError

MASK_THRESHOLD = 128
TENSOR_SUFFIX = ".xt"


def read_rgb(path: Path) -> npt.NDArray[np.uint8]:
    """画像を 8 ビット RGB (H×W×3) として読む

    Raises:
        FileNotFoundError: ファイルが無い
        ConfigError: 画像として読めない (壊れた・途中で切れたファイルを含む)
    """
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as image:
            return np.asarray(image.convert("RGB"), dtype=np.uint8).copy()
    except (OSError, SyntaxError) as e:
        raise ConfigError(f"{path}: not a readable image ({e})") from e


def write_rgb(path: Path, image: npt.NDArray[np.uint8]) -> None:
    """8 ビット RGB PNG として書く"""
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8)).save(path, format="PNG")


def read_mask_image(path: Path, shape: tuple[int, int] | None = None) -> MaskGrid:
    """単チャネル 8 ビット画像を 128 で二値化する (shape 指定時は最近傍で縮尺)"""
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as image:
            gray = image.convert("L")
            if shape is not None and gray.size != (shape[1], shape[0]):
                gray = gray.resize((shape[1], shape[0]), Image.Resampling.NEAREST)
            return MaskGrid(np.asarray(gray) >= MASK_THRESHOLD)
    except (OSError, SyntaxError) as e:
        raise ConfigError(f"{path}: not a readable mask image ({e})") from e


def write_mask_image(path: Path, mask: MaskGrid) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask.data.astype(np.uint8) * 255).save(path, format="PNG")


def load_mask_file(path: Path, shape: tuple[int, int] | None = None) -> MaskGrid:
    """画像または .xt のマスクを読み、必要なら shape に合わせる"""
    if path.suffix != TENSOR_SUFFIX:
        return read_mask_image(path, shape)
    mask = load_mask(path)
    if shape is None or mask.shape == shape:
        return mask
    rows = np.arange(shape[0]) * mask.shape[0] // shape[0]
    cols = np.arange(shape[1]) * mask.shape[1] // shape[1]
    return MaskGrid(mask.data[np.ix_(rows, cols)])


def file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()
