"""`.xt` テンソルコンテナの読み書き

書式:
    bytes 0-3   マジック b"XATN"
    byte  4     バージョン (1)
    bytes 5-8   ヘッダー長 (little-endian uint32)
    ヘッダー    UTF-8 JSON (ContainerHeader)
    本体        little-endian float32 の生データ (ヘッダーの順)
"""

from collections.abc import Mapping
from pathlib import Path
import struct
from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import ValidationError

from xattn_transfer.domain.entities.analysis import CorrespondenceMap
from xattn_transfer.domain.entities.latent import LatentGrid, MaskGrid
from xattn_transfer.domain.entities.run import ContainerHeader, TensorEntry
from xattn_transfer.domain.entities.schedule import InversionRecord
from xattn_transfer.domain.errors import ConfigError

MAGIC = b"XATN"
VERSION = 1
_PREFIX = struct.Struct("<4sBI")
_DTYPE = np.dtype("<f4")

LATENT_KIND = "latent"
MASK_KIND = "mask"
INVERSION_KIND = "inversion_record"
CORRESPONDENCE_KIND = "correspondence"


def write_tensors(
    path: Path,
    kind: str,
    tensors: Mapping[str, npt.ArrayLike],
    meta: Mapping[str, Any] | None = None,
) -> None:
    """テンソル群をコンテナに書き出す"""
    blobs: list[bytes] = []
    entries: list[TensorEntry] = []
    offset = 0
    for name, tensor in tensors.items():
        array = np.ascontiguousarray(np.asarray(tensor, dtype=_DTYPE))
        blob = array.tobytes()
        entries.append(TensorEntry(name=name, shape=list(array.shape), offset=offset, nbytes=len(blob)))
        blobs.append(blob)
        offset += len(blob)
    header = ContainerHeader(kind=kind, tensors=entries, meta=dict(meta or {}))
    header_bytes = header.model_dump_json().encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(_PREFIX.pack(MAGIC, VERSION, len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)


def read_tensors(path: Path) -> tuple[str, dict[str, npt.NDArray[np.float32]], dict[str, Any]]:
    """コンテナを読み、(kind, テンソル辞書, meta) を返す

    Raises:
        FileNotFoundError: ファイルが無い
        ConfigError: 書式が壊れている
    """
    raw = path.read_bytes()
    if len(raw) < _PREFIX.size:
        raise ConfigError(f"{path}: file too short for a tensor container")
    magic, version, header_length = _PREFIX.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        raise ConfigError(f"{path}: not a version {VERSION} tensor container")
    body_start = _PREFIX.size + header_length
    try:
        header = ContainerHeader.model_validate_json(raw[_PREFIX.size : body_start])
    except ValidationError as e:
        raise ConfigError(f"{path}: invalid container header: {e}") from e

    tensors: dict[str, npt.NDArray[np.float32]] = {}
    for entry in header.tensors:
        start = body_start + entry.offset
        if start + entry.nbytes > len(raw):
            raise ConfigError(f"{path}: tensor {entry.name!r} is truncated")
        array = np.frombuffer(raw, dtype=_DTYPE, count=entry.nbytes // _DTYPE.itemsize, offset=start)
        tensors[entry.name] = array.reshape(entry.shape).astype(np.float32)
    return header.kind, tensors, header.meta


def save_latent(path: Path, latent: LatentGrid) -> None:
    write_tensors(path, LATENT_KIND, {"data": latent.data}, meta={"timestep_index": latent.timestep_index})


def load_latent(path: Path) -> LatentGrid:
    kind, tensors, meta = read_tensors(path)
    if kind != LATENT_KIND or "data" not in tensors:
        raise ConfigError(f"{path} holds {kind!r}, not a latent grid")
    return LatentGrid(tensors["data"], int(meta.get("timestep_index", 0)))


def save_mask(path: Path, mask: MaskGrid) -> None:
    write_tensors(path, MASK_KIND, {"data": mask.data.astype(np.float32)})


def load_mask(path: Path) -> MaskGrid:
    kind, tensors, _ = read_tensors(path)
    if kind != MASK_KIND or "data" not in tensors:
        raise ConfigError(f"{path} holds {kind!r}, not a mask grid")
    return MaskGrid(tensors["data"] >= 0.5)


def save_inversion_record(path: Path, record: InversionRecord) -> None:
    """反転記録を (T, 形状, seed, プロンプト) ヘッダー付きで保存する"""
    tensors: dict[str, npt.ArrayLike] = {"terminal": record.terminal_latent.data}
    for t in range(1, record.num_steps + 1):
        tensors[f"noise/{t:04d}"] = record.noise_map(t).data
    meta = {
        "num_steps": record.num_steps,
        "shape": list(record.terminal_latent.shape),
        "seed": record.seed,
        "prompt": record.prompt,
        "eta": record.eta,
        "schedule_fingerprint": record.schedule_fingerprint,
    }
    write_tensors(path, INVERSION_KIND, tensors, meta=meta)


def load_inversion_record(path: Path) -> InversionRecord:
    kind, tensors, meta = read_tensors(path)
    if kind != INVERSION_KIND:
        raise ConfigError(f"{path} holds {kind!r}, not an inversion record")
    try:
        num_steps = int(meta["num_steps"])
        noise_maps = tuple(LatentGrid(tensors[f"noise/{t:04d}"], t) for t in range(1, num_steps + 1))
        return InversionRecord(
            terminal_latent=LatentGrid(tensors["terminal"], num_steps),
            noise_maps=noise_maps,
            prompt=str(meta["prompt"]),
            seed=int(meta["seed"]),
            eta=float(meta["eta"]),
            schedule_fingerprint=str(meta.get("schedule_fingerprint", "")),
        )
    except KeyError as e:
        raise ConfigError(f"{path}: inversion record is missing {e}") from e


def save_correspondence(path: Path, correspondence: CorrespondenceMap) -> None:
    """対応インデックスを (rows, cols, confidence, low_confidence) として保存する"""
    write_tensors(
        path,
        CORRESPONDENCE_KIND,
        {
            "rows": correspondence.rows,
            "cols": correspondence.cols,
            "confidence": correspondence.confidence,
            "low_confidence": correspondence.low_confidence.astype(np.float32),
        },
        meta={"source_shape": list(correspondence.source_shape)},
    )


def load_correspondence(path: Path) -> CorrespondenceMap:
    kind, tensors, meta = read_tensors(path)
    if kind != CORRESPONDENCE_KIND:
        raise ConfigError(f"{path} holds {kind!r}, not a correspondence map")
    height, width = (int(side) for side in meta["source_shape"])
    return CorrespondenceMap(
        rows=tensors["rows"].astype(np.int64),
        cols=tensors["cols"].astype(np.int64),
        confidence=tensors["confidence"],
        low_confidence=tensors["low_confidence"] >= 0.5,
        source_shape=(height, width),
    )
