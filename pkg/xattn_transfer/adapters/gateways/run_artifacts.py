"""実行ディレクトリへの成果物の書き出し"""

from collections.abc import Mapping, Sequence
import json
import logging
from pathlib import Path

import numpy as np
import numpy.typing as npt

from xattn_transfer.adapters.gateways.config_file import render_config
from xattn_transfer.adapters.gateways.image_io import file_sha256, write_rgb
from xattn_transfer.adapters.gateways.tensor_store import save_latent, write_tensors
from xattn_transfer.domain.entities.latent import LatentGrid
from xattn_transfer.domain.entities.run import RunManifest
from xattn_transfer.domain.entities.transfer import StepRecord, TransferConfig, TransferResult

logger = logging.getLogger(__name__)

ATTENTION_KIND = "attention_maps"


def format_step(record: StepRecord) -> str:
    """steps.txt の 1 行"""
    directives = ",".join(f"{layer_id}={mode}" for layer_id, mode in sorted(record.directives.items())) or "-"
    return (
        f"step={record.step_index:03d} t={record.timestep:03d} directives={directives} "
        f"guidance={int(record.guidance_applied)} adain={int(record.adain_applied)} masked={int(record.masked)}"
    )


def hash_inputs(paths: Mapping[str, Path]) -> dict[str, str]:
    """入力ファイルの sha256"""
    return {name: file_sha256(path) for name, path in sorted(paths.items())}


class RunArtifactWriter:
    """1 回の実行の成果物を run_dir に書き、相対パスを記録する"""

    def __init__(self, run_dir: Path) -> None:
        self.run_dir = run_dir
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._artifacts: dict[str, str] = {}

    @property
    def artifacts(self) -> dict[str, str]:
        return dict(sorted(self._artifacts.items()))

    def _path(self, name: str, filename: str) -> Path:
        self.register(name, filename)
        return self.run_dir / filename

    def register(self, name: str, filename: str) -> None:
        """他のゲートウェイが書いたファイルを成果物として登録する"""
        self._artifacts[name] = filename

    def write_image(self, image: npt.NDArray[np.uint8], name: str = "output", filename: str = "output.png") -> Path:
        path = self._path(name, filename)
        write_rgb(path, image)
        return path

    def write_latent(self, latent: LatentGrid, name: str = "output_latent", filename: str = "output_latent.xt") -> Path:
        path = self._path(name, filename)
        save_latent(path, latent)
        return path

    def write_config(self, config: TransferConfig) -> Path:
        path = self._path("config", "config.txt")
        path.write_text(render_config(config), encoding="utf-8")
        return path

    def write_steps(self, records: Sequence[StepRecord]) -> Path:
        path = self._path("steps", "steps.txt")
        path.write_text("".join(format_step(record) + "\n" for record in records), encoding="utf-8")
        return path

    def write_drift(self, result: TransferResult, tolerance: float) -> Path:
        """両ブランチのドリフトと、許容値超過の警告行"""
        path = self._path("drift", "drift.log")
        lines = [
            f"appearance_drift = {result.appearance_drift:.6e}",
            f"structure_drift = {result.structure_drift:.6e}",
            f"tolerance = {tolerance:.6e}",
        ]
        lines.extend(f"WARNING {warning}" for warning in result.warnings)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def write_attention(self, maps: Mapping[str, npt.ArrayLike]) -> Path | None:
        if not maps:
            logger.info("No attention maps were captured; skipping attention.xt")
            return None
        path = self._path("attention", "attention.xt")
        write_tensors(path, ATTENTION_KIND, dict(sorted(maps.items())))
        return path

    def write_text(self, name: str, filename: str, text: str) -> Path:
        path = self._path(name, filename)
        path.write_text(text, encoding="utf-8")
        return path

    def write_manifest(self, manifest: RunManifest) -> Path:
        path = self.run_dir / "manifest.json"
        path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path

    def write_timings(self, timings: Mapping[str, float]) -> Path:
        path = self.run_dir / "timings.json"
        path.write_text(json.dumps({key: round(value, 6) for key, value in timings.items()}, indent=2) + "\n")
        return path
