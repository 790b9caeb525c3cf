"""反転記録のキャッシュ (ディレクトリ / メモリ)"""

import logging
from pathlib import Path

from xattn_transfer.adapters.gateways.tensor_store import load_inversion_record, save_inversion_record
from xattn_transfer.domain.entities.schedule import InversionRecord
from xattn_transfer.domain.errors import ConfigError

logger = logging.getLogger(__name__)


class DirectoryInversionCache:
    """`{cache_dir}/{key}.xt` に反転記録を保存する"""

    def __init__(self, cache_dir: Path) -> None:
        self._cache_dir = cache_dir

    def _path(self, key: str) -> Path:
        return self._cache_dir / f"{key}.xt"

    def load(self, key: str) -> InversionRecord | None:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            return load_inversion_record(path)
        except ConfigError as e:
            logger.warning("Ignoring unreadable cache entry %s: %s", path, e)
            return None

    def store(self, key: str, record: InversionRecord) -> None:
        self._cache_dir.mkdir(parents=True, exist_ok=True)
        save_inversion_record(self._path(key), record)
        logger.debug("Stored inversion record %s", self._path(key))


class MemoryInversionCache:
    """プロセス内だけのキャッシュ"""

    def __init__(self) -> None:
        self._records: dict[str, InversionRecord] = {}

    def load(self, key: str) -> InversionRecord | None:
        return self._records.get(key)

    def store(self, key: str, record: InversionRecord) -> None:
        self._records[key] = record
