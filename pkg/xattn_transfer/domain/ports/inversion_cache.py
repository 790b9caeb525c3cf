"""反転記録キャッシュの契約定義"""

from typing import Protocol

from xattn_transfer.domain.entities.schedule import InversionRecord


class InversionCachePort(Protocol):
    """キーに対応する InversionRecord を保存・取得する"""

    def load(self, key: str) -> InversionRecord | None: ...

    def store(self, key: str, record: InversionRecord) -> None: ...
