"""TransferConfig の key = value テキスト形式"""

from pathlib import Path

from pydantic import ValidationError

from xattn_transfer.domain.entities.transfer import TransferConfig
from xattn_transfer.domain.errors import ConfigError


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """`key = value` 行を辞書にする (`#` 以降はコメント)"""
    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected 'key = value' (got {raw.strip()!r})")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{number}: empty key")
        if key in values:
            raise ConfigError(f"{source}:{number}: duplicate key {key!r}")
        values[key] = value
    return values


def build_config(values: dict[str, object]) -> TransferConfig:
    """値の辞書を型付きの TransferConfig に変換する

    Raises:
        ConfigError: 未知のキーや不正な値
    """
    try:
        return TransferConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"invalid transfer config: {e}") from e


def load_config(path: Path | None, overrides: dict[str, object] | None = None) -> TransferConfig:
    """設定ファイルを読み、overrides で上書きして TransferConfig を作る

    path が None ならデフォルト値に overrides だけを適用する。
    """
    values: dict[str, object] = {}
    if path is not None:
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        values.update(parse_config_text(path.read_text(encoding="utf-8"), str(path)))
    values.update(overrides or {})
    return build_config(values)


def render_config(config: TransferConfig) -> str:
    """全キーを書き出した設定テキスト"""
    return "".join(f"{key} = {value}\n" for key, value in config.to_key_values())
