"""環境設定モジュール

データ・キャッシュ・ログの置き場所と、バックボーンの既定値を管理する。
"""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """アプリケーション全体の設定

    環境変数 (接頭辞 XATTN_) や .env ファイルから値を読み込む
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="XATTN_",
        extra="ignore",
    )

    data_dir: Path | None = None  # 例: XATTN_DATA_DIR=/path/to/data
    cache_dir: Path | None = None  # 例: XATTN_CACHE_DIR=/path/to/cache

    # ログ設定
    log_level: str = "INFO"
    log_file: Path | None = None
    log_to_console: bool = True

    # バックボーン
    default_backbone: str = Field(default="toy", description="transfer 系コマンドの既定バックボーン (toy / sd)")
    toy_seed: int = Field(default=0, ge=0, description="トイデノイザーの重みを生成するシード")
    sd_model_id: str = Field(
        default="runwayml/stable-diffusion-v1-5",
        description="sd バックボーンで読み込む diffusers のモデル ID",
    )
    sd_device: str = Field(default="cuda", description="sd バックボーンを載せるデバイス")
    sd_enable_freeu: bool = Field(default=False, description="sd バックボーンで FreeU を有効にするか")

    # 評価
    evaluate_workers: int = Field(
        default=1,
        ge=-1,
        description="evaluate コマンドの既定並列数 (0 / -1 は CPU コア数)",
    )

    @property
    def effective_data_dir(self) -> Path:
        """データディレクトリ (未指定ならカレントの data/)"""
        path = self.data_dir or Path.cwd() / "data"
        path.mkdir(parents=True, exist_ok=True)
        return path

    @property
    def effective_cache_dir(self) -> Path:
        """反転記録のキャッシュディレクトリ (data/inversions)"""
        path = self.cache_dir or self.effective_data_dir / "inversions"
        path.mkdir(parents=True, exist_ok=True)
        return path

    @property
    def effective_log_file(self) -> Path:
        return self.log_file or self.effective_data_dir / "xattn.log"


# シングルトンとしてインスタンスを作成
settings = Settings()
