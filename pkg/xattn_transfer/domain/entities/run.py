"""実行マニフェストとテンソルコンテナのヘッダー"""

from enum import StrEnum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field


class RunStatus(StrEnum):
    """コマンドの終了状態"""

    SUCCEEDED = "succeeded"
    FAILED = "failed"


class RunManifest(BaseModel):
    """1 回の CLI 実行を再現するための記録

    同一入力で実行すればバイト単位で同じ JSON になるよう、経過時間は含めない
    (timings.json に別途書き出す)。
    """

    model_config = ConfigDict(extra="forbid")

    command: str
    status: RunStatus = RunStatus.SUCCEEDED
    backbone: str
    seed: int
    config: dict[str, Any]
    input_hashes: dict[str, str] = Field(default_factory=dict[str, str])
    artifacts: dict[str, str] = Field(default_factory=dict[str, str])
    warnings: list[str] = Field(default_factory=list[str])
    error: str | None = None
    stage: str = ""


class TensorEntry(BaseModel):
    """コンテナ内の 1 テンソル"""

    model_config = ConfigDict(extra="forbid")

    name: str
    shape: list[int]
    dtype: str = "float32"
    offset: int = Field(ge=0)
    nbytes: int = Field(ge=0)


class ContainerHeader(BaseModel):
    """`.xt` コンテナの JSON ヘッダー"""

    model_config = ConfigDict(extra="forbid")

    kind: str
    tensors: list[TensorEntry]
    meta: dict[str, Any] = Field(default_factory=dict[str, Any])
