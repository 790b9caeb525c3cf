"""AdaIN マスク供給とステップ購読の契約定義"""

from typing import Protocol

from xattn_transfer.domain.entities.transfer import MaskPair, MaskStrategy, StepObservation


class StepObserverPort(Protocol):
    """転写ループの各ステップで捕捉結果を受け取る"""

    def observe(self, observation: StepObservation) -> None: ...


class MaskProviderPort(StepObserverPort, Protocol):
    """出力ブランチと外観ブランチのマスクを返す

    masks() が None を返したステップはマスクなしの AdaIN になる。
    返すマスクは spatial_shape と一致していなければならない。
    """

    @property
    def strategy(self) -> MaskStrategy: ...

    def masks(self, spatial_shape: tuple[int, int]) -> MaskPair | None: ...
