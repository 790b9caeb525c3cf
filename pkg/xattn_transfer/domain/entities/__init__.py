from xattn_transfer.domain.entities.analysis import (
    Aggregation,
    CorrespondenceMap,
    DomainSummary,
    EvaluationReport,
    EvaluationRow,
    GramMatrix,
)
from xattn_transfer.domain.entities.attention import AttentionContext, AttentionMap, AttentionMode
from xattn_transfer.domain.entities.latent import LatentGrid, MaskGrid, NoisePrediction
from xattn_transfer.domain.entities.plan import (
    AttentionPlan,
    DenoiserOutput,
    LayerCapture,
    LayerDirective,
    LayerInfo,
    LayerLocation,
)
from xattn_transfer.domain.entities.run import ContainerHeader, RunManifest, RunStatus, TensorEntry
from xattn_transfer.domain.entities.schedule import BetaSpacing, DiffusionSchedule, InversionRecord
from xattn_transfer.domain.entities.transfer import (
    BranchState,
    MaskPair,
    MaskStrategy,
    StepObservation,
    StepRecord,
    TransferConfig,
    TransferResult,
)

__all__ = [
    "Aggregation",
    "AttentionContext",
    "AttentionMap",
    "AttentionMode",
    "AttentionPlan",
    "BetaSpacing",
    "BranchState",
    "ContainerHeader",
    "CorrespondenceMap",
    "DenoiserOutput",
    "DiffusionSchedule",
    "DomainSummary",
    "EvaluationReport",
    "EvaluationRow",
    "GramMatrix",
    "InversionRecord",
    "LatentGrid",
    "LayerCapture",
    "LayerDirective",
    "LayerInfo",
    "LayerLocation",
    "MaskGrid",
    "MaskPair",
    "MaskStrategy",
    "NoisePrediction",
    "RunManifest",
    "RunStatus",
    "StepObservation",
    "StepRecord",
    "TensorEntry",
    "TransferConfig",
    "TransferResult",
]
