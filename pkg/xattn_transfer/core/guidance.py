"""外観ガイダンス: 自己アテンション予測と画像間アテンション予測の外挿"""

from xattn_transfer.domain.entities.attention import AttentionMode
from xattn_transfer.domain.entities.latent import NoisePrediction
from xattn_transfer.domain.errors import InvalidShapeError, PlanError


def combine(eps_self: NoisePrediction, eps_cross: NoisePrediction, alpha: float) -> NoisePrediction:
    """ε = ε^self + α·(ε^× − ε^self)

    α = 0 なら ε^self、α = 1 なら ε^× をそのまま返す。

    Raises:
        InvalidShapeError: 2 つの予測の形状が異なる
        PlanError: ε^self が自己アテンション、ε^× が外観モードの予測でない
    """
    if eps_self.shape != eps_cross.shape:
        raise InvalidShapeError(f"prediction shapes differ: {eps_self.shape} != {eps_cross.shape}")
    if eps_self.source_mode is not AttentionMode.SELF_ATTENTION:
        raise PlanError(f"eps_self must come from self-attention (got {eps_self.source_mode})")
    if eps_cross.source_mode is not AttentionMode.CROSS_IMAGE_APPEARANCE:
        raise PlanError(f"eps_cross must come from cross-image appearance attention (got {eps_cross.source_mode})")

    if alpha == 0.0:
        return eps_self
    if alpha == 1.0:
        return eps_cross
    guided = eps_self.epsilon + alpha * (eps_cross.epsilon - eps_self.epsilon)
    return NoisePrediction(guided, AttentionMode.CROSS_IMAGE_APPEARANCE)
