"""構造 IoU と Gram 距離によるペア単位の評価"""

from collections import defaultdict
from collections.abc import Callable, Sequence
from dataclasses import dataclass
import logging
from pathlib import Path

from joblib import Parallel, delayed
import numpy as np
import numpy.typing as npt

from xattn_transfer.core.metrics import gram_distance, structure_iou
from xattn_transfer.domain.entities.analysis import DomainSummary, EvaluationReport, EvaluationRow
from xattn_transfer.domain.entities.latent import MaskGrid
from xattn_transfer.domain.errors import XAttnError
from xattn_transfer.domain.ports.feature_extractor import FeatureExtractorPort

logger = logging.getLogger(__name__)

ImageLoader = Callable[[Path], npt.NDArray[np.uint8]]
MaskLoader = Callable[[Path], MaskGrid]


@dataclass(frozen=True, slots=True)
class EvaluationPair:
    """評価対象の 1 ペアと関連ファイル"""

    pair_id: str
    appearance: Path
    output: Path
    output_mask: Path
    structure_mask: Path
    domain: str = ""


def score_pair(
    pair: EvaluationPair,
    extractor: FeatureExtractorPort,
    load_image: ImageLoader,
    load_mask: MaskLoader,
) -> EvaluationRow:
    """1 ペアを採点する。欠けたファイルはその指標だけ None にする"""
    notes: list[str] = []
    iou: float | None = None
    if pair.output_mask.exists() and pair.structure_mask.exists():
        try:
            iou = structure_iou(load_mask(pair.output_mask), load_mask(pair.structure_mask))
        except XAttnError as e:
            notes.append(f"iou: {e}")
    else:
        notes.append("missing mask")

    distance: float | None = None
    if pair.output.exists() and pair.appearance.exists():
        try:
            features_app = extractor.extract(load_image(pair.appearance))
            features_out = extractor.extract(load_image(pair.output))
            distance = gram_distance(features_out, features_app, extractor.layer_weights)
        except XAttnError as e:
            notes.append(f"gram: {e}")
    else:
        notes.append("missing image")

    return EvaluationRow(
        pair_id=pair.pair_id,
        domain=pair.domain,
        structure_iou=iou,
        gram_distance=distance,
        note="; ".join(notes),
    )


def _mean(values: Sequence[float | None]) -> float | None:
    present = [value for value in values if value is not None]
    return float(np.mean(present)) if present else None


def summarize(rows: Sequence[EvaluationRow], extractor: FeatureExtractorPort) -> EvaluationReport:
    """ペアごとの結果からドメイン別平均と全体平均を作る"""
    by_domain: dict[str, list[EvaluationRow]] = defaultdict(list)
    for row in rows:
        by_domain[row.domain].append(row)
    domains = [
        DomainSummary(
            domain=domain,
            pair_count=len(members),
            mean_structure_iou=_mean([row.structure_iou for row in members]),
            mean_gram_distance=_mean([row.gram_distance for row in members]),
        )
        for domain, members in sorted(by_domain.items())
    ]
    return EvaluationReport(
        rows=list(rows),
        domains=domains,
        mean_structure_iou=_mean([row.structure_iou for row in rows]),
        mean_gram_distance=_mean([row.gram_distance for row in rows]),
        extractor=extractor.name,
        extractor_layers=list(extractor.layer_names),
    )


class EvaluationUseCase:
    """ペア集合をジョブ並列で採点する"""

    def __init__(
        self,
        extractor: FeatureExtractorPort,
        load_image: ImageLoader,
        load_mask: MaskLoader,
        *,
        n_jobs: int = 1,
    ) -> None:
        self._extractor = extractor
        self._load_image = load_image
        self._load_mask = load_mask
        self._n_jobs = n_jobs

    def evaluate(self, pairs: Sequence[EvaluationPair]) -> EvaluationReport:
        logger.info("Evaluating %d pair(s) with %s (n_jobs=%d)", len(pairs), self._extractor.name, self._n_jobs)
        rows: list[EvaluationRow] = Parallel(n_jobs=self._n_jobs)(
            delayed(score_pair)(pair, self._extractor, self._load_image, self._load_mask) for pair in pairs
        )
        skipped = sum(1 for row in rows if row.note)
        if skipped:
            logger.warning("%d pair(s) have missing metrics", skipped)
        return summarize(rows, self._extractor)
