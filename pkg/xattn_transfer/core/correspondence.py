"""画像間アテンションマップからの意味的対応抽出と可視化"""

from collections.abc import Mapping

import numpy as np
import numpy.typing as npt

from xattn_transfer.domain.entities.analysis import Aggregation, CorrespondenceMap
from xattn_transfer.domain.errors import ConfigError, InvalidShapeError

LOW_CONFIDENCE_GRAY = 128


def aggregate_maps(
    maps: Mapping[str, npt.ArrayLike],
    aggregation: Aggregation = Aggregation.MEAN,
    layer: str | None = None,
) -> npt.NDArray[np.float32]:
    """レイヤーごとのマップ [N_q, N_k] を 1 枚にまとめる"""
    if not maps:
        raise ConfigError("no attention maps were captured")
    if aggregation is Aggregation.SINGLE_LAYER:
        if layer is None:
            if len(maps) != 1:
                raise ConfigError(f"single-layer aggregation needs a layer name (captured: {sorted(maps)})")
            layer = next(iter(maps))
        if layer not in maps:
            raise ConfigError(f"layer {layer!r} was not captured (captured: {sorted(maps)})")
        return np.asarray(maps[layer], dtype=np.float32)

    stacked = [np.asarray(maps[name], dtype=np.float32) for name in sorted(maps)]
    shapes = {array.shape for array in stacked}
    if len(shapes) != 1:
        raise InvalidShapeError(f"maps must share one resolution to be averaged (got {sorted(shapes)})")
    return np.mean(stacked, axis=0, dtype=np.float32)


def extract_correspondences(
    maps: Mapping[str, npt.ArrayLike],
    query_shape: tuple[int, int],
    key_shape: tuple[int, int],
    aggregation: Aggregation = Aggregation.MEAN,
    layer: str | None = None,
    low_confidence_factor: float = 2.0,
) -> CorrespondenceMap:
    """各クエリ画素について集約マップの argmax を取る

    同点は平坦インデックスの小さいキーを選ぶ。勝者の重みが
    low_confidence_factor / num_keys 以下の画素は low_confidence とする。
    """
    aggregated = aggregate_maps(maps, aggregation, layer)
    num_queries = query_shape[0] * query_shape[1]
    num_keys = key_shape[0] * key_shape[1]
    if aggregated.shape != (num_queries, num_keys):
        raise InvalidShapeError(
            f"aggregated map has shape {aggregated.shape}, expected ({num_queries}, {num_keys}) "
            f"for query grid {query_shape} and key grid {key_shape}"
        )
    winners = np.argmax(aggregated, axis=-1)
    confidence = np.take_along_axis(aggregated, winners[:, None], axis=-1)[:, 0]
    rows, cols = np.divmod(winners.astype(np.int64), key_shape[1])
    return CorrespondenceMap(
        rows=rows.reshape(query_shape),
        cols=cols.reshape(query_shape),
        confidence=confidence.reshape(query_shape).astype(np.float32),
        low_confidence=(confidence <= low_confidence_factor / num_keys).reshape(query_shape),
        source_shape=key_shape,
    )


def position_colormap(height: int, width: int) -> npt.NDArray[np.uint8]:
    """位置で色が滑らかに変わる RGB カラーマップ"""
    ys, xs = np.meshgrid(np.linspace(0.0, 1.0, height), np.linspace(0.0, 1.0, width), indexing="ij")
    rgb = np.stack([xs, ys, 1.0 - (xs + ys) / 2.0], axis=-1)
    return np.round(rgb * 255.0).astype(np.uint8)


def render_correspondence(
    correspondence: CorrespondenceMap,
    appearance_colormap: npt.NDArray[np.uint8],
    gray_low_confidence: bool = False,
) -> npt.NDArray[np.uint8]:
    """構造画像の各画素を、対応する外観画素の色で塗る"""
    if appearance_colormap.shape[:2] != correspondence.source_shape:
        raise InvalidShapeError(
            f"colormap resolution {appearance_colormap.shape[:2]} does not match "
            f"appearance grid {correspondence.source_shape}"
        )
    rendered = appearance_colormap[correspondence.rows, correspondence.cols].copy()
    if gray_low_confidence:
        rendered[correspondence.low_confidence] = LOW_CONFIDENCE_GRAY
    return rendered
