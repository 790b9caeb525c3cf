"""アテンション計算 (自己アテンション・画像間アテンション・マップのコントラスト)

すべて入力だけに依存する純粋関数で、先頭にヘッドやバッチの次元を持つ配列
([..., N, D]) もそのまま受け付ける。softmax は float32 で計算する。
"""

import numpy as np
import numpy.typing as npt
from scipy.special import softmax

from xattn_transfer.domain.entities.attention import AttentionContext, AttentionMap
from xattn_transfer.domain.errors import ConfigError, InvalidShapeError

Array = npt.NDArray[np.floating]


def split_heads(x: npt.ArrayLike, head_count: int) -> npt.NDArray[np.float32]:
    """[N, D] を [H, N, D/H] に分割する"""
    array = np.asarray(x, dtype=np.float32)
    if array.ndim != 2:
        raise InvalidShapeError(f"expected a [tokens, dim] matrix (got shape {array.shape})")
    tokens, dim = array.shape
    if head_count < 1 or dim % head_count:
        raise InvalidShapeError(f"dimension {dim} is not divisible by head_count={head_count}")
    return array.reshape(tokens, head_count, dim // head_count).transpose(1, 0, 2)


def merge_heads(x: npt.ArrayLike) -> npt.NDArray[np.float32]:
    """[H, N, d] を [N, H·d] に戻す"""
    array = np.asarray(x, dtype=np.float32)
    if array.ndim != 3:
        raise InvalidShapeError(f"expected [heads, tokens, dim] (got shape {array.shape})")
    heads, tokens, dim = array.shape
    return np.ascontiguousarray(array.transpose(1, 0, 2).reshape(tokens, heads * dim))


def compute_attention_map(queries: npt.ArrayLike, keys: npt.ArrayLike, scale: float) -> AttentionMap:
    """softmax(Q·Kᵀ·scale) を行ごとに計算する

    Raises:
        InvalidShapeError: Q と K の内側の次元が一致しない
        ConfigError: scale が正でない
    """
    q = np.asarray(queries, dtype=np.float32)
    k = np.asarray(keys, dtype=np.float32)
    if q.ndim < 2 or k.ndim < 2 or q.shape[-1] != k.shape[-1]:
        raise InvalidShapeError(f"queries {q.shape} and keys {k.shape} do not share an inner dimension")
    if scale <= 0:
        raise ConfigError(f"scale must be positive (got {scale})")
    logits = np.matmul(q, np.swapaxes(k, -1, -2)) * np.float32(scale)
    return AttentionMap(softmax(logits, axis=-1).astype(np.float32, copy=False))


def apply_attention(attention_map: AttentionMap, values: npt.ArrayLike) -> Array:
    """map·V を返す"""
    v = np.asarray(values)
    if v.ndim < 2 or attention_map.num_keys != v.shape[-2]:
        raise InvalidShapeError(f"map has {attention_map.num_keys} keys but values have shape {v.shape}")
    return np.matmul(attention_map.weights, v)


def contrast_map(attention_map: AttentionMap, beta: float) -> AttentionMap:
    """各行を (A − μ)·β + μ に変換する (μ は行平均)

    再正規化やクリップはしないので負の重みが現れ得る。入力の精度のまま計算する。
    """
    if beta < 0:
        raise ConfigError(f"contrast factor must be >= 0 (got {beta})")
    if beta == 1.0:
        return attention_map
    weights = attention_map.weights
    mean = weights.mean(axis=-1, keepdims=True)
    return AttentionMap((weights - mean) * beta + mean)


def attend(
    queries: npt.ArrayLike,
    keys: npt.ArrayLike,
    values: npt.ArrayLike,
    scale: float,
    contrast_factor: float = 1.0,
) -> tuple[Array, AttentionMap]:
    """マップ計算 → コントラスト → 値との積を行い、出力とコントラスト前のマップを返す"""
    k = np.asarray(keys, dtype=np.float32)
    v = np.asarray(values, dtype=np.float32)
    if k.shape[:-1] != v.shape[:-1]:
        raise InvalidShapeError(f"keys {k.shape} and values {v.shape} disagree on the number of keys")
    attention_map = compute_attention_map(queries, k, scale)
    weighted = contrast_map(attention_map, contrast_factor)
    return apply_attention(weighted, v), attention_map


def cross_image_attention(
    q_out: npt.ArrayLike,
    k_src: npt.ArrayLike,
    v_src: npt.ArrayLike,
    scale: float,
    contrast_factor: float = 1.0,
) -> Array:
    """出力ブランチのクエリで別ブランチの K/V を参照する画像間アテンション

    contrast_factor = 1 では compute_attention_map → apply_attention と同一の計算になる。
    """
    output, _ = attend(q_out, k_src, v_src, scale, contrast_factor)
    return output


def self_attention(context: AttentionContext, contrast_factor: float = 1.0) -> npt.NDArray[np.float32]:
    """AttentionContext をヘッドに分割して計算し、結合した [num_queries × d_v] を返す"""
    heads = context.head_count
    output, _ = attend(
        split_heads(context.queries, heads),
        split_heads(context.keys, heads),
        split_heads(context.values, heads),
        context.effective_scale,
        contrast_factor,
    )
    return merge_heads(output)
