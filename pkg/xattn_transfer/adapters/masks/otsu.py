"""numpy による大津の閾値"""

import numpy as np
import numpy.typing as npt


def threshold_otsu(values: npt.ArrayLike, nbins: int = 256) -> float:
    """クラス間分散を最大にする閾値を返す。これより大きい値が前景

    全要素が同じ値ならその値を返す。
    """
    array = np.asarray(values, dtype=np.float64).ravel()
    if array.size == 0:
        raise ValueError("cannot threshold an empty array")
    if np.all(array == array[0]):
        return float(array[0])

    counts, edges = np.histogram(array, bins=nbins)
    centers = (edges[:-1] + edges[1:]) / 2.0
    counts = counts.astype(np.float64)

    weight1 = np.cumsum(counts)
    weight2 = np.cumsum(counts[::-1])[::-1]
    mean1 = np.cumsum(counts * centers) / np.maximum(weight1, 1e-12)
    mean2 = (np.cumsum((counts * centers)[::-1]) / np.maximum(weight2[::-1], 1e-12))[::-1]

    # weight1/mean1 の末尾は空の weight2/mean2 と対になるので揃える
    variance = weight1[:-1] * weight2[1:] * (mean1[:-1] - mean2[1:]) ** 2
    return float(centers[:-1][np.argmax(variance)])
