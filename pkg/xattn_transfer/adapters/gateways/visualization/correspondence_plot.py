"""意味的対応の可視化

構造画像・外観画像・転写結果・外観側カラーマップ・対応の塗り分けを横並びにした PNG を作る。
"""

# pyright: reportUnknownMemberType=false
# matplotlibの型情報が不完全なため、このファイルでは一部の型チェックを緩和

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import numpy.typing as npt  # noqa: E402

from xattn_transfer.core.correspondence import position_colormap, render_correspondence  # noqa: E402
from xattn_transfer.domain.entities.analysis import CorrespondenceMap  # noqa: E402


def save_correspondence_figure(
    correspondence: CorrespondenceMap,
    output_path: Path,
    *,
    structure: npt.NDArray[np.uint8] | None = None,
    appearance: npt.NDArray[np.uint8] | None = None,
    transferred: npt.NDArray[np.uint8] | None = None,
    gray_low_confidence: bool = True,
    title: str = "Cross-image correspondence",
) -> npt.NDArray[np.uint8]:
    """対応図を保存し、塗り分け画像 (H×W×3) を返す

    Args:
        correspondence: 構造画素 → 外観画素の対応
        output_path: 出力 PNG のパス
        structure: 構造画像 (省略時はパネルを出さない)
        appearance: 外観画像
        transferred: 転写結果
        gray_low_confidence: 低信頼の画素を灰色で塗るか
        title: 図のタイトル
    """
    output_path.parent.mkdir(parents=True, exist_ok=True)
    colormap = position_colormap(*correspondence.source_shape)
    rendered = render_correspondence(correspondence, colormap, gray_low_confidence)

    panels: list[tuple[str, npt.NDArray[np.uint8]]] = []
    for label, image in (("structure", structure), ("appearance", appearance), ("transferred", transferred)):
        if image is not None:
            panels.append((label, image))
    panels.append(("appearance colormap", colormap))
    panels.append(("correspondence", rendered))

    fig, axes = plt.subplots(1, len(panels), figsize=(3 * len(panels), 3.4), squeeze=False)
    for ax, (label, image) in zip(axes[0], panels, strict=True):
        ax.imshow(image, interpolation="nearest")
        ax.set_title(label, fontsize=10)
        ax.axis("off")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(output_path, dpi=100)
    plt.close(fig)
    return rendered
