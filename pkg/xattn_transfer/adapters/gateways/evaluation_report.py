"""評価用のペア CSV の読み込みと、評価結果 (CSV / テキスト) の書き出し"""

import csv
from pathlib import Path

from xattn_transfer.domain.entities.analysis import EvaluationReport
from xattn_transfer.domain.errors import ConfigError
from xattn_transfer.use_cases.evaluation import EvaluationPair

PAIR_COLUMNS = ("pair_id", "structure", "appearance")
NOT_AVAILABLE = "N/A"


def read_pairs(pairs_csv: Path, outputs_dir: Path, masks_dir: Path) -> list[EvaluationPair]:
    """`pair_id,structure,appearance[,domain]` の CSV から評価ペアを作る

    パスは CSV のあるディレクトリからの相対パスとして解決する。
    出力画像は `{outputs_dir}/{pair_id}.png`、マスクは
    `{masks_dir}/{pair_id}_output.png` と `{masks_dir}/{pair_id}_structure.png`。

    Raises:
        FileNotFoundError: CSV が無い
        ConfigError: 必須列が無い、または pair_id が重複している
    """
    if not pairs_csv.exists():
        raise FileNotFoundError(f"pairs file not found: {pairs_csv}")
    base = pairs_csv.parent
    pairs: list[EvaluationPair] = []
    seen: set[str] = set()
    with pairs_csv.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = [column for column in PAIR_COLUMNS if column not in (reader.fieldnames or [])]
        if missing:
            raise ConfigError(f"{pairs_csv}: missing columns {missing}")
        for row in reader:
            pair_id = row["pair_id"].strip()
            if pair_id in seen:
                raise ConfigError(f"{pairs_csv}: duplicate pair_id {pair_id!r}")
            seen.add(pair_id)
            pairs.append(
                EvaluationPair(
                    pair_id=pair_id,
                    appearance=base / row["appearance"].strip(),
                    output=outputs_dir / f"{pair_id}.png",
                    output_mask=masks_dir / f"{pair_id}_output.png",
                    structure_mask=masks_dir / f"{pair_id}_structure.png",
                    domain=(row.get("domain") or "").strip(),
                )
            )
    return pairs


def _cell(value: float | None) -> str:
    return NOT_AVAILABLE if value is None else f"{value:.6f}"


def write_report(report: EvaluationReport, report_dir: Path) -> dict[str, Path]:
    """evaluation.csv / evaluation_by_domain.csv / evaluation.txt を書き出す"""
    report_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "pairs": report_dir / "evaluation.csv",
        "domains": report_dir / "evaluation_by_domain.csv",
        "summary": report_dir / "evaluation.txt",
    }
    with paths["pairs"].open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["pair_id", "domain", "structure_iou", "gram_distance", "note"])
        for row in report.rows:
            writer.writerow([row.pair_id, row.domain, _cell(row.structure_iou), _cell(row.gram_distance), row.note])
        writer.writerow(["mean", "", _cell(report.mean_structure_iou), _cell(report.mean_gram_distance), ""])

    with paths["domains"].open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["domain", "pairs", "structure_iou", "gram_distance"])
        for summary in report.domains:
            writer.writerow(
                [
                    summary.domain,
                    summary.pair_count,
                    _cell(summary.mean_structure_iou),
                    _cell(summary.mean_gram_distance),
                ]
            )

    lines = [
        f"pairs = {len(report.rows)}",
        f"mean_structure_iou = {_cell(report.mean_structure_iou)}",
        f"mean_gram_distance = {_cell(report.mean_gram_distance)}",
        f"extractor = {report.extractor}",
        f"extractor_layers = {','.join(report.extractor_layers)}",
    ]
    paths["summary"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    return paths
