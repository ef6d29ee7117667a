"""Score files, run manifests and correlation tables on disk."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

from .correlation import CorrelationReport, CorrelationRow
from .datasets import Dataset
from .errors import DatasetError
from .model import AspectChain, MetricScore, Provenance, ScoreTable

SCORE_HEADER = ("instance_id", "value", "provenance")
SCORE_SUFFIX = ".scores.csv"
UNDEFINED = "—"


def score_path(out_dir: str | Path, metric_name: str) -> Path:
    return Path(out_dir) / f"{metric_name}{SCORE_SUFFIX}"


def write_score_file(table: ScoreTable, path: str | Path) -> Path:
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORE_HEADER)
    for ident, score in table.rows.items():
        writer.writerow((ident, repr(float(score.value)), score.provenance.value))
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def metric_name_from_path(path: str | Path) -> str:
    name = Path(path).name
    return name[: -len(SCORE_SUFFIX)] if name.endswith(SCORE_SUFFIX) else Path(path).stem


def read_score_file(path: str | Path, dataset: Dataset, aspect: str, metric_name: str | None = None) -> ScoreTable:
    path = Path(path)
    metric_name = metric_name or metric_name_from_path(path)
    known = {inst.id for inst in dataset.instances}
    table = ScoreTable(dataset.id, metric_name, aspect)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:2]) != SCORE_HEADER[:2]:
            raise DatasetError(f"{path}: header must start with 'instance_id,value'")
        unknown = []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            try:
                ident, value = row[0], float(row[1])
                prov = Provenance(row[2]) if len(row) > 2 and row[2] else Provenance.INGESTED
            except (IndexError, ValueError):
                raise DatasetError(f"{path}:{lineno}: malformed row") from None
            if ident not in known:
                unknown.append(ident)
                continue
            table.rows[ident] = MetricScore(ident, metric_name, aspect, value, prov)
    if unknown:
        raise DatasetError(f"{path}: {len(unknown)} ids not in dataset {dataset.id}, e.g. {unknown[:3]}")
    return table


def chain_digest(chain: AspectChain) -> str:
    return hashlib.sha256(chain.as_text().encode("utf-8")).hexdigest()[:16]


def write_json(data: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def _fmt(value: float | None) -> str:
    return UNDEFINED if value is None else f"{value:.3f}"


def _cells(row: CorrelationRow) -> list[str]:
    return [row.metric_name, row.aspect_name, _fmt(row.pearson), _fmt(row.spearman), _fmt(row.kendall),
            str(row.n_pairs), str(row.n_excluded)]


def render_markdown(report: CorrelationReport) -> str:
    lines = [
        f"Dataset-level correlations with human judgments ({report.dataset_id})",
        "",
        "| Metric | Aspect | γ | ρ | τ | n_pairs | n_excluded |",
        "|---|---|---|---|---|---|---|",
    ]
    lines += ["| " + " | ".join(_cells(row)) + " |" for row in report.rows]
    return "\n".join(lines) + "\n"


def render_csv(report: CorrelationReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "aspect", "pearson", "spearman", "kendall", "n_pairs", "n_excluded"])
    for row in report.rows:
        writer.writerow(_cells(row))
    return buf.getvalue()


RENDERERS = {"markdown": (render_markdown, "md"), "csv": (render_csv, "csv")}


def write_report(report: CorrelationReport, out_dir: str | Path, formats) -> list[Path]:
    paths = []
    for fmt in formats:
        render, ext = RENDERERS[fmt]
        path = Path(out_dir) / f"correlations.{ext}"
        path.write_text(render(report), encoding="utf-8")
        paths.append(path)
    return paths
