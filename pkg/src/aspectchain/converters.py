"""Thin adapters from upstream corpus layouts to the normalized format.

Each converter reads one upstream file and returns normalized instances plus
a manifest. Upstream layouts drift between releases; only these functions
know about them.
"""

from __future__ import annotations

import csv
import json
from collections.abc import Callable
from pathlib import Path

from .datasets import AspectDecl, DatasetManifest, write_instances, write_manifest
from .errors import DatasetError
from .model import EvaluationInstance


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from None


def convert_summeval(path: Path) -> tuple[list[EvaluationInstance], DatasetManifest]:
    """``model_annotations.aligned.paired.jsonl``: expert annotations, 3 per summary."""
    aspects = ("coherence", "consistency", "fluency", "relevance")
    out = []
    for line in path.read_text(encoding="utf-8").split("\n"):
        if not line.strip():
            continue
        rec = json.loads(line)
        experts = rec["expert_annotations"]
        out.append(EvaluationInstance(
            id=f"{rec['id']}:{rec['model_id']}",
            task="summarization",
            source=rec["text"],
            hypothesis=rec["decoded"],
            references=tuple(rec.get("references", ())),
            human_scores={a: tuple(e[a] for e in experts) for a in aspects},
        ))
    manifest = DatasetManifest(
        "summeval", "summarization", "summeval.jsonl",
        tuple(AspectDecl(a, 1, 5, 3) for a in aspects), 1600,
    )
    return out, manifest


TOPICALCHAT_ASPECTS = {
    "Overall": ("overall", 1, 5),
    "Natural": ("natural", 1, 3),
    "Maintains Context": ("context", 1, 3),
    "Understandable": ("understandable", 0, 1),
    "Engaging": ("engaging", 1, 3),
}


def convert_topicalchat(
    path: Path, exclude_models: tuple[str, ...] = ("Original Ground Truth",)
) -> tuple[list[EvaluationInstance], DatasetManifest]:
    """USR ``tc_usr_data.json``. The original ground-truth turn becomes the reference."""
    out = []
    for ci, ctx in enumerate(_read_json(path)):
        refs = tuple(r["response"].strip() for r in ctx["responses"] if r["model"] == "Original Ground Truth")
        for r in ctx["responses"]:
            if r["model"] in exclude_models:
                continue
            out.append(EvaluationInstance(
                id=f"tc-{ci:03d}-{r['model'].lower().replace(' ', '_')}",
                task="dialog",
                source=ctx["context"].strip(),
                fact=(ctx.get("fact") or "").strip() or None,
                hypothesis=r["response"].strip() or "(empty)",
                references=refs,
                human_scores={ours: tuple(r[theirs]) for theirs, (ours, _, _) in TOPICALCHAT_ASPECTS.items()},
            ))
    manifest = DatasetManifest(
        "topicalchat", "dialog", "topicalchat.jsonl",
        tuple(AspectDecl(n, lo, hi, 3) for n, lo, hi in TOPICALCHAT_ASPECTS.values()), 300,
    )
    return out, manifest


def convert_openmeva(path: Path) -> tuple[list[EvaluationInstance], DatasetManifest]:
    """``mans_roc.json``: ``{story_id: {prompt, gold, gen: {model: {text, score}}}}``."""
    out = []
    for sid, story in _read_json(path).items():
        gold = story.get("gold")
        for model, gen in story["gen"].items():
            score = gen["score"]
            out.append(EvaluationInstance(
                id=f"{sid}:{model}",
                task="story",
                source=story["prompt"],
                hypothesis=gen["text"],
                references=(gold,) if gold else (),
                human_scores={"overall": tuple(score) if isinstance(score, list) else (score,)},
            ))
    manifest = DatasetManifest("openmeva", "story", "openmeva.jsonl", (AspectDecl("overall", 1, 5, 5),), 1000)
    return out, manifest


def convert_bagel(path: Path) -> tuple[list[EvaluationInstance], DatasetManifest]:
    """JSON export of the BAGEL records: ``{key: {src, ref_summs, sys_summ, scores: {quality}}}``."""
    data = _read_json(path)
    items = data.items() if isinstance(data, dict) else enumerate(data)
    out = []
    for key, rec in items:
        refs = rec.get("ref_summs") or [rec["ref_summ"]]
        quality = rec["scores"]["quality"]
        out.append(EvaluationInstance(
            id=f"bagel-{key}",
            task="data2text",
            source=rec["src"],
            hypothesis=rec["sys_summ"],
            references=tuple(refs),
            human_scores={"overall": tuple(quality) if isinstance(quality, list) else (quality,)},
        ))
    manifest = DatasetManifest("bagel", "data2text", "bagel.jsonl", (AspectDecl("overall", 1, 6, 3),), 404)
    return out, manifest


def convert_iwslt14(path: Path) -> tuple[list[EvaluationInstance], DatasetManifest]:
    """TSV with columns ``source``, ``reference``, ``hypothesis`` and one or more ``rating*`` columns."""
    out = []
    with path.open(encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh, delimiter="\t")):
            ratings = tuple(float(v) for k, v in row.items() if k.startswith("rating") and v)
            out.append(EvaluationInstance(
                id=row.get("id") or f"iwslt-{i:04d}",
                task="translation",
                source=row["source"],
                hypothesis=row["hypothesis"],
                references=(row["reference"],) if row.get("reference") else (),
                human_scores={"overall": ratings},
            ))
    manifest = DatasetManifest("iwslt14", "translation", "iwslt14.jsonl", (AspectDecl("overall", 1, 5, 1),), 1000)
    return out, manifest


CONVERTERS: dict[str, Callable[[Path], tuple[list[EvaluationInstance], DatasetManifest]]] = {
    "summeval": convert_summeval,
    "topicalchat": convert_topicalchat,
    "openmeva": convert_openmeva,
    "bagel": convert_bagel,
    "iwslt14": convert_iwslt14,
}


def convert(corpus: str, upstream: str | Path, out_dir: str | Path) -> Path:
    """Convert ``upstream`` and write ``<corpus>.jsonl`` + ``<corpus>.manifest.json``."""
    try:
        fn = CONVERTERS[corpus]
    except KeyError:
        raise DatasetError(f"unknown corpus {corpus!r}; choose from {sorted(CONVERTERS)}") from None
    try:
        instances, manifest = fn(Path(upstream))
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{upstream}: unexpected {corpus} layout ({exc!r})") from None
    out_dir = Path(out_dir)
    data_path = out_dir / f"{corpus}.jsonl"
    write_instances(instances, data_path)
    manifest = DatasetManifest(manifest.id, manifest.task, str(data_path), manifest.aspects, manifest.expected_size)
    manifest_path = out_dir / f"{corpus}.manifest.json"
    write_manifest(manifest, manifest_path)
    return manifest_path
