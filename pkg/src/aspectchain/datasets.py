"""Normalized evaluation corpora.

Every corpus is converted once into a line-delimited JSON file with one
instance per line::

    {"id": "tc-0001", "task": "dialog", "source": "A: hi\\nB: hello",
     "fact": "...", "hypothesis": "...", "references": ["..."],
     "human_scores": {"overall": [4, 5, 4], "natural": [3, 3, 2]}}

A JSON manifest next to it declares the task kind, the annotated aspects with
their native scales, and the expected size.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import DatasetError, InvalidInputError
from .model import TASK_KINDS, AspectSpec, EvaluationInstance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AspectDecl:
    name: str
    scale_min: float = 1.0
    scale_max: float = 5.0
    annotators: int = 1
    label: str | None = None
    criterion: str | None = None

    def rescale(self, value: float, lo: float = 1.0, hi: float = 5.0) -> float:
        """Map a native-scale value linearly onto ``[lo, hi]``."""
        span = self.scale_max - self.scale_min
        return lo + (value - self.scale_min) * (hi - lo) / span


@dataclass(frozen=True)
class DatasetManifest:
    id: str
    task: str
    path: str
    aspects: tuple[AspectDecl, ...]
    expected_size: int

    def __post_init__(self) -> None:
        if self.task not in TASK_KINDS:
            raise DatasetError(f"manifest {self.id}: unknown task kind {self.task!r}")
        if self.expected_size <= 0:
            raise DatasetError(f"manifest {self.id}: expected_size must be positive")
        if not self.aspects:
            raise DatasetError(f"manifest {self.id}: no aspects declared")

    def aspect(self, name: str) -> AspectDecl:
        for decl in self.aspects:
            if decl.name == name:
                return decl
        raise DatasetError(f"dataset {self.id} has no aspect {name!r}")

    @property
    def aspect_names(self) -> list[str]:
        return [a.name for a in self.aspects]

    @classmethod
    def from_file(cls, path: str | Path) -> DatasetManifest:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DatasetError(f"cannot read manifest {path}: {exc}") from None
        data_path = Path(data["path"])
        if not data_path.is_absolute():
            data_path = path.parent / data_path
        return cls(
            id=data["id"],
            task=data["task"],
            path=str(data_path),
            aspects=tuple(AspectDecl(**a) for a in data["aspects"]),
            expected_size=int(data["expected_size"]),
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["aspects"] = [asdict(a) for a in self.aspects]
        return out


@dataclass(frozen=True)
class Dataset:
    manifest: DatasetManifest
    instances: tuple[EvaluationInstance, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def id(self) -> str:
        return self.manifest.id

    @property
    def task(self) -> str:
        return self.manifest.task

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def by_id(self) -> dict[str, EvaluationInstance]:
        return {inst.id: inst for inst in self.instances}


# Criteria for aspects annotated in the supported corpora. The overall-quality
# wording for dialog is the reference wording; the rest are written here.
KNOWN_ASPECTS: dict[tuple[str, str], tuple[str, str]] = {
    ("dialog", "overall"): ("Overall Quality", "How is the overall quality of the response?"),
    ("dialog", "natural"): ("Naturalness", "Does the response sound like something a person would naturally say?"),
    ("dialog", "context"): ("Maintains Context", "Does the response serve as a valid continuation of the conversation?"),
    ("dialog", "understandable"): ("Understandability", "Is the response understandable given the previous context?"),
    ("dialog", "engaging"): ("Engagingness", "Is the response dull or interesting?"),
    ("dialog", "knowledge"): ("Uses Knowledge", "Does the response make appropriate use of the provided fact?"),
    ("summarization", "coherence"): ("Coherence", "Is the summary well-structured and well-organized, building from sentence to sentence into a coherent body of information?"),
    ("summarization", "consistency"): ("Consistency", "Is the summary factually aligned with the article, containing only statements entailed by it?"),
    ("summarization", "fluency"): ("Fluency", "Are the individual sentences of the summary well-written and grammatical?"),
    ("summarization", "relevance"): ("Relevance", "Does the summary include only the important information from the article?"),
}

_NOUNS = {"dialog": "response", "summarization": "summary", "story": "continuation",
          "data2text": "description", "translation": "translation"}


def aspect_spec(task: str, name: str, decl: AspectDecl | None = None) -> AspectSpec:
    """Resolve the judge-facing description of a dataset aspect."""
    label, criterion = KNOWN_ASPECTS.get(
        (task, name),
        ("Overall Quality", f"How is the overall quality of the {_NOUNS.get(task, 'text')}?")
        if name == "overall"
        else (name.title(), f"How is the {name} of the {_NOUNS.get(task, 'text')}?"),
    )
    if decl is not None:
        label = decl.label or label
        criterion = decl.criterion or criterion
    return AspectSpec(name=name, criterion=criterion, label=label)


REQUIRED_FIELDS = ("id", "source", "hypothesis", "human_scores")


def _instance_from_record(rec: dict, manifest: DatasetManifest, lineno: int) -> EvaluationInstance:
    ident = rec.get("id", f"<line {lineno}>")
    for name in REQUIRED_FIELDS:
        if name not in rec:
            raise DatasetError(f"instance {ident}: missing field {name!r}")
    scores = rec["human_scores"]
    for decl in manifest.aspects:
        if decl.name not in scores:
            raise DatasetError(f"instance {ident}: missing field 'human_scores.{decl.name}'")
    try:
        return EvaluationInstance(
            id=str(rec["id"]),
            task=rec.get("task", manifest.task),
            source=rec["source"],
            fact=rec.get("fact") or None,
            hypothesis=rec["hypothesis"],
            references=tuple(rec.get("references") or ()),
            human_scores={k: tuple(v) if isinstance(v, list) else (v,) for k, v in scores.items()},
        )
    except InvalidInputError as exc:
        raise DatasetError(f"instance {ident}: {exc}") from None


def load_dataset(manifest: DatasetManifest) -> Dataset:
    path = Path(manifest.path)
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from None
    instances = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
        instances.append(_instance_from_record(rec, manifest, lineno))
    warnings = []
    if len(instances) != manifest.expected_size:
        msg = f"dataset {manifest.id}: expected {manifest.expected_size} instances, loaded {len(instances)}"
        log.warning(msg)
        warnings.append(msg)
    return Dataset(manifest, tuple(instances), tuple(warnings))


def instance_record(inst: EvaluationInstance) -> dict:
    rec = {
        "id": inst.id,
        "task": inst.task,
        "source": inst.source,
        "hypothesis": inst.hypothesis,
        "references": list(inst.references),
        "human_scores": {k: list(v) for k, v in inst.human_scores.items()},
    }
    if inst.fact:
        rec["fact"] = inst.fact
    return rec


def write_instances(instances, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_record(inst), ensure_ascii=False) + "\n")


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    data = manifest.to_dict()
    data_path = Path(manifest.path)
    try:
        data["path"] = str(data_path.relative_to(Path(path).parent))
    except ValueError:
        pass
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Violation:
    kind: str  # uniqueness | hypothesis | coverage | range
    instance_id: str
    detail: str


def validate_dataset(dataset: Dataset, manifest: DatasetManifest | None = None) -> list[Violation]:
    """Structured list of problems; empty means clean. Never raises."""
    manifest = manifest or dataset.manifest
    out: list[Violation] = []
    counts = Counter(inst.id for inst in dataset.instances)
    for ident, n in counts.items():
        if n > 1:
            out.append(Violation("uniqueness", ident, f"id occurs {n} times"))
    for inst in dataset.instances:
        if not inst.hypothesis.strip():
            out.append(Violation("hypothesis", inst.id, "empty hypothesis"))
        for decl in manifest.aspects:
            values = inst.human_scores.get(decl.name)
            if not values:
                out.append(Violation("coverage", inst.id, f"no scores for {decl.name!r}"))
                continue
            bad = [v for v in values if not decl.scale_min <= v <= decl.scale_max]
            if bad:
                out.append(Violation(
                    "range", inst.id,
                    f"{decl.name} scores {bad} outside [{decl.scale_min}, {decl.scale_max}]",
                ))
    return out
