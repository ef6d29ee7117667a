"""Domain types shared across the pipeline.

Everything here is an immutable value object. Constructors validate the
documented invariants and raise :class:`InvalidInputError` on violation.
"""

from __future__ import annotations

import enum
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any

from .errors import InvalidInputError

TASK_KINDS = ("dialog", "summarization", "story", "data2text", "translation")

_WS = re.compile(r"\s+")


def normalize_aspect_name(raw: str) -> str:
    """Lowercase, trim and collapse internal whitespace.

    >>> normalize_aspect_name("  Logical   Flow ")
    'logical flow'
    """
    name = _WS.sub(" ", raw).strip().lower()
    if not name:
        raise InvalidInputError(f"invalid aspect name {raw!r}")
    return name


class Stage(str, enum.Enum):
    LLMSCORE = "llmscore"
    LLMSCORE_COT = "llmscore_cot"
    ASPECT_GEN = "aspect_gen"
    ASPECT_SCORE = "aspect_score"
    COA_SCORE = "coa_score"


class Provenance(str, enum.Enum):
    LLM = "llm"
    RULE = "rule"
    INGESTED = "ingested"


@dataclass(frozen=True)
class AspectSpec:
    """A target aspect: identifier, one-sentence criterion and judge scale.

    ``name`` is the key used in dataset human scores (e.g. ``"overall"``);
    ``label`` is the display form used in prompts (``"Overall Quality"``).
    """

    name: str
    criterion: str
    label: str = ""
    scale_min: float = 1.0
    scale_max: float = 5.0

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise InvalidInputError("aspect name must be nonempty")
        if not self.scale_min < self.scale_max:
            raise InvalidInputError("scale_min must be below scale_max")
        if not self.label:
            object.__setattr__(self, "label", self.name.strip().title())

    @property
    def phrase(self) -> str:
        """Lowercase running-text form of the label."""
        return self.label.lower()


@dataclass(frozen=True)
class EvaluationInstance:
    id: str
    task: str
    source: str
    hypothesis: str
    references: tuple[str, ...] = ()
    human_scores: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    fact: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise InvalidInputError("instance id must be nonempty")
        if self.task not in TASK_KINDS:
            raise InvalidInputError(f"{self.id}: unknown task kind {self.task!r}")
        if not self.hypothesis.strip():
            raise InvalidInputError(f"{self.id}: hypothesis is empty")
        scores = {}
        for aspect, values in self.human_scores.items():
            values = tuple(float(v) for v in values)
            if not values:
                raise InvalidInputError(f"{self.id}: no annotator scores for {aspect!r}")
            scores[aspect] = values
        object.__setattr__(self, "human_scores", MappingProxyType(scores))
        object.__setattr__(self, "references", tuple(self.references))

    def human_mean(self, aspect: str) -> float:
        values = self.human_scores[aspect]
        return sum(values) / len(values)


@dataclass(frozen=True)
class Aspect:
    """One generated relevant aspect: normalized name plus its definition."""

    name: str
    description: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "name", normalize_aspect_name(self.name))
        if not self.description.strip():
            raise InvalidInputError(f"aspect {self.name!r} has an empty description")

    @property
    def display(self) -> str:
        return self.name[:1].upper() + self.name[1:]


@dataclass(frozen=True)
class AspectChain:
    target: AspectSpec
    aspects: tuple[Aspect, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "aspects", tuple(self.aspects))
        names = self.names
        if len(set(names)) != len(names):
            raise InvalidInputError(f"duplicate aspect names in chain: {names}")

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.aspects]

    def __len__(self) -> int:
        return len(self.aspects)

    def subset(self, names: Sequence[str]) -> AspectChain:
        keep = set(names)
        return AspectChain(self.target, tuple(a for a in self.aspects if a.name in keep))

    def as_text(self) -> str:
        return "\n".join(f"{a.display}: {a.description}" for a in self.aspects)


@dataclass(frozen=True)
class AspectScoreSet:
    scores: Mapping[str, float]
    missing: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", MappingProxyType(dict(self.scores)))
        object.__setattr__(self, "missing", tuple(self.missing))
        overlap = set(self.scores) & set(self.missing)
        if overlap:
            raise InvalidInputError(f"names both scored and missing: {sorted(overlap)}")

    def check_against(self, chain: AspectChain) -> None:
        unknown = (set(self.scores) | set(self.missing)) - set(chain.names)
        if unknown:
            raise InvalidInputError(f"score set names outside chain: {sorted(unknown)}")


@dataclass(frozen=True)
class KnowledgeEntry:
    name: str
    description: str
    score: float


@dataclass(frozen=True)
class ChainKnowledge:
    entries: tuple[KnowledgeEntry, ...]
    scale_min: float = 1.0
    scale_max: float = 5.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        for e in self.entries:
            if not self.scale_min <= e.score <= self.scale_max:
                raise InvalidInputError(f"knowledge score for {e.name!r} out of scale: {e.score}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def scores(self) -> list[float]:
        return [e.score for e in self.entries]

    def with_scores(self, scores: Mapping[str, float]) -> ChainKnowledge:
        return ChainKnowledge(
            tuple(KnowledgeEntry(e.name, e.description, float(scores[e.name])) for e in self.entries),
            self.scale_min,
            self.scale_max,
        )


@dataclass(frozen=True)
class MetricScore:
    instance_id: str
    metric_name: str
    aspect_name: str
    value: float
    provenance: Provenance
    diagnostics: Mapping[str, Any] | None = None

    def __post_init__(self) -> None:
        if self.provenance is Provenance.RULE and not 0.0 <= self.value <= 1.0:
            raise InvalidInputError(f"rule score outside [0, 1]: {self.value}")
        if self.provenance is Provenance.LLM and not 1.0 <= self.value <= 5.0:
            raise InvalidInputError(f"llm score outside [1, 5]: {self.value}")


@dataclass(frozen=True)
class PromptTemplate:
    """A stage template: task-description block plus a body with ``{{name}}`` slots."""

    stage: Stage
    task_description: str
    body: str


@dataclass
class ScoreTable:
    """Metric scores for one (dataset, metric, aspect), plus excluded instances."""

    dataset_id: str
    metric_name: str
    aspect_name: str
    rows: dict[str, MetricScore] = field(default_factory=dict)
    exclusions: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    chain: AspectChain | None = None

    def __post_init__(self) -> None:
        clash = set(self.rows) & {i for i, _ in self.exclusions}
        if clash:
            raise InvalidInputError(f"instances both scored and excluded: {sorted(clash)}")

    def values(self) -> dict[str, float]:
        return {k: v.value for k, v in self.rows.items()}
