"""Prompt templates for every judge call, and parsers for what comes back.

Templates are plain text with ``{{name}}`` slots. Rendering is a single
substitution pass, so text inside bound values is never re-expanded.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidInputError, ParseFailure, RenderError
from .model import (
    Aspect,
    AspectChain,
    AspectScoreSet,
    AspectSpec,
    ChainKnowledge,
    EvaluationInstance,
    PromptTemplate,
    Stage,
    normalize_aspect_name,
)

PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


@dataclass(frozen=True)
class TaskProfile:
    """Task-kind wording: description blocks, section labels and nouns."""

    intro: str
    definition: str
    source_label: str
    hypothesis_label: str
    source_noun: str
    hypothesis_noun: str


# The dialog wording is the reference wording. The other four kinds are
# adapted analogues written for this package.
TASK_PROFILES: dict[str, TaskProfile] = {
    "dialog": TaskProfile(
        intro=(
            "You will be given a conversation between two individuals.\n"
            "You will then be given one potential response for the next turn in the conversation.\n"
            "The response concerns an interesting fact, which will be provided as well."
        ),
        definition="The dialog response evaluation task refers to evaluate the response based on the conversation.",
        source_label="Conversation",
        hypothesis_label="Response",
        source_noun="conversation",
        hypothesis_noun="response",
    ),
    "summarization": TaskProfile(
        intro=(
            "You will be given a news article.\n"
            "You will then be given one summary written for this article."
        ),
        definition="The summarization evaluation task refers to evaluate the summary based on the news article.",
        source_label="Article",
        hypothesis_label="Summary",
        source_noun="article",
        hypothesis_noun="summary",
    ),
    "story": TaskProfile(
        intro=(
            "You will be given the beginning of a story.\n"
            "You will then be given one continuation of the story written by a generation system."
        ),
        definition="The story generation evaluation task refers to evaluate the story continuation based on the story beginning.",
        source_label="Story Beginning",
        hypothesis_label="Continuation",
        source_noun="story beginning",
        hypothesis_noun="continuation",
    ),
    "data2text": TaskProfile(
        intro=(
            "You will be given a structured data record.\n"
            "You will then be given one natural-language description generated from this record."
        ),
        definition="The data-to-text evaluation task refers to evaluate the description based on the data record.",
        source_label="Data",
        hypothesis_label="Description",
        source_noun="data record",
        hypothesis_noun="description",
    ),
    "translation": TaskProfile(
        intro=(
            "You will be given a source sentence.\n"
            "You will then be given one translation of this sentence into English."
        ),
        definition="The machine translation evaluation task refers to evaluate the translation based on the source sentence.",
        source_label="Source Sentence",
        hypothesis_label="Translation",
        source_noun="source sentence",
        hypothesis_noun="translation",
    ),
}

_CONTEXT = """{{fact}}{{source_label}}:
{{source}}

{{hyp_label}}:
{{hypothesis}}
"""

_CRITERIA = """Evaluation Criteria:
{{aspect_name}} (1-5) {{aspect_criterion}}
"""

BODIES: dict[Stage, str] = {
    Stage.LLMSCORE: (
        "{{task_description}}\nYour task is to rate the {{hyp_noun}} on one metric.\n\n"
        + _CRITERIA + "\n" + _CONTEXT
        + "\nBased on the {{source_noun}} and the evaluation criteria for {{aspect_phrase}}, "
        "please rate the {{aspect_phrase}} of the {{hyp_noun}}.\n"
        "{{aspect_name}} Score:"
    ),
    Stage.LLMSCORE_COT: (
        "{{task_description}}\nYour task is to rate the {{hyp_noun}} on one metric.\n\n"
        + _CRITERIA + "\n" + _CONTEXT
        + "\nBased on the {{source_noun}} and the evaluation criteria for {{aspect_phrase}}, "
        "please rate the {{aspect_phrase}} of the {{hyp_noun}}.\n"
        "Let's think step by step:"
    ),
    Stage.ASPECT_GEN: (
        "{{task_description}}\n"
        "Your task is to list {{m}} aspects that can be considered when measuring the "
        "{{aspect_phrase}} of {{hyp_noun}}.\n"
        "{{aspect_name}}: {{aspect_criterion}}"
    ),
    Stage.ASPECT_SCORE: (
        "{{task_description}}\nYour task is to rate the {{hyp_noun}} based on the given aspects.\n"
        "Scores for each aspect range from 1 to 5, representing worst to best.\n\n"
        "Aspects:\n{{aspect_blocks}}\n\n" + _CONTEXT
        + "\nBased on the {{source_noun}} and the aspects, please rate the {{hyp_noun}} for each aspect.\n"
        "Provide them in JSON format, aspect as key, score as value:"
    ),
    Stage.COA_SCORE: (
        "{{task_description}}\nYour task is to rate the {{hyp_noun}} on one metric.\n\n"
        + _CRITERIA + "\n" + _CONTEXT
        + "\nBefore you rate the above {{hyp_noun}}, some scores for different aspects of this "
        "{{hyp_noun}} can help you rate the {{aspect_phrase}} of this {{hyp_noun}}:\n"
        "{{knowledge_blocks}}\n\n"
        "Based on the {{source_noun}}, the evaluation criteria for {{aspect_phrase}} and the scores "
        "for different aspects of the {{hyp_noun}}, please rate the {{aspect_phrase}} of the {{hyp_noun}}.\n"
        "{{aspect_name}} Score:"
    ),
}

# Content slots must appear exactly once; label slots (nouns, aspect names)
# may repeat, as the closing instructions mention the aspect twice.
REQUIRED_SLOTS: dict[Stage, tuple[str, ...]] = {
    Stage.LLMSCORE: ("task_description", "aspect_criterion", "fact", "source", "hypothesis"),
    Stage.LLMSCORE_COT: ("task_description", "aspect_criterion", "fact", "source", "hypothesis"),
    Stage.ASPECT_GEN: ("task_description", "aspect_criterion", "m"),
    Stage.ASPECT_SCORE: ("task_description", "aspect_blocks", "fact", "source", "hypothesis"),
    Stage.COA_SCORE: ("task_description", "aspect_criterion", "fact", "source", "hypothesis", "knowledge_blocks"),
}

_NUMBER_WORDS = (
    "zero one two three four five six seven eight nine ten eleven twelve thirteen "
    "fourteen fifteen sixteen seventeen eighteen nineteen twenty"
).split()


def count_word(m: int) -> str:
    return _NUMBER_WORDS[m] if 0 <= m < len(_NUMBER_WORDS) else str(m)


def profile_for(task: str) -> TaskProfile:
    try:
        return TASK_PROFILES[task]
    except KeyError:
        raise RenderError(f"no task profile for task kind {task!r}") from None


def default_template(stage: Stage, task: str) -> PromptTemplate:
    profile = profile_for(task)
    description = profile.definition if stage is Stage.ASPECT_GEN else profile.intro
    return PromptTemplate(stage, description, BODIES[stage])


def load_template(stage: Stage, task: str, body_path: str | Path) -> PromptTemplate:
    """Default task description with a body read from a plain-text file."""
    base = default_template(stage, task)
    return PromptTemplate(stage, base.task_description, Path(body_path).read_text(encoding="utf-8"))


def template_digest(template: PromptTemplate) -> str:
    blob = f"{template.stage.value}\n{template.task_description}\n{template.body}"
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class RenderedPrompt:
    stage: Stage
    text: str
    placeholder_bindings: Mapping[str, str] = field(default_factory=dict)


def _digest(value: str) -> str:
    return hashlib.sha256(value.encode("utf-8")).hexdigest()[:12]


def fill(template: PromptTemplate, bindings: Mapping[str, str]) -> RenderedPrompt:
    body = template.body
    used = PLACEHOLDER.findall(body)
    unbound = sorted(set(used) - set(bindings))
    if unbound:
        raise RenderError(f"unresolved placeholder(s) in {template.stage.value} template: {unbound}")
    for slot in REQUIRED_SLOTS[template.stage]:
        count = used.count(slot)
        if count != 1:
            raise RenderError(
                f"{template.stage.value} template must contain {{{{{slot}}}}} exactly once (found {count})"
            )
    text = PLACEHOLDER.sub(lambda m: bindings[m.group(1)], body)
    return RenderedPrompt(
        template.stage,
        text,
        {k: _digest(v) for k, v in sorted(bindings.items()) if k in used},
    )


def _common_bindings(template: PromptTemplate, task: str, aspect: AspectSpec) -> dict[str, str]:
    profile = profile_for(task)
    return {
        "task_description": template.task_description,
        "hyp_noun": profile.hypothesis_noun,
        "source_noun": profile.source_noun,
        "source_label": profile.source_label,
        "hyp_label": profile.hypothesis_label,
        "aspect_name": aspect.label,
        "aspect_phrase": aspect.phrase,
        "aspect_criterion": aspect.criterion,
    }


def _context_bindings(instance: EvaluationInstance) -> dict[str, str]:
    if not instance.source.strip():
        raise RenderError(f"instance {instance.id}: required field 'source' is empty")
    return {
        "fact": f"Fact:\n{instance.fact}\n\n" if instance.fact else "",
        "source": instance.source,
        "hypothesis": instance.hypothesis,
    }


def _template(template: PromptTemplate | None, stage: Stage, task: str) -> PromptTemplate:
    if template is None:
        return default_template(stage, task)
    if template.stage is not stage:
        raise RenderError(f"expected a {stage.value} template, got {template.stage.value}")
    return template


def render_llmscore_prompt(
    aspect: AspectSpec, instance: EvaluationInstance, template: PromptTemplate | None = None
) -> RenderedPrompt:
    template = _template(template, Stage.LLMSCORE, instance.task)
    bindings = _common_bindings(template, instance.task, aspect) | _context_bindings(instance)
    return fill(template, bindings)


def render_cot_prompt(
    aspect: AspectSpec, instance: EvaluationInstance, template: PromptTemplate | None = None
) -> RenderedPrompt:
    template = _template(template, Stage.LLMSCORE_COT, instance.task)
    bindings = _common_bindings(template, instance.task, aspect) | _context_bindings(instance)
    return fill(template, bindings)


def render_cot_followup(first: RenderedPrompt, reasoning: str, aspect: AspectSpec) -> RenderedPrompt:
    """Second CoT turn: the first prompt, the judge's reasoning, then the score cue."""
    if not reasoning.strip():
        raise RenderError("chain-of-thought reasoning is empty")
    text = f"{first.text}\n{reasoning.strip()}\n\n{aspect.label} Score:"
    return RenderedPrompt(
        Stage.LLMSCORE_COT, text, dict(first.placeholder_bindings) | {"reasoning": _digest(reasoning)}
    )


def render_aspect_generation_prompt(
    aspect: AspectSpec, task: str, m: int, template: PromptTemplate | None = None
) -> RenderedPrompt:
    if m < 1:
        raise InvalidInputError(f"aspect count must be >= 1, got {m}")
    template = _template(template, Stage.ASPECT_GEN, task)
    bindings = _common_bindings(template, task, aspect) | {"m": count_word(m)}
    return fill(template, bindings)


def render_aspect_scoring_prompt(
    chain: AspectChain, instance: EvaluationInstance, template: PromptTemplate | None = None
) -> RenderedPrompt:
    if not chain.aspects:
        raise InvalidInputError("cannot render a scoring prompt for an empty chain")
    template = _template(template, Stage.ASPECT_SCORE, instance.task)
    blocks = "\n".join(f"{a.display}: {a.description}" for a in chain.aspects)
    bindings = (
        _common_bindings(template, instance.task, chain.target)
        | _context_bindings(instance)
        | {"aspect_blocks": blocks}
    )
    return fill(template, bindings)


def format_score(value: float) -> str:
    value = round(float(value), 2)
    return f"{value:.1f}" if value == round(value, 1) else f"{value:.2f}"


def render_coa_prompt(
    aspect: AspectSpec,
    instance: EvaluationInstance,
    knowledge: ChainKnowledge,
    template: PromptTemplate | None = None,
    *,
    show_scores: bool = True,
) -> RenderedPrompt:
    if not knowledge.entries:
        raise InvalidInputError("cannot render a chain-of-aspects prompt without knowledge")
    template = _template(template, Stage.COA_SCORE, instance.task)
    lines = []
    for entry in knowledge.entries:
        lines.append(f"{entry.name[:1].upper()}{entry.name[1:]}: {entry.description}")
        if show_scores:
            lines.append(f"Score: {format_score(entry.score)}")
    bindings = (
        _common_bindings(template, instance.task, aspect)
        | _context_bindings(instance)
        | {"knowledge_blocks": "\n".join(lines)}
    )
    return fill(template, bindings)


def render_coa_prompt_without_scores(
    aspect: AspectSpec,
    instance: EvaluationInstance,
    knowledge: ChainKnowledge,
    template: PromptTemplate | None = None,
) -> RenderedPrompt:
    return render_coa_prompt(aspect, instance, knowledge, template, show_scores=False)


# --------------------------------------------------------------------------
# Parsing

_LIST_MARKER = re.compile(r"^(?:\d+\s*[.)]\s*|[-•+]\s+|\*\s+)")
_NUMBER = re.compile(r"(?<![\w.])(\d+(?:\.\d+)?)")
_SCORE_LINE = re.compile(r"^(?P<name>[^:\n]+?)\s*:\s*[*_\s]*(?P<value>-?\d+(?:\.\d+)?)")


def _clean_name(raw: str) -> str:
    return raw.replace("_", " ").strip(" \t*#`\"'").strip()


def _plausible_name(name: str) -> bool:
    return bool(name) and len(name) <= 60 and len(name.split()) <= 6 and name[0].isalpha()


def parse_aspect_list(text: str, expected_m: int, target: AspectSpec) -> AspectChain:
    """Extract ``Name: description`` pairs into a chain of at most ``expected_m``."""
    if not text or not text.strip():
        raise ParseFailure("empty aspect list")
    found: dict[str, Aspect] = {}
    for line in text.splitlines():
        line = _LIST_MARKER.sub("", line.strip())
        name_part, sep, desc = line.partition(":")
        if not sep:
            continue
        name = _clean_name(name_part)
        desc = desc.strip(" \t*").strip()
        if not desc or not _plausible_name(name):
            continue
        key = normalize_aspect_name(name)
        if key not in found:
            found[key] = Aspect(key, desc)
    if not found:
        raise ParseFailure("no 'Name: description' pairs in judge output")
    aspects = list(found.values())
    warnings = []
    if len(aspects) > expected_m:
        warnings.append(f"judge listed {len(aspects)} aspects, kept the first {expected_m}")
        aspects = aspects[:expected_m]
    elif len(aspects) < expected_m:
        warnings.append(f"judge listed {len(aspects)} aspects, expected {expected_m}")
    return AspectChain(target, tuple(aspects), tuple(warnings))


def _json_object(text: str) -> dict | None:
    start, end = text.find("{"), text.rfind("}")
    if start < 0 or end <= start:
        return None
    try:
        obj = json.loads(text[start:end + 1])
    except json.JSONDecodeError:
        return None
    return obj if isinstance(obj, dict) else None


def _collect(pairs: Iterable[tuple[str, object]], expected: set[str], lo: float, hi: float) -> dict[str, float]:
    out: dict[str, float] = {}
    for raw_name, raw_value in pairs:
        try:
            name = normalize_aspect_name(_clean_name(str(raw_name)))
            value = float(raw_value)
        except (InvalidInputError, TypeError, ValueError):
            continue
        if name in expected and name not in out and value == value:
            out[name] = min(max(value, lo), hi)
    return out


def parse_score_map(
    text: str, expected_names: Iterable[str], scale: tuple[float, float] = (1.0, 5.0)
) -> AspectScoreSet:
    """Read per-aspect scores from a JSON object, falling back to ``Name: number`` lines.

    Values are clamped into ``scale``; names outside ``expected_names`` are ignored.
    """
    expected = [normalize_aspect_name(n) for n in expected_names]
    if not expected:
        raise InvalidInputError("expected_names must be nonempty")
    wanted = set(expected)
    lo, hi = scale
    scores: dict[str, float] = {}
    obj = _json_object(text or "")
    if obj is not None:
        scores = _collect(obj.items(), wanted, lo, hi)
    if not scores:
        pairs = []
        for line in (text or "").splitlines():
            m = _SCORE_LINE.match(_LIST_MARKER.sub("", line.strip()))
            if m:
                pairs.append((m.group("name"), m.group("value")))
        scores = _collect(pairs, wanted, lo, hi)
    if not scores:
        raise ParseFailure("no expected aspect scores in judge output")
    ordered = {n: scores[n] for n in expected if n in scores}
    return AspectScoreSet(ordered, tuple(n for n in expected if n not in scores))


def parse_scalar_score(text: str, scale: tuple[float, float] = (1.0, 5.0)) -> float:
    """First number in ``text`` that lies inside ``scale``."""
    if not text or not text.strip():
        raise ParseFailure("empty score output")
    lo, hi = scale
    for token in _NUMBER.findall(text):
        value = float(token)
        if lo <= value <= hi:
            return value
    raise ParseFailure(f"no in-range score in {text[:80]!r}")
