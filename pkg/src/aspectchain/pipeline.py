"""Three-stage chain-of-aspects scoring and its ablation variants.

Stage 1 asks the judge for ``m`` aspects related to the target aspect.
Stage 2 scores the hypothesis on all of them in one call. Stage 3 shows the
judge those descriptions and scores and asks for the target-aspect score.

Variants:

``full``            stages 1-3 as above
``average``         mean of the stage-2 scores, no stage-3 call
``without_scores``  stage 3 sees descriptions only
``random``          stage 3 sees seeded uniform random scores
``inter``           stage 3 sees the dataset's other human-annotated aspects
"""

from __future__ import annotations

import hashlib
import logging
import random
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .baselines import llmscore
from .datasets import Dataset, aspect_spec
from .errors import (
    EmptyKnowledgeError,
    InstanceFailure,
    InvalidInputError,
    LLMError,
    ParseFailure,
    StageOneFailure,
)
from .llm import JudgeClient
from .model import (
    Aspect,
    AspectChain,
    AspectScoreSet,
    AspectSpec,
    ChainKnowledge,
    EvaluationInstance,
    KnowledgeEntry,
    MetricScore,
    PromptTemplate,
    Provenance,
    ScoreTable,
    Stage,
)
from .prompts import (
    parse_aspect_list,
    parse_scalar_score,
    parse_score_map,
    render_aspect_generation_prompt,
    render_aspect_scoring_prompt,
    render_coa_prompt,
)

log = logging.getLogger(__name__)

VARIANTS = ("full", "average", "without_scores", "random", "inter")
DATASET_TAG = "*dataset*"


@dataclass(frozen=True)
class PipelineConfig:
    aspect: AspectSpec
    variant: str = "full"
    m: int = 5
    seed: int | None = None
    reuse_chain_per_dataset: bool = True

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown variant {self.variant!r}")
        if self.m < 1:
            raise InvalidInputError("m must be >= 1")
        if self.variant == "random" and self.seed is None:
            raise InvalidInputError("the random variant needs a seed")

    @property
    def metric_name(self) -> str:
        if self.variant == "inter":
            return "coascore_inter"
        name = "coascore" if self.variant == "full" else f"coascore_{self.variant}"
        name += f"_m{self.m}"
        if self.variant == "random":
            name += f"_seed{self.seed}"
        return name


def _tag(stage: Stage, instance_id: str) -> str:
    return f"{stage.value}:{instance_id}"


def generate_relevant_aspects(
    aspect: AspectSpec,
    task: str,
    m: int,
    client: JudgeClient,
    template: PromptTemplate | None = None,
) -> AspectChain:
    """Stage 1. Re-asks once (cache bypassed) if fewer than ``m`` aspects come back."""
    prompt = render_aspect_generation_prompt(aspect, task, m, template)
    tag = _tag(Stage.ASPECT_GEN, DATASET_TAG)
    best: AspectChain | None = None
    try:
        for bypass in (False, True):
            text = client.ask(prompt.text, tag, bypass_cache=bypass)
            try:
                chain = parse_aspect_list(text, m, aspect)
            except ParseFailure as exc:
                log.warning("aspect generation output unparseable: %s", exc)
                continue
            if best is None or len(chain) > len(best):
                best = chain
            if len(best) >= m:
                break
    except LLMError as exc:
        raise StageOneFailure(f"aspect generation failed: {exc}") from exc
    if best is None:
        raise StageOneFailure("aspect generation produced no aspects on two attempts")
    return best


def score_relevant_aspects(
    chain: AspectChain,
    instance: EvaluationInstance,
    client: JudgeClient,
    template: PromptTemplate | None = None,
) -> AspectScoreSet:
    """Stage 2: one call for all aspects, plus one targeted call for any omitted."""
    if not chain.aspects:
        raise InvalidInputError("cannot score an empty chain")
    tag = _tag(Stage.ASPECT_SCORE, instance.id)
    prompt = render_aspect_scoring_prompt(chain, instance, template)
    try:
        result, _, _ = client.ask_parsed(prompt.text, tag, lambda t: parse_score_map(t, chain.names))
    except ParseFailure as exc:
        raise InstanceFailure(f"aspect scoring: {exc}") from exc
    if not result.missing:
        return result
    sub = chain.subset(result.missing)
    retry_prompt = render_aspect_scoring_prompt(sub, instance, template)
    try:
        repair = parse_score_map(client.ask(retry_prompt.text, tag), sub.names)
    except ParseFailure:
        return result
    merged = dict(result.scores) | dict(repair.scores)
    return AspectScoreSet(
        {n: merged[n] for n in chain.names if n in merged},
        tuple(n for n in chain.names if n not in merged),
    )


def assemble_knowledge(chain: AspectChain, score_set: AspectScoreSet) -> ChainKnowledge:
    entries = tuple(
        KnowledgeEntry(a.name, a.description, float(score_set.scores[a.name]))
        for a in chain.aspects
        if a.name in score_set.scores
    )
    if not entries:
        raise EmptyKnowledgeError("no aspect has both a description and a score")
    return ChainKnowledge(entries, chain.target.scale_min, chain.target.scale_max)


def randomize_scores(chain: AspectChain, seed: int) -> AspectScoreSet:
    """Independent uniform integer scores in [1, 5], one per aspect, in chain order."""
    if not chain.aspects:
        raise InvalidInputError("cannot randomize an empty chain")
    rng = random.Random(seed)
    lo, hi = int(chain.target.scale_min), int(chain.target.scale_max)
    return AspectScoreSet({name: float(rng.randint(lo, hi)) for name in chain.names})


def instance_seed(seed: int, instance_id: str) -> int:
    """Per-instance seed so random knowledge differs across instances."""
    digest = hashlib.sha256(f"{seed}:{instance_id}".encode()).hexdigest()
    return int(digest[:16], 16)


def inter_knowledge(instance: EvaluationInstance, dataset: Dataset, target: str) -> ChainKnowledge:
    """Knowledge from the dataset's other human-annotated aspects, rescaled to [1, 5]."""
    entries = []
    for decl in dataset.manifest.aspects:
        if decl.name == target or decl.name not in instance.human_scores:
            continue
        spec = aspect_spec(dataset.task, decl.name, decl)
        value = decl.rescale(instance.human_mean(decl.name))
        name = spec.label.lower()
        entries.append(KnowledgeEntry(name, f"human-annotated {name} quality", value))
    if not entries:
        raise EmptyKnowledgeError(f"dataset {dataset.id} has no aspects besides {target!r}")
    return ChainKnowledge(tuple(entries))


def _knowledge_chain(aspect: AspectSpec, knowledge: ChainKnowledge) -> AspectChain:
    return AspectChain(aspect, tuple(Aspect(e.name, e.description) for e in knowledge.entries))


def coascore(
    instance: EvaluationInstance,
    aspect: AspectSpec,
    knowledge: ChainKnowledge,
    client: JudgeClient,
    variant: str = "full",
    *,
    seed: int | None = None,
    metric_name: str = "coascore",
    template: PromptTemplate | None = None,
) -> MetricScore:
    """Stage 3 (or its ablated replacement) for one instance."""
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown variant {variant!r}")
    if not knowledge.entries:
        raise EmptyKnowledgeError("stage 3 needs nonempty knowledge")
    diagnostics: dict = {"knowledge": len(knowledge)}

    if variant == "average":
        value = sum(knowledge.scores) / len(knowledge)
        return MetricScore(instance.id, metric_name, aspect.name, value, Provenance.LLM, diagnostics)

    if variant == "random":
        if seed is None:
            raise InvalidInputError("the random variant needs a seed")
        random_scores = randomize_scores(_knowledge_chain(aspect, knowledge), seed)
        knowledge = knowledge.with_scores(random_scores.scores)
        diagnostics["random_scores"] = list(knowledge.scores)

    prompt = render_coa_prompt(aspect, instance, knowledge, template, show_scores=variant != "without_scores")
    scale = (aspect.scale_min, aspect.scale_max)
    try:
        value, text, queries = client.ask_parsed(
            prompt.text, _tag(Stage.COA_SCORE, instance.id), lambda t: parse_scalar_score(t, scale)
        )
    except ParseFailure as exc:
        raise InstanceFailure(f"chain-of-aspects scoring: {exc}") from exc
    diagnostics |= {"queries": queries, "raw": text[:200]}
    return MetricScore(instance.id, metric_name, aspect.name, value, Provenance.LLM, diagnostics)


# --------------------------------------------------------------------------
# Dataset level

StageTwo = Mapping[str, AspectScoreSet | str]


def _map_instances(fn: Callable[[EvaluationInstance], object], dataset: Dataset, workers: int) -> list:
    if workers <= 1:
        return [fn(inst) for inst in dataset.instances]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, dataset.instances))


def _failure(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def run_stage_two(
    dataset: Dataset, chain: AspectChain, client: JudgeClient, *, workers: int | None = None
) -> dict[str, AspectScoreSet | str]:
    """Stage-2 score sets keyed by instance id; failed instances map to a reason string."""

    def one(inst: EvaluationInstance) -> AspectScoreSet | str:
        try:
            return score_relevant_aspects(chain, inst, client)
        except (InstanceFailure, LLMError) as exc:
            return _failure(exc)

    results = _map_instances(one, dataset, workers or client.max_concurrency)
    return {inst.id: res for inst, res in zip(dataset.instances, results)}


def evaluate_dataset(
    dataset: Dataset,
    config: PipelineConfig,
    client: JudgeClient,
    *,
    workers: int | None = None,
    chain: AspectChain | None = None,
    stage_two: StageTwo | None = None,
) -> ScoreTable:
    """Score every instance; per-instance failures become exclusions.

    ``chain`` and ``stage_two`` may be passed in to share them across
    variants. Output order and content do not depend on ``workers``.
    """
    aspect = config.aspect
    workers = workers or client.max_concurrency
    table = ScoreTable(dataset.id, config.metric_name, aspect.name)
    lacking = [i.id for i in dataset.instances if aspect.name not in i.human_scores]
    if lacking:
        msg = f"{len(lacking)} instances lack human scores for {aspect.name!r}"
        log.warning(msg)
        table.warnings.append(msg)

    if config.variant != "inter" and chain is None and config.reuse_chain_per_dataset:
        chain = generate_relevant_aspects(aspect, dataset.task, config.m, client)
    table.chain = chain
    if chain is not None:
        table.warnings.extend(chain.warnings)

    def one(inst: EvaluationInstance) -> tuple[MetricScore | None, str | None, str | None]:
        warning = None
        try:
            if config.variant == "inter":
                knowledge = inter_knowledge(inst, dataset, aspect.name)
            else:
                inst_chain = chain or generate_relevant_aspects(aspect, dataset.task, config.m, client)
                scores = stage_two.get(inst.id) if stage_two is not None else None
                if scores is None:
                    scores = score_relevant_aspects(inst_chain, inst, client)
                elif isinstance(scores, str):
                    return None, scores, None
                try:
                    knowledge = assemble_knowledge(inst_chain, scores)
                except EmptyKnowledgeError:
                    warning = f"{inst.id}: no scored aspects, fell back to llmscore"
                    score = llmscore(inst, aspect, client, metric_name=config.metric_name)
                    return score, None, warning
            seed = instance_seed(config.seed, inst.id) if config.variant == "random" else None
            score = coascore(inst, aspect, knowledge, client, config.variant,
                             seed=seed, metric_name=config.metric_name)
            return score, None, warning
        except (InstanceFailure, LLMError, EmptyKnowledgeError) as exc:
            return None, _failure(exc), warning

    for inst, (score, reason, warning) in zip(dataset.instances, _map_instances(one, dataset, workers)):
        if warning:
            table.warnings.append(warning)
        if score is not None:
            table.rows[inst.id] = score
        else:
            table.exclusions.append((inst.id, reason))
    if table.exclusions:
        log.warning("%s: %d of %d instances excluded", config.metric_name, len(table.exclusions), len(dataset))
    return table
