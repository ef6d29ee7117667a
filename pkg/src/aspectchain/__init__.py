"""Aspect-aware LLM evaluation of generated text via chains of related aspects."""

__version__ = "0.1.0"

from .correlation import (
    CorrelationReport,
    dataset_level_correlations,
    kendall_tau_b,
    pearson,
    spearman,
)
from .datasets import Dataset, DatasetManifest, load_dataset
from .errors import AspectChainError
from .llm import BackendConfig, JudgeClient, ReplayBackend, ScriptedBackend
from .model import (
    Aspect,
    AspectChain,
    AspectScoreSet,
    AspectSpec,
    ChainKnowledge,
    EvaluationInstance,
    KnowledgeEntry,
    MetricScore,
    ScoreTable,
)
from .pipeline import (
    PipelineConfig,
    coascore,
    evaluate_dataset,
    generate_relevant_aspects,
)

__all__ = [
    "Aspect",
    "AspectChain",
    "AspectChainError",
    "AspectScoreSet",
    "AspectSpec",
    "BackendConfig",
    "ChainKnowledge",
    "CorrelationReport",
    "Dataset",
    "DatasetManifest",
    "EvaluationInstance",
    "JudgeClient",
    "KnowledgeEntry",
    "MetricScore",
    "PipelineConfig",
    "ReplayBackend",
    "ScoreTable",
    "ScriptedBackend",
    "coascore",
    "dataset_level_correlations",
    "evaluate_dataset",
    "generate_relevant_aspects",
    "kendall_tau_b",
    "load_dataset",
    "pearson",
    "spearman",
]
