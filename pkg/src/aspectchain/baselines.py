"""Reference-based rule metrics, single-prompt LLM judges, and score ingestion.

All rule metrics share :func:`tokenize`: lowercase, whitespace split, with
leading/trailing punctuation stripped from each token.
"""

from __future__ import annotations

import csv
import math
import string
from collections import Counter
from collections.abc import Sequence
from pathlib import Path

from .datasets import Dataset
from .errors import (
    DatasetError,
    InstanceFailure,
    InvalidInputError,
    ParseFailure,
    RenderError,
)
from .llm import JudgeClient
from .model import (
    AspectSpec,
    EvaluationInstance,
    MetricScore,
    Provenance,
    ScoreTable,
    Stage,
)
from .prompts import (
    parse_scalar_score,
    render_cot_followup,
    render_cot_prompt,
    render_llmscore_prompt,
)

_PUNCT = string.punctuation + "“”‘’«»…"


def tokenize(text: str) -> list[str]:
    tokens = (tok.strip(_PUNCT) for tok in text.lower().split())
    return [t for t in tokens if t]


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypothesis: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 4) -> float:
    """Sentence BLEU with add-one smoothing on the n >= 2 precisions."""
    refs = [list(r) for r in references if r]
    if not refs:
        raise InvalidInputError("bleu needs at least one nonempty reference")
    hyp = list(hypothesis)
    if not hyp:
        return 0.0
    log_total = 0.0
    for n in range(1, max_n + 1):
        counts = ngrams(hyp, n)
        max_ref: Counter = Counter()
        for ref in refs:
            max_ref |= ngrams(ref, n)
        matched = sum(min(c, max_ref[g]) for g, c in counts.items())
        total = max(len(hyp) - n + 1, 0)
        if n == 1:
            if matched == 0:
                return 0.0
            p = matched / total
        else:
            p = (matched + 1) / (total + 1)
        log_total += math.log(p)
    c = len(hyp)
    r = min((abs(len(ref) - c), len(ref)) for ref in refs)[1]
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return bp * math.exp(log_total / max_n)


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge(hypothesis: Sequence[str], reference: Sequence[str], variant: str = "rougeL") -> float:
    """F1 of ROUGE-1, ROUGE-2 or ROUGE-L."""
    if not reference:
        raise InvalidInputError("rouge needs a nonempty reference")
    if not hypothesis:
        return 0.0
    if variant == "rougeL":
        overlap = lcs_length(hypothesis, reference)
        return _f1(overlap / len(hypothesis), overlap / len(reference))
    if variant not in ("rouge1", "rouge2"):
        raise InvalidInputError(f"unknown rouge variant {variant!r}")
    n = int(variant[-1])
    h, r = ngrams(hypothesis, n), ngrams(reference, n)
    h_total, r_total = sum(h.values()), sum(r.values())
    if h_total == 0 or r_total == 0:
        return 0.0
    overlap = sum((h & r).values())
    return _f1(overlap / h_total, overlap / r_total)


_SUFFIXES = ("ingly", "edly", "ness", "ment", "ing", "ies", "ied", "ly", "ed", "es", "s")


def stem(token: str) -> str:
    """Fixed suffix stripper; keeps at least three characters of stem."""
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            base = token[: -len(suffix)]
            return base + "y" if suffix in ("ies", "ied") else base
    return token


def _align(hyp: Sequence[str], ref: Sequence[str]) -> dict[int, int]:
    """Hypothesis index -> reference index, exact matches first, then stems."""
    alignment: dict[int, int] = {}
    used: set[int] = set()
    for key in (lambda t: t, stem):
        ref_keys = [key(t) for t in ref]
        for i, tok in enumerate(hyp):
            if i in alignment:
                continue
            k = key(tok)
            candidates = [j for j, rk in enumerate(ref_keys) if rk == k and j not in used]
            if not candidates:
                continue
            # prefer extending the chunk the previous token belongs to
            follow = alignment.get(i - 1, -2) + 1
            j = follow if follow in candidates else candidates[0]
            alignment[i] = j
            used.add(j)
    return alignment


def meteor_lite(hypothesis: Sequence[str], reference: Sequence[str]) -> float:
    """Unigram METEOR without synonym matching."""
    if not reference:
        raise InvalidInputError("meteor_lite needs a nonempty reference")
    alignment = _align(hypothesis, reference)
    m = len(alignment)
    if m == 0:
        return 0.0
    precision, recall = m / len(hypothesis), m / len(reference)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    chunks = 0
    prev_i, prev_j = None, None
    for i in sorted(alignment):
        j = alignment[i]
        if prev_i is None or i != prev_i + 1 or j != prev_j + 1:
            chunks += 1
        prev_i, prev_j = i, j
    penalty = 0.5 * (chunks / m) ** 3
    return fmean * (1 - penalty)


RULE_METRICS = ("bleu", "rouge1", "rouge2", "rougeL", "meteor_lite")


def rule_score(metric: str, hypothesis: str, references: Sequence[str]) -> float:
    hyp = tokenize(hypothesis)
    refs = [tokenize(r) for r in references]
    refs = [r for r in refs if r]
    if not refs:
        raise InvalidInputError("no nonempty reference")
    if metric == "bleu":
        return bleu(hyp, refs)
    if metric.startswith("rouge"):
        return max(rouge(hyp, r, metric) for r in refs)
    if metric == "meteor_lite":
        return max(meteor_lite(hyp, r) for r in refs)
    raise InvalidInputError(f"unknown rule metric {metric!r}")


def rule_metric_table(dataset: Dataset, metric: str, aspect: str) -> ScoreTable:
    table = ScoreTable(dataset.id, metric, aspect)
    for inst in dataset.instances:
        try:
            value = rule_score(metric, inst.hypothesis, inst.references)
        except InvalidInputError as exc:
            table.exclusions.append((inst.id, str(exc)))
            continue
        table.rows[inst.id] = MetricScore(inst.id, metric, aspect, value, Provenance.RULE)
    return table


# --------------------------------------------------------------------------
# Single-prompt LLM judges


def llmscore(
    instance: EvaluationInstance, aspect: AspectSpec, client: JudgeClient, *, metric_name: str = "llmscore"
) -> MetricScore:
    """One prompt, one judge call, one scalar."""
    prompt = render_llmscore_prompt(aspect, instance)
    scale = (aspect.scale_min, aspect.scale_max)
    try:
        value, text, queries = client.ask_parsed(
            prompt.text, f"{Stage.LLMSCORE.value}:{instance.id}", lambda t: parse_scalar_score(t, scale)
        )
    except ParseFailure as exc:
        raise InstanceFailure(f"llmscore: {exc}") from exc
    return MetricScore(instance.id, metric_name, aspect.name, value, Provenance.LLM,
                       {"queries": queries, "raw": text[:200]})


def llmscore_cot(
    instance: EvaluationInstance, aspect: AspectSpec, client: JudgeClient, *, metric_name: str = "llmscore_cot"
) -> MetricScore:
    """Two-turn chain of thought: elicit reasoning, then the number.

    The turns are tagged ``llmscore_cot:<id>:reason`` and ``llmscore_cot:<id>:score``
    so scripted rules can answer them differently.
    """
    first = render_cot_prompt(aspect, instance)
    tag = f"{Stage.LLMSCORE_COT.value}:{instance.id}"

    def followup(reasoning: str):
        try:
            return render_cot_followup(first, reasoning, aspect)
        except RenderError as exc:
            raise ParseFailure(str(exc)) from exc

    try:
        second, reasoning, q1 = client.ask_parsed(first.text, f"{tag}:reason", followup)
        value, text, q2 = client.ask_parsed(
            second.text, f"{tag}:score", lambda t: parse_scalar_score(t, (aspect.scale_min, aspect.scale_max))
        )
    except ParseFailure as exc:
        raise InstanceFailure(f"llmscore_cot: {exc}") from exc
    return MetricScore(instance.id, metric_name, aspect.name, value, Provenance.LLM,
                       {"queries": q1 + q2, "raw": text[:200]})


def ingest_external_scores(path: str | Path, metric_name: str, dataset: Dataset, aspect: str) -> ScoreTable:
    """Read a precomputed ``instance_id,value`` file into a score table."""
    path = Path(path)
    known = {inst.id for inst in dataset.instances}
    table = ScoreTable(dataset.id, metric_name, aspect)
    bad_lines, unknown, seen = [], [], set()
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["instance_id", "value"]:
            raise DatasetError(f"{path}: header must be 'instance_id,value'")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            try:
                ident, value = row[0].strip(), float(row[1])
            except (IndexError, ValueError):
                bad_lines.append(lineno)
                continue
            if ident in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate instance id {ident!r}")
            seen.add(ident)
            if ident not in known:
                unknown.append(ident)
                continue
            table.rows[ident] = MetricScore(ident, metric_name, aspect, value, Provenance.INGESTED)
    if bad_lines:
        raise DatasetError(f"{path}: malformed rows at lines {bad_lines}")
    if unknown:
        raise DatasetError(f"{path}: ids not in dataset {dataset.id}: {unknown}")
    return table
