"""Dataset-level correlation between metric scores and human judgments.

Coefficients come back as ``None`` when undefined (constant series), never
as 0.0, since zero is a legitimate correlation.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset
from .errors import InvalidInputError


def _check(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    if len(x) != len(y):
        raise InvalidInputError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise InvalidInputError("need at least two pairs")
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        return None
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Sample Pearson product-moment correlation."""
    return _pearson(*_check(x, y))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    a = np.asarray(values, dtype=float)
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, sorted_a[1:] != sorted_a[:-1]])
    ends = np.r_[starts[1:], len(a)]
    ranks = np.empty(len(a))
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson correlation of the average-rank transforms."""
    xa, ya = _check(x, y)
    return _pearson(average_ranks(xa), average_ranks(ya))


def pair_counts(x: Sequence[float], y: Sequence[float]) -> tuple[int, int, int, int]:
    """Concordant, discordant, tied-only-in-x and tied-only-in-y pair counts."""
    xa, ya = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    sx = np.sign(xa[:, None] - xa[None, :])
    sy = np.sign(ya[:, None] - ya[None, :])
    upper = np.triu(np.ones((len(xa), len(xa)), dtype=bool), k=1)
    prod = (sx * sy)[upper]
    sx, sy = sx[upper], sy[upper]
    concordant = int(np.count_nonzero(prod > 0))
    discordant = int(np.count_nonzero(prod < 0))
    tx = int(np.count_nonzero((sx == 0) & (sy != 0)))
    ty = int(np.count_nonzero((sy == 0) & (sx != 0)))
    return concordant, discordant, tx, ty


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Kendall's tau-b, corrected for ties in both series."""
    xa, ya = _check(x, y)
    c, d, tx, ty = pair_counts(xa, ya)
    denom = (c + d + tx) * (c + d + ty)
    if denom == 0:
        return None
    return (c - d) / math.sqrt(denom)


@dataclass(frozen=True)
class PairedSeries:
    instance_ids: tuple[str, ...]
    metric_values: tuple[float, ...]
    human_values: tuple[float, ...]

    def __post_init__(self) -> None:
        n = len(self.instance_ids)
        if not (n == len(self.metric_values) == len(self.human_values)):
            raise InvalidInputError("paired series lengths differ")
        if len(set(self.instance_ids)) != n:
            raise InvalidInputError("duplicate instance ids in paired series")


@dataclass(frozen=True)
class CorrelationRow:
    metric_name: str
    aspect_name: str
    pearson: float | None
    spearman: float | None
    kendall: float | None
    n_pairs: int
    n_excluded: int
    reason: str = ""


@dataclass
class CorrelationReport:
    dataset_id: str
    rows: list[CorrelationRow] = field(default_factory=list)

    def row(self, metric_name: str, aspect_name: str | None = None) -> CorrelationRow:
        for r in self.rows:
            if r.metric_name == metric_name and (aspect_name is None or r.aspect_name == aspect_name):
                return r
        raise KeyError(metric_name)


def pair_scores(table, dataset: Dataset, aspect: str | None = None) -> PairedSeries:
    """Align a score table with mean human scores, in dataset order."""
    aspect = aspect or table.aspect_name
    ids, metric, human = [], [], []
    for inst in dataset.instances:
        score = table.rows.get(inst.id)
        if score is None or aspect not in inst.human_scores:
            continue
        ids.append(inst.id)
        metric.append(float(score.value))
        human.append(inst.human_mean(aspect))
    return PairedSeries(tuple(ids), tuple(metric), tuple(human))


def correlate_series(series: PairedSeries, metric_name: str, aspect_name: str, n_excluded: int) -> CorrelationRow:
    n = len(series.instance_ids)
    if n < 2:
        return CorrelationRow(metric_name, aspect_name, None, None, None, n, n_excluded, "fewer than 2 pairs")
    x, y = series.metric_values, series.human_values
    p, s, k = pearson(x, y), spearman(x, y), kendall_tau_b(x, y)
    reason = "zero variance" if None in (p, s, k) else ""
    return CorrelationRow(metric_name, aspect_name, p, s, k, n, n_excluded, reason)


def dataset_level_correlations(
    score_tables: Iterable, dataset: Dataset, aspects: Iterable[str] | None = None
) -> CorrelationReport:
    """One row per score table: all outputs pooled, excluded instances dropped per metric."""
    wanted = set(aspects) if aspects is not None else None
    report = CorrelationReport(dataset.id)
    for table in score_tables:
        if table.dataset_id != dataset.id:
            raise InvalidInputError(f"score table for {table.dataset_id!r} paired with dataset {dataset.id!r}")
        if wanted is not None and table.aspect_name not in wanted:
            continue
        series = pair_scores(table, dataset)
        n_excluded = len(dataset) - len(series.instance_ids)
        report.rows.append(correlate_series(series, table.metric_name, table.aspect_name, n_excluded))
    return report
