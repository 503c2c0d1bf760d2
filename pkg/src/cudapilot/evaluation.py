"""Scoring and analytics: validity verdicts, the complexity-weighted
performance score, cumulative success curves, bottleneck migration counts
and per-metric improvement statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .profiling import CLASS_METRICS, BottleneckClass, FilteredProfile
from .toolchain import Outcome, SizeResult


class EvaluationError(Exception):
    pass


class EmptyResults(EvaluationError):
    def __init__(self):
        super().__init__("no size results to score")


class NonPositiveWeight(EvaluationError):
    def __init__(self, label: str):
        super().__init__(f"size {label!r} has non-positive weight")


class EmptyScores(EvaluationError):
    def __init__(self):
        super().__init__("no scores to aggregate")


class NoRuns(EvaluationError):
    def __init__(self, run_dir):
        super().__init__(f"no completed task runs found under {run_dir}")


@dataclass(frozen=True)
class Score:
    P: float
    valid: bool
    per_size: tuple[SizeResult, ...]


@dataclass(frozen=True)
class SuccessCurve:
    taus: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        if len(self.taus) != len(self.rates):
            raise EvaluationError("taus and rates must have equal length")
        for a, b in zip(self.rates, self.rates[1:]):
            if b > a:
                raise EvaluationError("success rates must be non-increasing")


CLASS_ORDER = (
    BottleneckClass.COMPUTE,
    BottleneckClass.MEMORY_LATENCY,
    BottleneckClass.MEMORY_BANDWIDTH,
)


@dataclass(frozen=True)
class MigrationMatrix:
    """3x3 transition counts indexed (before class, after class) in
    CLASS_ORDER."""

    counts: tuple[tuple[int, int, int], ...]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def row_sums(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.counts)

    def column_sums(self) -> tuple[int, ...]:
        return tuple(sum(row[j] for row in self.counts) for j in range(3))

    def to_dict(self) -> dict:
        labels = [c.name for c in CLASS_ORDER]
        return {
            "order": labels,
            "counts": [list(row) for row in self.counts],
        }


def check_valid(outcome: Outcome, expected_labels: Sequence[str]) -> bool:
    """A candidate is valid iff it compiled, ran, produced correct results,
    and reported a block for every manifest size."""
    if not (outcome.compiled and outcome.ran and outcome.correct):
        return False
    seen = {r.size_label for r in outcome.size_results}
    return all(label in seen for label in expected_labels)


def weighted_score(size_results: Sequence[SizeResult]) -> float:
    """Average speedup weighted by each size's baseline operation count."""
    if not size_results:
        raise EmptyResults()
    num = 0.0
    den = 0.0
    for r in size_results:
        if r.complexity <= 0:
            raise NonPositiveWeight(r.size_label)
        num += r.complexity * r.speedup
        den += r.complexity
    return num / den


def cumulative_success(scores: Sequence[Score], taus: Sequence[float]) -> SuccessCurve:
    """Fraction of tasks whose score strictly exceeds each threshold.

    Invalid tasks stay in the denominator and never count as successes, so
    the rate at tau=0 is the functional-correctness rate.
    """
    if not scores:
        raise EmptyScores()
    taus = tuple(float(t) for t in taus)
    for a, b in zip(taus, taus[1:]):
        if b < a:
            raise EvaluationError("taus must be ascending")
    total = len(scores)
    rates = tuple(
        sum(1 for s in scores if s.valid and s.P > tau) / total for tau in taus
    )
    return SuccessCurve(taus=taus, rates=rates)


def migration_matrix(
    pairs: Sequence[tuple[BottleneckClass, BottleneckClass]],
) -> MigrationMatrix:
    """Count bottleneck-class transitions from baseline to optimized."""
    index = {cls: i for i, cls in enumerate(CLASS_ORDER)}
    counts = [[0, 0, 0] for _ in range(3)]
    for before, after in pairs:
        counts[index[before]][index[after]] += 1
    return MigrationMatrix(counts=tuple(tuple(row) for row in counts))


@dataclass(frozen=True)
class MetricImprovement:
    metric: str
    mean_pct: float | None
    std_pct: float | None
    pairs: int
    excluded: int


def metric_improvements(
    before: Sequence[FilteredProfile],
    after: Sequence[FilteredProfile],
    bottleneck: BottleneckClass,
) -> list[MetricImprovement]:
    """Per-metric relative change statistics over task pairs of one class.

    For each metric in the class's kept set, improvement is
    100*(after-before)/before over pairs carrying the metric on both sides
    with before > 0; other pairs are excluded and counted.  Reports the
    sample mean and (n-1) standard deviation (0 for a single pair).
    """
    if len(before) != len(after):
        raise EvaluationError("before/after profile lists must pair up")
    stats: list[MetricImprovement] = []
    for metric in CLASS_METRICS[bottleneck]:
        deltas: list[float] = []
        excluded = 0
        for b, a in zip(before, after):
            vb = b.kept_metrics.get(metric)
            va = a.kept_metrics.get(metric)
            if vb is None or va is None or vb <= 0:
                excluded += 1
                continue
            deltas.append(100.0 * (va - vb) / vb)
        if not deltas:
            stats.append(MetricImprovement(metric, None, None, 0, excluded))
            continue
        mean = sum(deltas) / len(deltas)
        if len(deltas) > 1:
            var = sum((d - mean) ** 2 for d in deltas) / (len(deltas) - 1)
            std = math.sqrt(var)
        else:
            std = 0.0
        stats.append(MetricImprovement(metric, mean, std, len(deltas), excluded))
    return stats
