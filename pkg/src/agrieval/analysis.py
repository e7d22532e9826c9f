"""Confusion-pair mining, weight-tier error decomposition and rank deltas."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .alignment import Step, StepKind
from .lexicon import DomainCategory, Lexicon
from .metrics import MetricReport

# (word path, reference tokens, hypothesis tokens) of one evaluated pair.
PathTriple = tuple[list[Step], list[str], list[str]]


@dataclass(frozen=True)
class ConfusionPair:
    """A reference->hypothesis substitution aggregated over a corpus slice.

    The category is the reference token's: the lost term defines which
    domain the error harms.
    """

    ref_term: str
    hyp_term: str
    count: int
    category: DomainCategory


@dataclass(frozen=True)
class ErrorImpact:
    """Share of error steps per weight tier (high = 3-4, medium = 2, low = 1)."""

    high_pct: float | None
    medium_pct: float | None
    low_pct: float | None
    total_errors: int


@dataclass(frozen=True)
class RankDelta:
    """WER-vs-AWWER comparison for one model within one language slice.

    Positive ``rank_delta`` means the model ranks better under the weighted
    metric than under plain WER.
    """

    model: str
    language: str
    wer: float
    awwer: float
    delta_pp: float
    wer_rank: int
    awwer_rank: int
    rank_delta: int


def mine_confusions(alignments: Iterable[PathTriple], lexicon: Lexicon) -> list[ConfusionPair]:
    """Aggregate substitution pairs, sorted by count desc then terms asc."""
    counts: dict[tuple[str, str], int] = {}
    for path, ref_tokens, hyp_tokens in alignments:
        for step in path:
            if step.kind is StepKind.SUBSTITUTE:
                key = (ref_tokens[step.ref_idx], hyp_tokens[step.hyp_idx])
                counts[key] = counts.get(key, 0) + 1
    pairs = [
        ConfusionPair(ref_term=ref, hyp_term=hyp, count=n, category=lexicon.category_of(ref))
        for (ref, hyp), n in counts.items()
    ]
    pairs.sort(key=lambda p: (-p.count, p.ref_term, p.hyp_term))
    return pairs


def error_impact(alignments: Iterable[PathTriple], lexicon: Lexicon) -> ErrorImpact:
    """Classify every error step by its weight tier.

    Steps are weighted exactly as in the weighted error rate: substitutions
    and deletions by the reference token, insertions by the inserted
    hypothesis token. Counts are over step occurrences, not unique terms.
    """
    tiers = {"high": 0, "medium": 0, "low": 0}
    for path, ref_tokens, hyp_tokens in alignments:
        for step in path:
            if step.kind in (StepKind.SUBSTITUTE, StepKind.DELETE):
                weight = lexicon.weight_of(ref_tokens[step.ref_idx])
            elif step.kind is StepKind.INSERT:
                weight = lexicon.weight_of(hyp_tokens[step.hyp_idx])
            else:
                continue
            if weight >= 3:
                tiers["high"] += 1
            elif weight == 2:
                tiers["medium"] += 1
            else:
                tiers["low"] += 1
    total = sum(tiers.values())
    if total == 0:
        return ErrorImpact(high_pct=None, medium_pct=None, low_pct=None, total_errors=0)
    return ErrorImpact(
        high_pct=round(100.0 * tiers["high"] / total, 1),
        medium_pct=round(100.0 * tiers["medium"] / total, 1),
        low_pct=round(100.0 * tiers["low"] / total, 1),
        total_errors=total,
    )


def rank_models(reports: list[MetricReport], metric: str = "wer") -> list[tuple[int, MetricReport]]:
    """Rank corpus reports ascending by a metric attribute.

    Competition ranking: tied values share the smaller ordinal; tied rows are
    ordered by model name. Ranks start at 1.
    """
    if not reports:
        raise ValueError("rank_models requires at least one report")
    values = {r.model: getattr(r, metric) for r in reports}
    ordered = sorted(reports, key=lambda r: (values[r.model], r.model))
    ranked = []
    for report in ordered:
        rank = 1 + sum(1 for v in values.values() if v < values[report.model])
        ranked.append((rank, report))
    return ranked


def awwer_delta(report: MetricReport) -> float:
    """AWWER minus WER in percentage points (metrics stored as ratios)."""
    return (report.awwer - report.wer) * 100.0


def rank_delta(wer_ranks: dict[str, int], awwer_ranks: dict[str, int], model: str) -> int:
    """WER rank minus AWWER rank; positive = better under the weighted metric."""
    return wer_ranks[model] - awwer_ranks[model]


def build_rank_deltas(
    reports: list[MetricReport], language: str, top_k: int = 3
) -> list[RankDelta]:
    """Top-k models by AWWER with their WER/AWWER ranks and deltas."""
    wer_ranks = {r.model: rank for rank, r in rank_models(reports, "wer")}
    awwer_ranked = rank_models(reports, "awwer")
    awwer_ranks = {r.model: rank for rank, r in awwer_ranked}
    rows = []
    for rank, report in awwer_ranked[:top_k]:
        rows.append(
            RankDelta(
                model=report.model,
                language=language,
                wer=report.wer,
                awwer=report.awwer,
                delta_pp=awwer_delta(report),
                wer_rank=wer_ranks[report.model],
                awwer_rank=rank,
                rank_delta=rank_delta(wer_ranks, awwer_ranks, report.model),
            )
        )
    return rows
