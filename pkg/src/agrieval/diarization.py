"""Best-speaker selection over diarized hypotheses and its impact statistics.

Oracle selection uses the reference transcript and is therefore an
evaluation-time procedure only: it answers "how good could this model be with
perfect speaker picking", which is not available at inference time. The
dominant-speaker heuristic is the reference-free alternative.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .alignment import align
from .corpus import Hypothesis, Recording
from .lexicon import Lexicon
from .textnorm import DEFAULT_POLICY, NormalizationPolicy, normalize, tokenize_words


class NoSegments(Exception):
    def __init__(self) -> None:
        super().__init__("hypothesis carries no speaker segments")


class UndefinedImprovement(Exception):
    def __init__(self) -> None:
        super().__init__("improvement undefined: full-transcript WER is 0")


class SpeakerSelection(enum.Enum):
    FULL = "full"
    ORACLE_BEST = "oracle_best"
    DOMINANT = "dominant"


@dataclass(frozen=True)
class Selection:
    """Chosen hypothesis text; ``fallback`` marks a segment-less fallback."""

    text: str
    speaker: str | None
    fallback: bool


@dataclass(frozen=True)
class DiarizationStats:
    model: str
    language: str
    avg_speakers: float | None
    multi_speaker_pct: float | None
    full_wer: float
    bs_wer: float
    improvement_pct: float | None
    n_with_segments: int


def speaker_texts(hypothesis: Hypothesis) -> dict[str, str]:
    """Concatenate each speaker's segment texts in segment order.

    Raises:
        NoSegments: the hypothesis has no segments.
    """
    if not hypothesis.segments:
        raise NoSegments()
    texts: dict[str, list[str]] = {}
    for segment in hypothesis.segments:
        texts.setdefault(segment.speaker, []).append(segment.text)
    return {speaker: " ".join(parts) for speaker, parts in texts.items()}


def select_speaker(
    hypothesis: Hypothesis,
    reference_tokens: list[str],
    mode: SpeakerSelection,
    policy: NormalizationPolicy = DEFAULT_POLICY,
) -> Selection:
    """Pick the hypothesis text to score under the given selection mode.

    oracle_best minimizes edit errors of the speaker's normalized text
    against the reference (equivalent to minimizing WER, since the reference
    is fixed); ties go to the speaker with fewer tokens, then the
    lexicographically smaller label. dominant picks the most-token speaker,
    ties to the smaller label. Without segments, non-full modes fall back to
    the full transcript and flag it.
    """
    if mode is SpeakerSelection.FULL:
        return Selection(text=hypothesis.full_text, speaker=None, fallback=False)
    if not hypothesis.segments:
        return Selection(text=hypothesis.full_text, speaker=None, fallback=True)

    candidates = []
    for speaker, text in speaker_texts(hypothesis).items():
        tokens = tokenize_words(normalize(text, policy))
        candidates.append((speaker, text, tokens))

    if mode is SpeakerSelection.DOMINANT:
        speaker, text, _ = min(candidates, key=lambda c: (-len(c[2]), c[0]))
        return Selection(text=text, speaker=speaker, fallback=False)

    def oracle_key(candidate: tuple[str, str, list[str]]):
        speaker, _, tokens = candidate
        counts, _ = align(reference_tokens, tokens)
        return (counts.errors, len(tokens), speaker)

    speaker, text, _ = min(candidates, key=oracle_key)
    return Selection(text=text, speaker=speaker, fallback=False)


def improvement_pct(full_wer: float, bs_wer: float) -> float:
    """Relative WER reduction from best-speaker selection, in percent.

    Scale-invariant: accepts ratios or percent values. Negative when the
    best-speaker variant is worse.

    Raises:
        UndefinedImprovement: full-transcript WER is 0.
    """
    if full_wer == 0:
        raise UndefinedImprovement()
    return 100.0 * (full_wer - bs_wer) / full_wer


def distinct_speaker_count(hypothesis: Hypothesis) -> int:
    if not hypothesis.segments:
        return 0
    return len({segment.speaker for segment in hypothesis.segments})


def diarization_stats(
    recordings: list[Recording],
    model: str,
    language: str,
    lexicon: Lexicon | None = None,
    policy: NormalizationPolicy = DEFAULT_POLICY,
) -> DiarizationStats:
    """Full-transcript vs oracle-best-speaker corpus WER for one model.

    Speaker-count statistics cover only recordings where the model emitted
    segments; the two corpus WERs cover every recording the model
    transcribed, so the pair is comparable.
    """
    from . import metrics  # local import: metrics depends on this module

    subset = [r for r in recordings if r.language == language and model in r.hypotheses]
    speaker_counts = [
        distinct_speaker_count(r.hypotheses[model]) for r in subset if r.hypotheses[model].segments
    ]

    def corpus_wer(selection: SpeakerSelection) -> float:
        reports = []
        for rec in sorted(subset, key=lambda r: r.id):
            try:
                reports.append(
                    metrics.evaluate_recording(
                        rec, model, policy=policy, lexicon=lexicon, speaker_selection=selection
                    )
                )
            except metrics.EmptyReference:
                continue
        return metrics.aggregate(reports, slice_label=f"{language}/{model}").wer

    full_wer = corpus_wer(SpeakerSelection.FULL)
    bs_wer = corpus_wer(SpeakerSelection.ORACLE_BEST)
    try:
        improvement = improvement_pct(full_wer, bs_wer)
    except UndefinedImprovement:
        improvement = None

    n_seg = len(speaker_counts)
    return DiarizationStats(
        model=model,
        language=language,
        avg_speakers=sum(speaker_counts) / n_seg if n_seg else None,
        multi_speaker_pct=100.0 * sum(1 for c in speaker_counts if c >= 2) / n_seg if n_seg else None,
        full_wer=full_wer,
        bs_wer=bs_wer,
        improvement_pct=improvement,
        n_with_segments=n_seg,
    )
