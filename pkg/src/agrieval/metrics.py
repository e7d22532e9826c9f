"""WER, CER, MER and agriculture-weighted WER over alignment results.

Per-recording metrics come from one word alignment and one character
alignment; corpus-level numbers are micro-averages (summed error counts over
summed reference lengths, and summed weight masses for the weighted rate).
Weights never influence the alignment itself: they are applied to the
finished path, so the weighted and unweighted metrics share one error set.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .alignment import AlignmentCounts, Step, StepKind, align
from .corpus import Recording
from .diarization import SpeakerSelection, select_speaker
from .lexicon import Lexicon, empty_lexicon
from .textnorm import CharMode, DEFAULT_POLICY, NormalizationPolicy, normalize, segment_chars, tokenize_words


class MetricError(Exception):
    pass


class EmptyReference(MetricError):
    def __init__(self, recording_id: str | None = None):
        detail = f" for recording {recording_id!r}" if recording_id else ""
        super().__init__(f"reference is empty{detail}; metric undefined")
        self.recording_id = recording_id


class EmptyPair(MetricError):
    def __init__(self) -> None:
        super().__init__("both reference and hypothesis are empty; metric undefined")


class ModelMissing(MetricError):
    def __init__(self, recording_id: str, model: str):
        super().__init__(f"recording {recording_id!r} has no hypothesis for model {model!r}")
        self.recording_id = recording_id
        self.model = model


@dataclass(frozen=True)
class MetricReport:
    """Metric values for one (recording, model) pair or one corpus slice."""

    label: str
    model: str
    wer: float
    cer: float
    mer: float
    awwer: float
    counts: AlignmentCounts
    char_counts: AlignmentCounts
    weighted_error_mass: int
    reference_weight_mass: int
    exclusions: int = 0
    fallbacks: int = 0
    n_recordings: int = 1

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "model": self.model,
            "wer": self.wer,
            "cer": self.cer,
            "mer": self.mer,
            "awwer": self.awwer,
            "counts": _counts_dict(self.counts),
            "char_counts": _counts_dict(self.char_counts),
            "weighted_error_mass": self.weighted_error_mass,
            "reference_weight_mass": self.reference_weight_mass,
            "exclusions": self.exclusions,
            "fallbacks": self.fallbacks,
            "n_recordings": self.n_recordings,
        }


def _counts_dict(c: AlignmentCounts) -> dict:
    return {
        "substitutions": c.substitutions,
        "deletions": c.deletions,
        "insertions": c.insertions,
        "hits": c.hits,
    }


def counts_from_dict(d: dict) -> AlignmentCounts:
    return AlignmentCounts(
        substitutions=d["substitutions"],
        deletions=d["deletions"],
        insertions=d["insertions"],
        hits=d["hits"],
    )


def report_from_dict(d: dict) -> MetricReport:
    return MetricReport(
        label=d["label"],
        model=d["model"],
        wer=d["wer"],
        cer=d["cer"],
        mer=d["mer"],
        awwer=d["awwer"],
        counts=counts_from_dict(d["counts"]),
        char_counts=counts_from_dict(d["char_counts"]),
        weighted_error_mass=d["weighted_error_mass"],
        reference_weight_mass=d["reference_weight_mass"],
        exclusions=d.get("exclusions", 0),
        fallbacks=d.get("fallbacks", 0),
        n_recordings=d.get("n_recordings", 1),
    )


def wer(counts: AlignmentCounts) -> float:
    """(S + D + I) / N; may exceed 1 when insertions dominate."""
    n = counts.reference_length
    if n == 0:
        raise EmptyReference()
    return counts.errors / n


def cer(char_counts: AlignmentCounts) -> float:
    """Word-rate formula applied to character-unit counts."""
    c = char_counts.reference_length
    if c == 0:
        raise EmptyReference()
    return char_counts.errors / c


def mer(counts: AlignmentCounts) -> float:
    """(S + D + I) / (S + D + I + H); bounded in [0, 1]."""
    denom = counts.errors + counts.hits
    if denom == 0:
        raise EmptyPair()
    return counts.errors / denom


def weighted_masses(
    path: list[Step],
    ref_tokens: list[str],
    hyp_tokens: list[str],
    lexicon: Lexicon,
    include_insertions: bool = True,
) -> tuple[int, int]:
    """Weight mass of the path's errors and of the whole reference.

    Substitutions and deletions carry the reference token's weight;
    insertions carry the inserted hypothesis token's weight (a hallucinated
    domain term is penalized like a lost one). ``include_insertions=False``
    drops the insertion term for sensitivity probing.
    """
    error_mass = 0
    for step in path:
        if step.kind in (StepKind.SUBSTITUTE, StepKind.DELETE):
            error_mass += lexicon.weight_of(ref_tokens[step.ref_idx])
        elif step.kind is StepKind.INSERT and include_insertions:
            error_mass += lexicon.weight_of(hyp_tokens[step.hyp_idx])
    reference_mass = sum(lexicon.weight_of(tok) for tok in ref_tokens)
    return error_mass, reference_mass


def awwer(
    path: list[Step],
    ref_tokens: list[str],
    hyp_tokens: list[str],
    lexicon: Lexicon,
    include_insertions: bool = True,
) -> float:
    """Weighted error mass over reference weight mass.

    Degenerates to plain WER (bit-for-bit) when every weight is 1.
    """
    if not ref_tokens:
        raise EmptyReference()
    error_mass, reference_mass = weighted_masses(
        path, ref_tokens, hyp_tokens, lexicon, include_insertions
    )
    return error_mass / reference_mass


@dataclass(frozen=True)
class RecordingEvaluation:
    """One evaluated (recording, model) pair plus the artifacts behind it.

    Keeps the word path and token lists so confusion mining and error-impact
    analysis reuse the same alignment that produced the metrics.
    """

    report: MetricReport
    language: str
    word_path: list[Step]
    ref_tokens: list[str]
    hyp_tokens: list[str]
    fallback: bool


def evaluate_recording_detail(
    recording: Recording,
    model: str,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    char_mode: CharMode = CharMode.CODEPOINT,
    lexicon: Lexicon | None = None,
    speaker_selection: SpeakerSelection = SpeakerSelection.FULL,
    include_insertions: bool = True,
) -> RecordingEvaluation:
    """Evaluate one (recording, model) pair, returning metrics plus alignment."""
    if model not in recording.hypotheses:
        raise ModelMissing(recording.id, model)
    if lexicon is None:
        lexicon = empty_lexicon(recording.language)

    ref_norm = normalize(recording.reference_text, policy)
    if not ref_norm:
        raise EmptyReference(recording.id)

    selection = select_speaker(
        recording.hypotheses[model],
        tokenize_words(ref_norm),
        speaker_selection,
        policy=policy,
    )
    hyp_norm = normalize(selection.text, policy)

    ref_tokens = tokenize_words(ref_norm)
    hyp_tokens = tokenize_words(hyp_norm)
    word_counts, word_path = align(ref_tokens, hyp_tokens)
    char_counts, _ = align(segment_chars(ref_norm, char_mode), segment_chars(hyp_norm, char_mode))
    error_mass, reference_mass = weighted_masses(
        word_path, ref_tokens, hyp_tokens, lexicon, include_insertions
    )

    report = MetricReport(
        label=recording.id,
        model=model,
        wer=wer(word_counts),
        cer=cer(char_counts),
        mer=mer(word_counts),
        awwer=error_mass / reference_mass,
        counts=word_counts,
        char_counts=char_counts,
        weighted_error_mass=error_mass,
        reference_weight_mass=reference_mass,
        fallbacks=1 if selection.fallback else 0,
    )
    return RecordingEvaluation(
        report=report,
        language=recording.language,
        word_path=word_path,
        ref_tokens=ref_tokens,
        hyp_tokens=hyp_tokens,
        fallback=selection.fallback,
    )


def evaluate_recording(
    recording: Recording,
    model: str,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    char_mode: CharMode = CharMode.CODEPOINT,
    lexicon: Lexicon | None = None,
    speaker_selection: SpeakerSelection = SpeakerSelection.FULL,
    include_insertions: bool = True,
) -> MetricReport:
    return evaluate_recording_detail(
        recording, model, policy, char_mode, lexicon, speaker_selection, include_insertions
    ).report


def aggregate(reports: list[MetricReport], slice_label: str, exclusions: int = 0) -> MetricReport:
    """Micro-average a slice: summed counts and masses, then one division.

    All reports must belong to the same slice (language and model). Sums are
    integer-exact, so the result is independent of report order.
    """
    total = AlignmentCounts(
        substitutions=sum(r.counts.substitutions for r in reports),
        deletions=sum(r.counts.deletions for r in reports),
        insertions=sum(r.counts.insertions for r in reports),
        hits=sum(r.counts.hits for r in reports),
    )
    char_total = AlignmentCounts(
        substitutions=sum(r.char_counts.substitutions for r in reports),
        deletions=sum(r.char_counts.deletions for r in reports),
        insertions=sum(r.char_counts.insertions for r in reports),
        hits=sum(r.char_counts.hits for r in reports),
    )
    error_mass = sum(r.weighted_error_mass for r in reports)
    reference_mass = sum(r.reference_weight_mass for r in reports)
    n = total.reference_length
    c = char_total.reference_length
    word_total_units = total.errors + total.hits

    return MetricReport(
        label=slice_label,
        model=reports[0].model if reports else "",
        wer=total.errors / n if n else 0.0,
        cer=char_total.errors / c if c else 0.0,
        mer=total.errors / word_total_units if word_total_units else 0.0,
        awwer=error_mass / reference_mass if reference_mass else 0.0,
        counts=total,
        char_counts=char_total,
        weighted_error_mass=error_mass,
        reference_weight_mass=reference_mass,
        exclusions=exclusions,
        fallbacks=sum(r.fallbacks for r in reports),
        n_recordings=sum(r.n_recordings for r in reports),
    )


@dataclass(frozen=True)
class Exclusion:
    recording_id: str
    model: str
    reason: str


@dataclass
class CorpusEvaluation:
    """Id-sorted per-pair evaluations plus the pairs that could not be scored."""

    details: list[RecordingEvaluation] = field(default_factory=list)
    exclusions: list[Exclusion] = field(default_factory=list)


def evaluate_corpus(
    recordings: list[Recording],
    models: list[str] | None = None,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    char_mode: CharMode = CharMode.CODEPOINT,
    lexicons: dict[str, Lexicon] | None = None,
    speaker_selection: SpeakerSelection = SpeakerSelection.FULL,
    include_insertions: bool = True,
    workers: int = 1,
) -> CorpusEvaluation:
    """Evaluate every (recording, model) pair present in the corpus.

    The reduction is sorted by (recording id, model), so results are
    identical for any worker count. Pairs whose reference normalizes to
    empty are excluded and reported, not failed.
    """
    lexicons = lexicons or {}
    pairs: list[tuple[Recording, str]] = []
    for rec in sorted(recordings, key=lambda r: r.id):
        for model in sorted(rec.hypotheses):
            if models is None or model in models:
                pairs.append((rec, model))

    def run(pair: tuple[Recording, str]) -> RecordingEvaluation | Exclusion:
        rec, model = pair
        lexicon = lexicons.get(rec.language) or empty_lexicon(rec.language)
        try:
            return evaluate_recording_detail(
                rec, model, policy, char_mode, lexicon, speaker_selection, include_insertions
            )
        except EmptyReference:
            return Exclusion(rec.id, model, "empty_reference")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, pairs))
    else:
        outcomes = [run(p) for p in pairs]

    result = CorpusEvaluation()
    for outcome in outcomes:
        if isinstance(outcome, Exclusion):
            result.exclusions.append(outcome)
        else:
            result.details.append(outcome)
    return result
