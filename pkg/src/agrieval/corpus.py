"""Evaluation manifest loading, validation and filtering.

A manifest is JSONL: one recording per line pairing a reference transcript
with per-model hypotheses and optional quality metadata. Loading is streaming
and strict (first error raises); ``validate_manifest`` collects every problem
for the ``validate`` CLI command instead. Audio paths are carried opaquely
and never opened.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .textnorm import DEFAULT_POLICY, normalize

logger = logging.getLogger(__name__)

SUPPORTED_LANGUAGES = frozenset({"hi", "te", "or"})
NOISE_LEVELS = ("low", "medium", "high")

_RECORD_FIELDS = {"id", "language", "reference", "noise_level", "audio_issues", "audio", "hypotheses"}
_HYPOTHESIS_FIELDS = {"text", "segments"}
_SEGMENT_FIELDS = {"speaker", "text", "start_s", "end_s"}


class ManifestError(Exception):
    pass


class MalformedLine(ManifestError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DuplicateId(ManifestError):
    def __init__(self, recording_id: str):
        super().__init__(f"duplicate recording id {recording_id!r}")
        self.recording_id = recording_id


class UnsupportedLanguage(ManifestError):
    def __init__(self, code: str):
        super().__init__(f"unsupported language code {code!r}")
        self.code = code


class MissingReference(ManifestError):
    def __init__(self, recording_id: str):
        super().__init__(f"recording {recording_id!r} has no usable reference text")
        self.recording_id = recording_id


@dataclass(frozen=True)
class SpeakerSegment:
    speaker: str
    text: str
    start_s: float | None = None
    end_s: float | None = None


@dataclass(frozen=True)
class Hypothesis:
    full_text: str
    segments: tuple[SpeakerSegment, ...] | None = None


@dataclass(frozen=True)
class Recording:
    id: str
    language: str
    reference_text: str
    hypotheses: dict[str, Hypothesis] = field(default_factory=dict)
    noise_level: str | None = None
    audio_issues: tuple[str, ...] | None = None
    audio_path: str | None = None


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding; ``severity`` is 'error' or 'warning'."""

    severity: str
    line_no: int | None
    message: str


def _parse_segment(obj: object, line_no: int, unknown: list[int]) -> SpeakerSegment:
    if not isinstance(obj, dict):
        raise MalformedLine(line_no, "segment must be an object")
    unknown[0] += len(set(obj) - _SEGMENT_FIELDS)
    speaker = obj.get("speaker")
    text = obj.get("text")
    if not isinstance(speaker, str) or not speaker:
        raise MalformedLine(line_no, "segment speaker must be a non-empty string")
    if not isinstance(text, str):
        raise MalformedLine(line_no, "segment text must be a string")
    start_s = obj.get("start_s")
    end_s = obj.get("end_s")
    for name, value in (("start_s", start_s), ("end_s", end_s)):
        if value is not None and not isinstance(value, (int, float)):
            raise MalformedLine(line_no, f"segment {name} must be a number")
    if start_s is not None and start_s < 0:
        raise MalformedLine(line_no, "segment start_s must be >= 0")
    if start_s is not None and end_s is not None and end_s < start_s:
        raise MalformedLine(line_no, "segment end_s must be >= start_s")
    return SpeakerSegment(
        speaker=speaker,
        text=text,
        start_s=None if start_s is None else float(start_s),
        end_s=None if end_s is None else float(end_s),
    )


def _parse_record(obj: object, line_no: int, unknown: list[int]) -> Recording:
    if not isinstance(obj, dict):
        raise MalformedLine(line_no, "record must be a JSON object")
    unknown[0] += len(set(obj) - _RECORD_FIELDS)

    rec_id = obj.get("id")
    if not isinstance(rec_id, str) or not rec_id:
        raise MalformedLine(line_no, "id must be a non-empty string")

    language = obj.get("language")
    if not isinstance(language, str):
        raise MalformedLine(line_no, "language must be a string")
    if language not in SUPPORTED_LANGUAGES:
        raise UnsupportedLanguage(language)

    reference = obj.get("reference")
    if not isinstance(reference, dict):
        raise MissingReference(rec_id)
    unknown[0] += len(set(reference) - {"text"})
    reference_text = reference.get("text")
    if not isinstance(reference_text, str) or not reference_text.strip():
        raise MissingReference(rec_id)

    noise_level = obj.get("noise_level")
    if noise_level is not None and noise_level not in NOISE_LEVELS:
        raise MalformedLine(line_no, f"noise_level must be one of {NOISE_LEVELS}")

    audio_issues = obj.get("audio_issues")
    if audio_issues is not None:
        if not isinstance(audio_issues, list) or not all(isinstance(t, str) for t in audio_issues):
            raise MalformedLine(line_no, "audio_issues must be a list of strings")
        audio_issues = tuple(audio_issues)

    audio_path = obj.get("audio")
    if audio_path is not None and not isinstance(audio_path, str):
        raise MalformedLine(line_no, "audio must be a string path")

    hypotheses_obj = obj.get("hypotheses")
    if not isinstance(hypotheses_obj, dict):
        raise MalformedLine(line_no, "hypotheses must be an object mapping model name to hypothesis")
    hypotheses: dict[str, Hypothesis] = {}
    for model, hyp_obj in hypotheses_obj.items():
        if not isinstance(hyp_obj, dict):
            raise MalformedLine(line_no, f"hypothesis for model {model!r} must be an object")
        unknown[0] += len(set(hyp_obj) - _HYPOTHESIS_FIELDS)
        text = hyp_obj.get("text")
        if not isinstance(text, str):
            raise MalformedLine(line_no, f"hypothesis for model {model!r} must carry a text string")
        segments = None
        if hyp_obj.get("segments") is not None:
            raw_segments = hyp_obj["segments"]
            if not isinstance(raw_segments, list):
                raise MalformedLine(line_no, "segments must be a list")
            segments = tuple(_parse_segment(seg, line_no, unknown) for seg in raw_segments)
        hypotheses[model] = Hypothesis(full_text=text, segments=segments)

    return Recording(
        id=rec_id,
        language=language,
        reference_text=reference_text,
        hypotheses=hypotheses,
        noise_level=noise_level,
        audio_issues=audio_issues,
        audio_path=audio_path,
    )


def load_manifest(path: str | Path) -> list[Recording]:
    """Load all recordings from a JSONL manifest, in file order.

    No normalization is applied; texts come back exactly as stored. Unknown
    fields anywhere in a record are ignored and tallied into one warning.

    Raises:
        MalformedLine, DuplicateId, UnsupportedLanguage, MissingReference.
    """
    path = Path(path)
    recordings: list[Recording] = []
    seen: set[str] = set()
    unknown = [0]
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, f"invalid JSON: {exc.msg}") from None
            record = _parse_record(obj, line_no, unknown)
            if record.id in seen:
                raise DuplicateId(record.id)
            seen.add(record.id)
            recordings.append(record)
    if unknown[0]:
        logger.warning("%s: ignored %d unknown field(s)", path, unknown[0])
    return recordings


def validate_manifest(path: str | Path) -> list[Diagnostic]:
    """Collect every manifest problem instead of stopping at the first.

    Besides the structural checks of ``load_manifest``, flags references that
    normalize to the empty string under the default policy, since those are
    unusable for metric computation.
    """
    path = Path(path)
    diagnostics: list[Diagnostic] = []
    seen: set[str] = set()
    unknown = [0]
    n_records = 0
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                diagnostics.append(Diagnostic("error", line_no, f"invalid JSON: {exc.msg}"))
                continue
            try:
                record = _parse_record(obj, line_no, unknown)
            except ManifestError as exc:
                diagnostics.append(Diagnostic("error", line_no, str(exc)))
                continue
            n_records += 1
            if record.id in seen:
                diagnostics.append(Diagnostic("error", line_no, f"duplicate recording id {record.id!r}"))
            seen.add(record.id)
            if not normalize(record.reference_text, DEFAULT_POLICY):
                diagnostics.append(
                    Diagnostic("error", line_no, f"reference of {record.id!r} normalizes to empty text")
                )
    if unknown[0]:
        diagnostics.append(Diagnostic("warning", None, f"ignored {unknown[0]} unknown field(s)"))
    if n_records == 0:
        diagnostics.append(Diagnostic("warning", None, "0 recordings"))
    return diagnostics


def filter_recordings(
    recordings: list[Recording],
    language: str | None = None,
    noise: set[str] | None = None,
    models: set[str] | None = None,
) -> list[Recording]:
    """Order-preserving subset; hypothesis maps restricted to ``models``."""
    out: list[Recording] = []
    for rec in recordings:
        if language is not None and rec.language != language:
            continue
        if noise is not None and rec.noise_level not in noise:
            continue
        if models is not None:
            kept = {m: h for m, h in rec.hypotheses.items() if m in models}
            rec = Recording(
                id=rec.id,
                language=rec.language,
                reference_text=rec.reference_text,
                hypotheses=kept,
                noise_level=rec.noise_level,
                audio_issues=rec.audio_issues,
                audio_path=rec.audio_path,
            )
        out.append(rec)
    return out


def noise_distribution(recordings: list[Recording]) -> dict[str, dict[str, float | int | None]]:
    """Per-language noise-level percentages over labeled recordings.

    Percentages are rounded to one decimal and computed over labeled
    recordings only; unlabeled ones are counted separately. With no labeled
    recordings the three percentages are None (rendered "n/a" downstream).
    """
    tallies: dict[str, dict[str, int]] = {}
    for rec in recordings:
        lang = tallies.setdefault(rec.language, {"low": 0, "medium": 0, "high": 0, "unlabeled": 0})
        if rec.noise_level is None:
            lang["unlabeled"] += 1
        else:
            lang[rec.noise_level] += 1
    out: dict[str, dict[str, float | int | None]] = {}
    for language in sorted(tallies):
        t = tallies[language]
        labeled = t["low"] + t["medium"] + t["high"]
        row: dict[str, float | int | None] = {}
        for level in NOISE_LEVELS:
            row[level] = round(100.0 * t[level] / labeled, 1) if labeled else None
        row["unlabeled_count"] = t["unlabeled"]
        out[language] = row
    return out


def issue_distribution(recordings: list[Recording]) -> dict[str, dict[str, float]]:
    """Per-language percentage of recordings carrying each issue tag.

    Tags are not exclusive, so a language's column need not sum to 100.
    Recordings without an ``audio_issues`` field are excluded from the
    denominator; an empty list counts as "labeled, no issues".
    """
    tag_counts: dict[str, dict[str, int]] = {}
    labeled_counts: dict[str, int] = {}
    for rec in recordings:
        if rec.audio_issues is None:
            continue
        labeled_counts[rec.language] = labeled_counts.get(rec.language, 0) + 1
        per_lang = tag_counts.setdefault(rec.language, {})
        for tag in set(rec.audio_issues):
            per_lang[tag] = per_lang.get(tag, 0) + 1
    out: dict[str, dict[str, float]] = {}
    for language in sorted(tag_counts):
        denom = labeled_counts[language]
        out[language] = {
            tag: round(100.0 * count / denom, 1)
            for tag, count in sorted(tag_counts[language].items())
        }
    return out
