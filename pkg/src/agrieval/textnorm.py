"""Deterministic text normalization and segmentation for Indic/mixed-script transcripts.

Every metric in the toolkit runs over the output of this module, so the
pipeline is fixed and order-dependent: NFC -> punctuation strip -> case fold
-> whitespace collapse -> optional digit folding. The same policy object is
applied to references and hypotheses and is recorded in report metadata.
"""

from __future__ import annotations

import enum
import string
import unicodedata
from dataclasses import dataclass, field

import regex as _regex

# ASCII punctuation plus the Devanagari danda / double danda sentence marks.
PUNCTUATION_CHARS = frozenset(string.punctuation) | {"।", "॥"}

_PUNCT_TABLE = {ord(c): None for c in PUNCTUATION_CHARS}

# Devanagari, Odia and Telugu digit blocks, folded to ASCII when enabled.
_DIGIT_TABLE = {}
for _base in (0x0966, 0x0B66, 0x0C66):
    for _i in range(10):
        _DIGIT_TABLE[_base + _i] = ord("0") + _i

_GRAPHEME_RE = _regex.compile(r"\X")


class CharMode(enum.Enum):
    """Unit definition for character-level metrics."""

    CODEPOINT = "codepoint"
    GRAPHEME_CLUSTER = "grapheme"


@dataclass(frozen=True)
class NormalizationPolicy:
    """Immutable normalization configuration for one evaluation run.

    ``unicode_form`` is fixed to NFC; it is kept as a field so the policy
    serializes completely into report headers.
    """

    unicode_form: str = field(default="NFC", init=False)
    lowercase_latin: bool = True
    strip_punctuation: bool = True
    collapse_whitespace: bool = True
    digit_folding: bool = False

    def as_dict(self) -> dict:
        return {
            "unicode_form": self.unicode_form,
            "lowercase_latin": self.lowercase_latin,
            "strip_punctuation": self.strip_punctuation,
            "collapse_whitespace": self.collapse_whitespace,
            "digit_folding": self.digit_folding,
        }


DEFAULT_POLICY = NormalizationPolicy()


def normalize(text: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> str:
    """Apply the policy's normalization steps in their fixed order.

    Idempotent: ``normalize(normalize(x)) == normalize(x)`` for any policy.
    Punctuation characters are deleted rather than replaced by spaces,
    matching common ASR-evaluation practice.
    """
    text = unicodedata.normalize("NFC", text)
    if policy.strip_punctuation:
        text = text.translate(_PUNCT_TABLE)
    if policy.lowercase_latin:
        text = text.lower()
    if policy.collapse_whitespace:
        text = " ".join(text.split())
    if policy.digit_folding:
        text = text.translate(_DIGIT_TABLE)
    return text


def tokenize_words(normalized: str) -> list[str]:
    """Split normalized text into word tokens; never yields empty tokens."""
    return normalized.split()


def segment_chars(normalized: str, mode: CharMode = CharMode.CODEPOINT) -> list[str]:
    """Split normalized text into character units, spaces included.

    CODEPOINT yields one unit per Unicode scalar; GRAPHEME_CLUSTER yields one
    unit per extended grapheme cluster (UAX #29), so an Indic consonant plus
    its vowel sign is a single unit.
    """
    if mode is CharMode.CODEPOINT:
        return list(normalized)
    return _GRAPHEME_RE.findall(normalized)
