"""Per-language agricultural term lexicon: AWWER weights and domain categories.

Lookup is exact-match over normalized single tokens and total: unknown tokens
fall back to weight 1 / category "general". Lexicon files are user-supplied
inputs; the samples shipped under ``data/lexicons`` are illustrative only.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .textnorm import DEFAULT_POLICY, NormalizationPolicy, normalize

logger = logging.getLogger(__name__)

MIN_WEIGHT = 1
MAX_WEIGHT = 4


class DomainCategory(enum.Enum):
    AGRICULTURAL_PRACTICE = "agricultural_practice"
    CROP_NAME = "crop_name"
    PEST_DISEASE = "pest_disease"
    SOIL_NUTRIENT_FERTILIZER = "soil_nutrient_fertilizer"
    CHEMICAL_NAME = "chemical_name"
    AGRICULTURE_UNIT = "agriculture_unit"
    SEASON_NAME = "season_name"
    VARIETY_NAME = "variety_name"
    SYMPTOM = "symptom"
    MONTH_NAME = "month_name"
    NUMERAL = "numeral"
    COUNTRY_PLACE = "country_place"
    GENERAL = "general"


class LexiconError(Exception):
    """Base for lexicon file problems; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MalformedRow(LexiconError):
    pass


class BadWeight(LexiconError):
    pass


class BadCategory(LexiconError):
    pass


@dataclass(frozen=True)
class LexiconEntry:
    term: str
    weight: int
    category: DomainCategory


_DEFAULT_ENTRY_TEMPLATE = LexiconEntry(term="", weight=MIN_WEIGHT, category=DomainCategory.GENERAL)


@dataclass
class Lexicon:
    """Immutable-after-load term table for one language."""

    language: str
    entries: dict[str, LexiconEntry] = field(default_factory=dict)
    version: str = "unversioned"

    def lookup(self, token: str) -> LexiconEntry:
        """Total lookup: unknown tokens get weight 1, category general."""
        return self.entries.get(token, _DEFAULT_ENTRY_TEMPLATE)

    def weight_of(self, token: str) -> int:
        return self.lookup(token).weight

    def category_of(self, token: str) -> DomainCategory:
        return self.lookup(token).category


def empty_lexicon(language: str) -> Lexicon:
    """All-default lexicon under which AWWER degenerates to WER."""
    return Lexicon(language=language, version="empty")


def load_lexicon(
    path: str | Path,
    language: str,
    policy: NormalizationPolicy = DEFAULT_POLICY,
) -> Lexicon:
    """Load a three-column TSV lexicon (term, weight, category).

    Lines starting with ``#`` are comments; a ``# version: <v>`` comment sets
    the lexicon version. Terms are normalized with ``policy`` before
    insertion and must normalize to exactly one token. Duplicate terms keep
    the last entry, with a warning tallied.

    Raises:
        MalformedRow: wrong column count or a term that is not a single token.
        BadWeight: weight outside {1, 2, 3, 4}.
        BadCategory: category not one of the known values.
    """
    path = Path(path)
    entries: dict[str, LexiconEntry] = {}
    version = "unversioned"
    duplicates = 0
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("#"):
                comment = line.lstrip()[1:].strip()
                if comment.lower().startswith("version:"):
                    version = comment.split(":", 1)[1].strip()
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise MalformedRow(line_no, f"expected 3 tab-separated columns, got {len(cols)}")
            term_raw, weight_raw, category_raw = (c.strip() for c in cols)
            term = normalize(term_raw, policy)
            if not term or " " in term:
                raise MalformedRow(
                    line_no, f"term {term_raw!r} does not normalize to a single token"
                )
            try:
                weight = int(weight_raw)
            except ValueError:
                raise BadWeight(line_no, f"weight {weight_raw!r} is not an integer") from None
            if not MIN_WEIGHT <= weight <= MAX_WEIGHT:
                raise BadWeight(line_no, f"weight {weight} outside {MIN_WEIGHT}..{MAX_WEIGHT}")
            try:
                category = DomainCategory(category_raw)
            except ValueError:
                raise BadCategory(line_no, f"unknown category {category_raw!r}") from None
            if term in entries:
                duplicates += 1
            entries[term] = LexiconEntry(term=term, weight=weight, category=category)
    if duplicates:
        logger.warning("%s: %d duplicate term(s), last entry wins", path, duplicates)
    return Lexicon(language=language, entries=entries, version=version)
