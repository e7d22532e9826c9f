"""Advisory-utility scoring of hypotheses via a chat-completion endpoint.

Any HTTP service speaking the chat-completions wire format can act as the
judge, which keeps the pipeline testable against a local stub. Scores are
cached on disk keyed by (recording, model, prompt hash, judge model); cache
hits never touch the network, making corpus scoring resumable and replayable
byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import httpx

from .corpus import Recording

logger = logging.getLogger(__name__)

PROMPT_TEMPLATE_VERSION = "1"
TEMPERATURE = 0.0

RUBRIC = """Score 4: Excellent - minimal difference from reference
Score 3: Good - acceptable with same advisory outcome
Score 2: Poor - different advisory needed due to key term errors
Score 1: Unusable - completely different meaning"""

_PROMPT_TEMPLATE = """You are grading the usefulness of an automatic transcript of a farmer's \
spoken agricultural query. Compare the hypothesis transcript against the \
human reference transcript and rate how well the hypothesis supports the \
same agricultural advisory outcome.

Rating scale:
{rubric}

Language: {language}
Reference transcript:
{reference}

Hypothesis transcript ({hypothesis_note}):
{hypothesis}

Reply with a single JSON object of the form {{"score": N}} where N is an \
integer from 1 to 4. Output nothing else.
(template v{version})"""


class JudgeError(Exception):
    pass


class JudgeUnreachable(JudgeError):
    pass


class MalformedJudgeReply(JudgeError):
    def __init__(self, raw: str):
        super().__init__(f"judge reply carries no usable score field: {raw!r}")
        self.raw = raw


class ScoreOutOfRange(JudgeError):
    def __init__(self, raw: str):
        super().__init__(f"judge score outside 1..4: {raw!r}")
        self.raw = raw


@dataclass(frozen=True)
class UtilityScore:
    recording_id: str
    model: str
    score: int
    raw_response: str
    judge_model: str
    prompt_hash: str

    def as_dict(self) -> dict:
        return {
            "recording_id": self.recording_id,
            "model": self.model,
            "score": self.score,
            "raw_response": self.raw_response,
            "judge_model": self.judge_model,
            "prompt_hash": self.prompt_hash,
        }


@dataclass
class JudgeConfig:
    endpoint: str
    judge_model: str
    api_key: str | None = field(default_factory=lambda: os.environ.get("JUDGE_API_KEY"))
    max_in_flight: int = 4
    retry_budget: int = 2
    cache_path: str | Path | None = None
    timeout_s: float = 30.0
    backoff_base_s: float = 0.5

    def __post_init__(self) -> None:
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be >= 0")


def build_prompt(reference_text: str, hypothesis_text: str, language: str) -> str:
    """Deterministic judge prompt embedding the four-level rubric.

    Identical inputs always produce an identical string, so the prompt hash
    is a stable cache-key component.
    """
    hypothesis_note = "hypothesis empty" if not hypothesis_text.strip() else "as transcribed"
    return _PROMPT_TEMPLATE.format(
        rubric=RUBRIC,
        language=language,
        reference=reference_text,
        hypothesis=hypothesis_text,
        hypothesis_note=hypothesis_note,
        version=PROMPT_TEMPLATE_VERSION,
    )


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)
_SCORE_RE = re.compile(r'"score"\s*:\s*(-?\d+)')


def _extract_score(content: str) -> int:
    """Parse the structured score field; strict, no free-text guessing."""
    text = content.strip()
    fence = _FENCE_RE.match(text)
    if fence:
        text = fence.group(1).strip()
    score: object = None
    try:
        parsed = json.loads(text)
    except json.JSONDecodeError:
        matches = set(_SCORE_RE.findall(text))
        if len(matches) == 1:
            score = int(matches.pop())
    else:
        if isinstance(parsed, dict):
            score = parsed.get("score")
    if not isinstance(score, int) or isinstance(score, bool):
        raise MalformedJudgeReply(content)
    if not 1 <= score <= 4:
        raise ScoreOutOfRange(content)
    return score


class _ScoreCache:
    """Append-safe JSONL cache of utility scores; last entry per key wins."""

    def __init__(self, path: str | Path | None):
        self._path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, str, str, str], UtilityScore] = {}
        if self._path is not None and self._path.exists():
            with self._path.open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    d = json.loads(line)
                    entry = UtilityScore(
                        recording_id=d["recording_id"],
                        model=d["model"],
                        score=d["score"],
                        raw_response=d.get("raw_response", ""),
                        judge_model=d["judge_model"],
                        prompt_hash=d["prompt_hash"],
                    )
                    self._entries[self._key(entry)] = entry

    @staticmethod
    def _key(entry: UtilityScore) -> tuple[str, str, str, str]:
        return (entry.recording_id, entry.model, entry.prompt_hash, entry.judge_model)

    def get(self, key: tuple[str, str, str, str]) -> UtilityScore | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, entry: UtilityScore) -> None:
        line = json.dumps(entry.as_dict(), ensure_ascii=False, sort_keys=True) + "\n"
        with self._lock:
            self._entries[self._key(entry)] = entry
            if self._path is not None:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write(line)


class JudgeSession:
    """One judge run: shared HTTP client, score cache and request counter."""

    def __init__(self, config: JudgeConfig):
        self.config = config
        self.cache = _ScoreCache(config.cache_path)
        self.network_calls = 0
        self._client = httpx.Client(timeout=config.timeout_s)
        self._count_lock = threading.Lock()

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> JudgeSession:
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    def _request(self, prompt: str) -> str:
        headers = {}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        body = {
            "model": self.config.judge_model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": TEMPERATURE,
        }
        with self._count_lock:
            self.network_calls += 1
        try:
            response = self._client.post(self.config.endpoint, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise JudgeUnreachable(f"judge endpoint unreachable: {exc}") from exc
        if response.status_code >= 500 or response.status_code == 429:
            raise JudgeUnreachable(f"judge endpoint returned {response.status_code}")
        if response.status_code != 200:
            raise JudgeUnreachable(
                f"judge endpoint rejected the request: {response.status_code} {response.text[:200]}"
            )
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, json.JSONDecodeError):
            raise MalformedJudgeReply(response.text[:500]) from None

    def score_transcript(self, recording: Recording, model: str) -> UtilityScore:
        """Score one (recording, model) pair, serving from cache when possible.

        Malformed or out-of-range replies are retried up to the configured
        budget with exponential backoff plus jitter, then raised.
        """
        hypothesis = recording.hypotheses[model]
        prompt = build_prompt(recording.reference_text, hypothesis.full_text, recording.language)
        phash = prompt_hash(prompt)
        key = (recording.id, model, phash, self.config.judge_model)
        cached = self.cache.get(key)
        if cached is not None:
            return cached

        last_error: JudgeError | None = None
        for attempt in range(self.config.retry_budget + 1):
            if attempt > 0:
                delay = self.config.backoff_base_s * (2 ** (attempt - 1))
                time.sleep(delay + random.uniform(0, self.config.backoff_base_s))
            try:
                content = self._request(prompt)
                score = _extract_score(content)
            except (MalformedJudgeReply, ScoreOutOfRange, JudgeUnreachable) as exc:
                last_error = exc
                continue
            entry = UtilityScore(
                recording_id=recording.id,
                model=model,
                score=score,
                raw_response=content,
                judge_model=self.config.judge_model,
                prompt_hash=phash,
            )
            self.cache.put(entry)
            return entry
        assert last_error is not None
        raise last_error

    def score_many(self, pairs: list[tuple[Recording, str]]) -> list[UtilityScore]:
        """Score pairs with bounded concurrency; results id-sorted."""
        ordered = sorted(pairs, key=lambda p: (p[0].id, p[1]))
        if self.config.max_in_flight > 1 and len(ordered) > 1:
            with ThreadPoolExecutor(max_workers=self.config.max_in_flight) as pool:
                results = list(pool.map(lambda p: self.score_transcript(*p), ordered))
        else:
            results = [self.score_transcript(rec, model) for rec, model in ordered]
        return results


def score_transcript(config: JudgeConfig, recording: Recording, model: str) -> UtilityScore:
    """One-shot convenience wrapper around a throwaway session."""
    with JudgeSession(config) as session:
        return session.score_transcript(recording, model)


def utility_distribution(scores: Iterable[int]) -> dict[int, float]:
    """Percentage of scores per level, highest level first, one decimal."""
    values = list(scores)
    if not values:
        raise ValueError("utility_distribution requires at least one score")
    out: dict[int, float] = {}
    for level in (4, 3, 2, 1):
        out[level] = round(100.0 * sum(1 for s in values if s == level) / len(values), 1)
    return out
