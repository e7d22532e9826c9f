"""Minimal-edit-distance alignment with a full operation backtrace.

One engine serves word- and character-level metrics as well as confusion
mining, so the path (not just the distance) is always produced. Costs are
unit costs; weighting happens downstream on the finished path, never inside
the search, which keeps the error set identical across weighted and
unweighted metrics.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class StepKind(enum.Enum):
    HIT = "hit"
    SUBSTITUTE = "substitute"
    DELETE = "delete"
    INSERT = "insert"


@dataclass(frozen=True)
class Step:
    """One backtrace step; ``ref_idx``/``hyp_idx`` is None when not consumed."""

    kind: StepKind
    ref_idx: int | None
    hyp_idx: int | None


@dataclass(frozen=True)
class AlignmentCounts:
    substitutions: int
    deletions: int
    insertions: int
    hits: int

    @property
    def reference_length(self) -> int:
        return self.substitutions + self.deletions + self.hits

    @property
    def hypothesis_length(self) -> int:
        return self.substitutions + self.insertions + self.hits

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def align(ref_units: list[str], hyp_units: list[str]) -> tuple[AlignmentCounts, list[Step]]:
    """Align two unit sequences under unit costs.

    Ties during backtrace are broken deterministically in the order
    Hit > Substitute > Delete > Insert, so identical inputs always produce
    the identical path.
    """
    n, m = len(ref_units), len(hyp_units)
    if n == 0:
        path = [Step(StepKind.INSERT, None, j) for j in range(m)]
        return counts(path), path
    if m == 0:
        path = [Step(StepKind.DELETE, i, None) for i in range(n)]
        return counts(path), path

    ids: dict[str, int] = {}
    ref_ids = np.fromiter((ids.setdefault(u, len(ids)) for u in ref_units), dtype=np.int64, count=n)
    hyp_ids = np.fromiter((ids.setdefault(u, len(ids)) for u in hyp_units), dtype=np.int64, count=m)

    # Row-wise DP. The in-row dependency d[i][j] = min(c[j], d[i][j-1]+1)
    # unrolls to a running minimum of c[k]-k because insertions cost 1.
    d = np.empty((n + 1, m + 1), dtype=np.int32)
    col = np.arange(m + 1, dtype=np.int32)
    d[0] = col
    c = np.empty(m + 1, dtype=np.int32)
    for i in range(1, n + 1):
        prev = d[i - 1]
        np.minimum((hyp_ids != ref_ids[i - 1]) + prev[:-1], prev[1:] + 1, out=c[1:])
        c[0] = i
        np.minimum.accumulate(c - col, out=c)
        d[i] = c + col

    # Backtrace with the fixed tie preference.
    steps: list[Step] = []
    i, j = n, m
    while i > 0 or j > 0:
        cur = d[i, j]
        if i > 0 and j > 0:
            if ref_ids[i - 1] == hyp_ids[j - 1] and cur == d[i - 1, j - 1]:
                steps.append(Step(StepKind.HIT, i - 1, j - 1))
                i -= 1
                j -= 1
                continue
            if ref_ids[i - 1] != hyp_ids[j - 1] and cur == d[i - 1, j - 1] + 1:
                steps.append(Step(StepKind.SUBSTITUTE, i - 1, j - 1))
                i -= 1
                j -= 1
                continue
        if i > 0 and cur == d[i - 1, j] + 1:
            steps.append(Step(StepKind.DELETE, i - 1, None))
            i -= 1
            continue
        steps.append(Step(StepKind.INSERT, None, j - 1))
        j -= 1

    steps.reverse()
    return counts(steps), steps


def counts(path: list[Step]) -> AlignmentCounts:
    """Tally a path into operation counts."""
    s = d = ins = h = 0
    for step in path:
        if step.kind is StepKind.HIT:
            h += 1
        elif step.kind is StepKind.SUBSTITUTE:
            s += 1
        elif step.kind is StepKind.DELETE:
            d += 1
        else:
            ins += 1
    return AlignmentCounts(substitutions=s, deletions=d, insertions=ins, hits=h)
