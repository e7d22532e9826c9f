"""Leaderboards, delta/diarization tables, distributions and treemap figures.

All outputs are deterministic byte-for-byte for identical inputs: rows are
emitted in fixed sort orders, floats are rendered with fixed formats, and
files are written atomically (temp file + rename). ``report.json`` carries
the machine-readable union of every section plus the configuration that
produced it, and is sufficient to re-render every other file.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

from .analysis import ConfusionPair, ErrorImpact, RankDelta, rank_models
from .diarization import DiarizationStats
from .lexicon import DomainCategory
from .metrics import MetricReport, report_from_dict

TREEMAP_CANVAS = (1000.0, 600.0)

PALETTE: dict[DomainCategory, str] = {
    DomainCategory.AGRICULTURAL_PRACTICE: "#1f77b4",
    DomainCategory.CROP_NAME: "#2ca02c",
    DomainCategory.PEST_DISEASE: "#d62728",
    DomainCategory.SOIL_NUTRIENT_FERTILIZER: "#8c564b",
    DomainCategory.CHEMICAL_NAME: "#9467bd",
    DomainCategory.AGRICULTURE_UNIT: "#ff7f0e",
    DomainCategory.SEASON_NAME: "#17becf",
    DomainCategory.VARIETY_NAME: "#98df8a",
    DomainCategory.SYMPTOM: "#e377c2",
    DomainCategory.MONTH_NAME: "#bcbd22",
    DomainCategory.NUMERAL: "#aec7e8",
    DomainCategory.COUNTRY_PLACE: "#ffbb78",
    DomainCategory.GENERAL: "#c7c7c7",
}


class EmptyItems(Exception):
    def __init__(self) -> None:
        super().__init__("treemap needs at least one item")


class IoFailure(Exception):
    def __init__(self, path: Path, cause: OSError):
        super().__init__(f"failed to write {path}: {cause}")
        self.path = path


@dataclass(frozen=True)
class TreemapItem:
    label: str
    value: float
    category: DomainCategory


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h


def _pct(ratio: float) -> str:
    """Ratio -> one-decimal percent string (0.162 -> '16.2')."""
    return f"{100.0 * ratio:.1f}"


def _pct_or_na(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.1f}"


def _signed_pp(value: float) -> str:
    if value == 0:
        return "+0.0"
    return f"{value:+.1f}"


def _rank_delta_str(value: int) -> str:
    if value == 0:
        return "---"
    return f"{value:+d}"


def leaderboard(reports: list[MetricReport], metric: str = "wer") -> list[dict[str, str]]:
    """Ranked model table with one-decimal percent rendering."""
    rows = []
    for rank, report in rank_models(reports, metric):
        rows.append(
            {
                "rank": str(rank),
                "model": report.model,
                "wer": _pct(report.wer),
                "cer": _pct(report.cer),
                "mer": _pct(report.mer),
                "awwer": _pct(report.awwer),
            }
        )
    return rows


def delta_table(rank_deltas: list[RankDelta]) -> list[dict[str, str]]:
    """Render AWWER-vs-WER rows (already top-k, ordered by AWWER rank)."""
    rows = []
    for rd in rank_deltas:
        rows.append(
            {
                "language": rd.language,
                "model": rd.model,
                "wer": _pct(rd.wer),
                "awwer": _pct(rd.awwer),
                "delta_pp": _signed_pp(rd.delta_pp),
                "rank_delta": _rank_delta_str(rd.rank_delta),
            }
        )
    return rows


def _worst_aspect(row: list[float], side: float) -> float:
    total = sum(row)
    worst = 0.0
    for area in row:
        length = total / side
        ratio = max(area / (length * length) * 1.0, length * length / area)
        # equivalent closed form: max(side^2*a/total^2, total^2/(side^2*a))
        ratio = max((side * side * area) / (total * total), (total * total) / (side * side * area))
        worst = max(worst, ratio)
    return worst


def _fill_strip(row: list[float], x: float, y: float, t: float, length: float, vertical: bool) -> list[Rect]:
    """Tile one strip; cells accumulate sequentially so edges are shared exactly."""
    total = sum(row)
    rects = []
    pos = y if vertical else x
    end = pos + length
    for k, area in enumerate(row):
        extent = end - pos if k == len(row) - 1 else area / total * length
        if vertical:
            rects.append(Rect(x=x, y=pos, w=t, h=extent))
        else:
            rects.append(Rect(x=pos, y=y, w=extent, h=t))
        pos += extent
    return rects


def _squarify(areas: list[float], x: float, y: float, w: float, h: float) -> list[Rect]:
    """Squarified row packing over descending areas; tiles the region exactly."""
    rects: list[Rect] = []
    i = 0
    n = len(areas)
    while i < n:
        side = min(w, h)
        row = [areas[i]]
        j = i + 1
        while j < n and _worst_aspect(row + [areas[j]], side) <= _worst_aspect(row, side):
            row.append(areas[j])
            j += 1
        final = j >= n
        row_sum = sum(row)
        if w >= h:
            t = w if final else min(row_sum / h, w)
            rects.extend(_fill_strip(row, x, y, t, h, vertical=True))
            x += t
            w -= t
        else:
            t = h if final else min(row_sum / w, h)
            rects.extend(_fill_strip(row, x, y, w, t, vertical=False))
            y += t
            h -= t
        i = j
    return rects


def treemap_layout(
    items: list[TreemapItem], width: float, height: float
) -> list[tuple[TreemapItem, Rect]]:
    """Category-grouped squarified layout with areas proportional to values.

    Categories are laid out first (area = category total), then each
    category's items inside its rectangle, so domain blocks stay contiguous
    like the published figures.

    Raises:
        EmptyItems: no items.
        ValueError: non-positive values or canvas dimensions.
    """
    if not items:
        raise EmptyItems()
    if width <= 0 or height <= 0:
        raise ValueError("canvas dimensions must be positive")
    for item in items:
        if item.value <= 0:
            raise ValueError(f"treemap value must be > 0: {item.label!r}")

    groups: dict[DomainCategory, list[TreemapItem]] = {}
    for item in items:
        groups.setdefault(item.category, []).append(item)
    ordered_categories = sorted(
        groups, key=lambda c: (-sum(i.value for i in groups[c]), c.value)
    )
    for members in groups.values():
        members.sort(key=lambda i: (-i.value, i.label))

    total = sum(item.value for item in items)
    scale = (width * height) / total
    category_areas = [sum(i.value for i in groups[c]) * scale for c in ordered_categories]
    category_rects = _squarify(category_areas, 0.0, 0.0, width, height)

    layout: list[tuple[TreemapItem, Rect]] = []
    for category, region in zip(ordered_categories, category_rects):
        members = groups[category]
        member_rects = _squarify(
            [i.value * scale for i in members], region.x, region.y, region.w, region.h
        )
        layout.extend(zip(members, member_rects))
    return layout


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def _fmt_count(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:.1f}"


def render_treemap_svg(
    layout: list[tuple[TreemapItem, Rect]],
    palette: dict[DomainCategory, str] | None = None,
) -> str:
    """Deterministic SVG 1.1 document: one colored rect per item.

    Every rect carries its label and count in a ``<title>``; a visible text
    label is added when the cell is large enough to hold one.
    """
    palette = palette or PALETTE
    width = max((r.x + r.w for _, r in layout), default=0.0)
    height = max((r.y + r.h for _, r in layout), default=0.0)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
    ]
    for item, rect in layout:
        color = palette.get(item.category, PALETTE[DomainCategory.GENERAL])
        caption = f"{item.label} ({_fmt_count(item.value)})"
        parts.append(
            f'<rect x="{_fmt(rect.x)}" y="{_fmt(rect.y)}" '
            f'width="{_fmt(rect.w)}" height="{_fmt(rect.h)}" '
            f'fill="{color}" stroke="#ffffff" stroke-width="1">'
            f"<title>{escape(caption)} [{item.category.value}]</title></rect>"
        )
        if rect.w >= 60.0 and rect.h >= 16.0:
            cx = rect.x + rect.w / 2.0
            cy = rect.y + rect.h / 2.0
            parts.append(
                f'<text x="{_fmt(cx)}" y="{_fmt(cy)}" font-size="11" '
                f'font-family="sans-serif" text-anchor="middle" '
                f'dominant-baseline="middle">{escape(caption)}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


@dataclass
class ReportBundle:
    """Everything one evaluation run produced, ready for emission."""

    metadata: dict
    leaderboards: dict[str, list[MetricReport]] = field(default_factory=dict)
    rank_deltas: dict[str, list[RankDelta]] = field(default_factory=dict)
    noise: dict[str, dict] | None = None
    issues: dict[str, dict[str, float]] | None = None
    diarization: list[DiarizationStats] | None = None
    confusions: dict[str, list[ConfusionPair]] | None = None
    error_impact: dict[str, ErrorImpact] | None = None
    utility_rows: list[dict] | None = None
    utility_distribution: dict[str, dict[int, float]] | None = None
    per_recording: list[MetricReport] | None = None

    def as_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "leaderboards": {
                lang: [r.as_dict() for r in reports]
                for lang, reports in sorted(self.leaderboards.items())
            },
            "rank_deltas": {
                lang: [vars(rd).copy() for rd in rds]
                for lang, rds in sorted(self.rank_deltas.items())
            },
            "noise": self.noise,
            "issues": self.issues,
            "diarization": None
            if self.diarization is None
            else [vars(ds).copy() for ds in self.diarization],
            "confusions": None
            if self.confusions is None
            else {
                lang: [
                    {
                        "ref_term": p.ref_term,
                        "hyp_term": p.hyp_term,
                        "count": p.count,
                        "category": p.category.value,
                    }
                    for p in pairs
                ]
                for lang, pairs in sorted(self.confusions.items())
            },
            "error_impact": None
            if self.error_impact is None
            else {key: vars(ei).copy() for key, ei in sorted(self.error_impact.items())},
            "utility_rows": self.utility_rows,
            "utility_distribution": None
            if self.utility_distribution is None
            else {
                lang: {str(level): pct for level, pct in dist.items()}
                for lang, dist in sorted(self.utility_distribution.items())
            },
            "per_recording": None
            if self.per_recording is None
            else [r.as_dict() for r in self.per_recording],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReportBundle":
        confusions = None
        if d.get("confusions") is not None:
            confusions = {
                lang: [
                    ConfusionPair(
                        ref_term=p["ref_term"],
                        hyp_term=p["hyp_term"],
                        count=p["count"],
                        category=DomainCategory(p["category"]),
                    )
                    for p in pairs
                ]
                for lang, pairs in d["confusions"].items()
            }
        error_impact = None
        if d.get("error_impact") is not None:
            error_impact = {key: ErrorImpact(**ei) for key, ei in d["error_impact"].items()}
        diarization = None
        if d.get("diarization") is not None:
            diarization = [DiarizationStats(**ds) for ds in d["diarization"]]
        utility_distribution = None
        if d.get("utility_distribution") is not None:
            utility_distribution = {
                lang: {int(level): pct for level, pct in dist.items()}
                for lang, dist in d["utility_distribution"].items()
            }
        return cls(
            metadata=d["metadata"],
            leaderboards={
                lang: [report_from_dict(r) for r in reports]
                for lang, reports in d.get("leaderboards", {}).items()
            },
            rank_deltas={
                lang: [RankDelta(**rd) for rd in rds]
                for lang, rds in d.get("rank_deltas", {}).items()
            },
            noise=d.get("noise"),
            issues=d.get("issues"),
            diarization=diarization,
            confusions=confusions,
            error_impact=error_impact,
            utility_rows=d.get("utility_rows"),
            utility_distribution=utility_distribution,
            per_recording=None
            if d.get("per_recording") is None
            else [report_from_dict(r) for r in d["per_recording"]],
        )


def _write_atomic(path: Path, data: bytes) -> None:
    try:
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp_name, path)
        except BaseException:
            os.unlink(tmp_name)
            raise
    except OSError as exc:
        raise IoFailure(path, exc) from exc


def _csv_bytes(header: list[str], rows: list[list[str]]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def emit(bundle: ReportBundle, out_dir: str | Path, treemap_top: int = 40) -> list[Path]:
    """Write the full report bundle; returns the written paths.

    Sections the bundle lacks are skipped and listed under ``omitted`` in
    report.json. Identical bundles produce byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    omitted: list[str] = []

    def write(name: str, data: bytes) -> None:
        path = out / name
        _write_atomic(path, data)
        written.append(path)

    rows = []
    for language in sorted(bundle.leaderboards):
        for row in leaderboard(bundle.leaderboards[language], metric="wer"):
            rows.append([language, row["rank"], row["model"], row["wer"], row["cer"], row["mer"], row["awwer"]])
    write("leaderboard.csv", _csv_bytes(["language", "rank", "model", "wer", "cer", "mer", "awwer"], rows))

    rows = []
    for language in sorted(bundle.rank_deltas):
        for row in delta_table(bundle.rank_deltas[language]):
            rows.append(
                [row["language"], row["model"], row["wer"], row["awwer"], row["delta_pp"], row["rank_delta"]]
            )
    write("delta_table.csv", _csv_bytes(["language", "model", "wer", "awwer", "delta_pp", "rank_delta"], rows))

    if bundle.diarization is not None:
        rows = [
            [
                ds.model,
                ds.language,
                _pct(ds.full_wer),
                _pct(ds.bs_wer),
                _pct_or_na(ds.improvement_pct),
                "n/a" if ds.avg_speakers is None else f"{ds.avg_speakers:.2f}",
                _pct_or_na(ds.multi_speaker_pct),
            ]
            for ds in sorted(bundle.diarization, key=lambda d: (d.language, d.model))
        ]
        write(
            "diarization.csv",
            _csv_bytes(
                ["model", "language", "full_wer", "bs_wer", "improvement_pct", "avg_speakers", "multi_speaker_pct"],
                rows,
            ),
        )
    else:
        omitted.append("diarization")

    if bundle.noise is not None:
        rows = []
        for language in sorted(bundle.noise):
            cell = bundle.noise[language]
            rows.append(
                [
                    language,
                    _pct_or_na(cell["low"]),
                    _pct_or_na(cell["medium"]),
                    _pct_or_na(cell["high"]),
                    str(cell["unlabeled_count"]),
                ]
            )
        write("noise.csv", _csv_bytes(["language", "low_pct", "medium_pct", "high_pct", "unlabeled_count"], rows))
    else:
        omitted.append("noise")

    if bundle.issues is not None:
        rows = []
        for language in sorted(bundle.issues):
            for issue in sorted(bundle.issues[language]):
                rows.append([language, issue, f"{bundle.issues[language][issue]:.1f}"])
        write("issues.csv", _csv_bytes(["language", "issue", "pct"], rows))
    else:
        omitted.append("issues")

    if bundle.confusions is not None:
        rows = []
        for language in sorted(bundle.confusions):
            for pair in bundle.confusions[language]:
                rows.append([language, pair.ref_term, pair.hyp_term, str(pair.count), pair.category.value])
        write("confusions.csv", _csv_bytes(["language", "ref_term", "hyp_term", "count", "category"], rows))
        for language in sorted(bundle.confusions):
            pairs = bundle.confusions[language][:treemap_top]
            if not pairs:
                continue
            items = [
                TreemapItem(label=f"{p.ref_term} → {p.hyp_term}", value=float(p.count), category=p.category)
                for p in pairs
            ]
            layout = treemap_layout(items, *TREEMAP_CANVAS)
            write(f"treemap_{language}.svg", render_treemap_svg(layout).encode("utf-8"))
    else:
        omitted.append("confusions")

    if bundle.utility_rows is not None:
        rows = [
            [r["recording_id"], r["model"], r.get("language", ""), str(r["score"])]
            for r in sorted(bundle.utility_rows, key=lambda r: (r["recording_id"], r["model"]))
        ]
        write("utility.csv", _csv_bytes(["recording_id", "model", "language", "score"], rows))
    else:
        omitted.append("utility")

    if bundle.per_recording is not None:
        lines = "".join(
            json.dumps(r.as_dict(), ensure_ascii=False, sort_keys=True) + "\n"
            for r in sorted(bundle.per_recording, key=lambda r: (r.label, r.model))
        )
        write("per_recording.jsonl", lines.encode("utf-8"))

    payload = bundle.as_dict()
    payload["omitted"] = omitted
    write("report.json", (json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n").encode("utf-8"))
    return written
