"""Evaluation report: CSV tables, JSON summary and SVG charts."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..errors import DataError
from .stats import BaselineRow, ConsistencyRow, DailyRecallRecord, FdiDistribution, QuantileTable

REPORT_VERSION = 1


@dataclass
class EvalReport:
    records: list = field(default_factory=list)  # DailyRecallRecord of the evaluated map
    quantiles: QuantileTable | None = None
    distributions: list = field(default_factory=list)  # FdiDistribution per no-fire day
    consistency: list = field(default_factory=list)  # ConsistencyRow
    baseline: list = field(default_factory=list)  # BaselineRow
    member_ids: list = field(default_factory=list)
    member_recall: list = field(default_factory=list)  # [date, r_0, ..., r_k]
    member_quantiles: list = field(default_factory=list)  # QuantileTable per member
    member_skewness: list = field(default_factory=list)  # [date, s_0, ..., s_k]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["format_version"] = REPORT_VERSION
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        if d.get("format_version") != REPORT_VERSION:
            raise DataError(f"unsupported report format {d.get('format_version')}")

        def qt(x):
            return None if x is None else QuantileTable(tuple(x["levels"]), tuple(x["values"]), x["n_days"])

        return cls(
            records=[DailyRecallRecord(**r) for r in d["records"]],
            quantiles=qt(d["quantiles"]),
            distributions=[FdiDistribution(r["date"], tuple(r["counts"]), r["n_valid"], r["skewness"])
                           for r in d["distributions"]],
            consistency=[ConsistencyRow(**r) for r in d["consistency"]],
            baseline=[BaselineRow(**r) for r in d["baseline"]],
            member_ids=list(d["member_ids"]),
            member_recall=[list(r) for r in d["member_recall"]],
            member_quantiles=[qt(q) for q in d["member_quantiles"]],
            member_skewness=[list(r) for r in d["member_skewness"]],
            meta=dict(d["meta"]),
        )

    def save(self, path):
        _write_json(path, self.to_dict())

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise DataError(f"evaluation file not found: {path}")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def summary(self) -> dict:
        out = {"n_fire_days": len(self.records), "n_no_fire_days": len(self.distributions)}
        if self.quantiles is not None:
            out["quantiles"] = {str(k): v for k, v in self.quantiles.as_dict().items()}
        if self.consistency:
            gaps = [r.gap for r in self.consistency]
            out["eq1_mean_gap"] = float(np.mean(gaps))
            out["eq1_max_gap"] = float(np.max(gaps))
        if self.distributions:
            out["skewness"] = {str(r.date): r.skewness for r in self.distributions}
        if self.member_skewness:
            wins = [row for row in self.member_skewness if _ens_beats_median(row, self.distributions)]
            out["ensemble_skew_ge_member_median_days"] = len(wins)
        return out


def _ens_beats_median(row, dists):
    ens = {d.date: d.skewness for d in dists}
    date = row[0]
    return date in ens and ens[date] >= float(np.median(row[1:]))


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(v):
    return "" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else str(v))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])


# ---------------------------------------------------------------- SVG

def histogram_svg(dist: FdiDistribution, title: str = "") -> str:
    w, h, pad = 420, 240, 30
    n = len(dist.counts)
    top = max(max(dist.counts), 1)
    bw = (w - 2 * pad) / n
    bars = []
    for i, c in enumerate(dist.counts):
        bh = (h - 2 * pad) * c / top
        bars.append(f'<rect x="{pad + i * bw:.2f}" y="{h - pad - bh:.2f}" width="{bw - 1:.2f}" '
                    f'height="{bh:.2f}" fill="#c0392b"><title>{c}</title></rect>')
    label = escape(title or f"day {dist.date}: skewness {dist.skewness:.3f}, n={dist.n_valid}")
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'
            f'<text x="{pad}" y="18" font-size="12" font-family="sans-serif">{label}</text>\n'
            + "\n".join(bars)
            + f'\n<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" stroke="black"/>\n'
            f'<text x="{pad}" y="{h - 10}" font-size="10">0</text>'
            f'<text x="{w - pad - 6}" y="{h - 10}" font-size="10">1</text>\n</svg>\n')


def heatmap_svg(member_ids, rows) -> str:
    """Members down, days across; cell shade is daily recall, grey when undefined."""
    cell, left, top = 14, 90, 24
    w = left + cell * max(len(rows), 1) + 10
    h = top + cell * max(len(member_ids), 1) + 10
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
             '<text x="4" y="16" font-size="12" font-family="sans-serif">daily recall per member</text>']
    for m, mid in enumerate(member_ids):
        parts.append(f'<text x="4" y="{top + m * cell + 11}" font-size="10">{escape(str(mid))}</text>')
    for d, row in enumerate(rows):
        for m, r in enumerate(row[1:]):
            if r is None:
                color = "#dddddd"
            else:
                g = int(round(255 * (1 - r)))
                color = f"#{255:02x}{g:02x}{g:02x}"
            parts.append(f'<rect x="{left + d * cell}" y="{top + m * cell}" width="{cell - 1}" '
                         f'height="{cell - 1}" fill="{color}"><title>day {row[0]}: {_fmt(r)}</title></rect>')
    parts.append("</svg>\n")
    return "\n".join(parts)


# ---------------------------------------------------------------- writing

def write_report(report: EvalReport, out_dir) -> list:
    """Materialize every table, the summary and the charts; returns the file list."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create report directory {out}: {exc}") from exc
    files = []

    def put(name, header, rows):
        _write_csv(out / name, header, rows)
        files.append(name)

    put("daily_recall.csv", ("date", "fires", "detected", "recall"),
        [(r.date, r.fires, r.detected, r.recall) for r in report.records])
    if report.quantiles is not None:
        put("quantiles.csv", ("level", "value"), list(zip(report.quantiles.levels, report.quantiles.values)))
    put("skewness.csv", ("date", "skewness", "n_valid"),
        [(d.date, d.skewness, d.n_valid) for d in report.distributions])
    put("eq1.csv", ("date", "lhs", "rhs", "gap"), [(r.date, r.lhs, r.rhs, r.gap) for r in report.consistency])
    put("baseline.csv", ("date", "model_recall", "baseline_recall", "model_false_alarm", "baseline_false_alarm"),
        [(r.date, r.model_recall, r.baseline_recall, r.model_false_alarm, r.baseline_false_alarm)
         for r in report.baseline])
    if report.member_ids:
        put("member_recall.csv", ("date", *report.member_ids), report.member_recall)
        (out / "member_recall.svg").write_text(heatmap_svg(report.member_ids, report.member_recall), encoding="utf-8")
        files.append("member_recall.svg")
    if report.member_skewness:
        put("member_skewness.csv", ("date", *report.member_ids), report.member_skewness)
    for d in report.distributions:
        name = f"hist_{d.date}.svg"
        (out / name).write_text(histogram_svg(d), encoding="utf-8")
        files.append(name)
    _write_json(out / "summary.json", {"summary": report.summary(), "report": report.to_dict()})
    files.append("summary.json")
    return files


def read_report(out_dir) -> EvalReport:
    path = Path(out_dir) / "summary.json"
    if not path.exists():
        raise DataError(f"report summary not found: {path}")
    return EvalReport.from_dict(json.loads(path.read_text(encoding="utf-8"))["report"])


def read_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
