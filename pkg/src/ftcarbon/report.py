"""Efficiency records joining quality scores with carbon cost, and their rendering.

Derived ratios are computed on demand from the stored score and footprint:

* ``points_per_kwh``: score in display points (x100) per kWh over all epochs;
* ``grams_per_point``: total grams CO2e per display point, only for
  non-zero scores.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import __version__
from .errors import LabelMismatch
from .estimator import FootprintResult, footprint_from_dict, footprint_to_dict
from .metrics import METRIC_NOTES, MetricScore, score_from_dict, score_to_dict

CSV_HEADER = ("label", "rouge1", "rouge2", "rougeL", "meteor", "bertscore", "energy_wh",
              "grams_per_epoch", "grams_total", "share_gpu", "share_cpu", "share_memory")

FORMATS = {"plain-table": "table", "table": "table", "delimited": "csv", "csv": "csv",
           "structured": "json", "json": "json"}

DERIVED_NOTE = "efficiency ratios join quality scores with footprint estimates (derived analysis)"


def score_components(scores: MetricScore) -> dict[str, float]:
    """Headline value of each metric, as a fraction."""
    out = {"rouge1": scores.rouge1.f1, "rouge2": scores.rouge2.f1, "rougeL": scores.rougeL.f1,
           "meteor": scores.meteor}
    if scores.bertscore is not None:
        out["bertscore"] = scores.bertscore.f1
    return out


@dataclass(frozen=True)
class EfficiencyRecord:
    model_label: str
    scores: MetricScore
    footprint: FootprintResult

    @property
    def points_per_kwh(self) -> dict[str, float | None]:
        kwh = self.footprint.energy_wh_total / 1000
        return {k: (v * 100 / kwh if kwh > 0 else None) for k, v in score_components(self.scores).items()}

    @property
    def grams_per_point(self) -> dict[str, float]:
        g = self.footprint.grams_co2e_total
        return {k: g / (v * 100) for k, v in score_components(self.scores).items() if v > 0}


@dataclass(frozen=True)
class SweepRow:
    location_id: str
    carbon_intensity_g_per_kwh: float
    pue: float
    energy_wh: float
    grams_per_epoch: float


@dataclass(frozen=True)
class ShareTriple:
    gpu: float
    cpu: float
    memory: float
    defined: bool = True


@dataclass(frozen=True)
class ReportDocument:
    records: tuple[EfficiencyRecord, ...] = ()
    sweeps: Mapping[str, tuple[SweepRow, ...]] = field(default_factory=dict)
    shares: Mapping[str, ShareTriple] = field(default_factory=dict)
    provenance: Mapping[str, object] = field(default_factory=dict)


def build_records(scores: Mapping[str, MetricScore],
                  footprints: Mapping[str, FootprintResult]) -> list[EfficiencyRecord]:
    only_s = set(scores) - set(footprints)
    only_f = set(footprints) - set(scores)
    if only_s or only_f:
        raise LabelMismatch(only_s, only_f)
    return [EfficiencyRecord(label, scores[label], footprints[label]) for label in sorted(scores)]


def sweep_rows(results: Sequence[tuple[str, FootprintResult]]) -> tuple[SweepRow, ...]:
    return tuple(SweepRow(fid, r.facility.carbon_intensity_g_per_kwh, r.facility.pue,
                          r.energy.total_wh, r.grams_co2e_per_epoch) for fid, r in results)


def build_document(records: Sequence[EfficiencyRecord],
                   sweeps: Mapping[str, Sequence[tuple[str, FootprintResult]]] | None = None,
                   inputs: Sequence[str] = ()) -> ReportDocument:
    shares = {}
    for rec in records:
        e = rec.footprint.energy
        shares[rec.model_label] = ShareTriple(e.share_gpu, e.share_cpu, e.share_memory, e.shares_defined)
    return ReportDocument(
        records=tuple(records),
        sweeps={k: sweep_rows(v) for k, v in sorted((sweeps or {}).items())},
        shares=shares,
        provenance={"tool": "ftcarbon", "version": __version__, "inputs": list(inputs),
                    "notes": [DERIVED_NOTE, *METRIC_NOTES]},
    )


# -- structured form --------------------------------------------------------

def _record_to_dict(rec: EfficiencyRecord) -> dict:
    return {
        "model_label": rec.model_label,
        "scores": score_to_dict(rec.scores),
        "footprint": footprint_to_dict(rec.footprint),
        "derived": {"points_per_kwh": rec.points_per_kwh, "grams_per_point": rec.grams_per_point},
    }


def document_to_dict(doc: ReportDocument) -> dict:
    return {
        "records": [_record_to_dict(r) for r in doc.records],
        "sweeps": {k: [vars(row) for row in rows] for k, rows in doc.sweeps.items()},
        "shares": {k: vars(v) for k, v in doc.shares.items()},
        "provenance": dict(doc.provenance),
    }


def document_from_dict(d: dict) -> ReportDocument:
    records = tuple(EfficiencyRecord(r["model_label"], score_from_dict(r["scores"]),
                                     footprint_from_dict(r["footprint"])) for r in d["records"])
    return ReportDocument(
        records=records,
        sweeps={k: tuple(SweepRow(**row) for row in rows) for k, rows in d["sweeps"].items()},
        shares={k: ShareTriple(**v) for k, v in d["shares"].items()},
        provenance=d["provenance"],
    )


def document_from_json(text: str) -> ReportDocument:
    return document_from_dict(json.loads(text))


# -- rendering --------------------------------------------------------------

def _pt(x: float | None) -> str:
    return "" if x is None else f"{x * 100:.2f}"


def _f2(x: float) -> str:
    return f"{x:.2f}"


def _record_row(rec: EfficiencyRecord, shares: ShareTriple | None) -> list[str]:
    s, fp = rec.scores, rec.footprint
    row = [rec.model_label, _pt(s.rouge1.f1), _pt(s.rouge2.f1), _pt(s.rougeL.f1), _pt(s.meteor),
           _pt(None if s.bertscore is None else s.bertscore.f1),
           _f2(fp.energy.total_wh), _f2(fp.grams_co2e_per_epoch), _f2(fp.grams_co2e_total)]
    if shares is None or not shares.defined:
        row += ["", "", ""]
    else:
        row += [_pt(shares.gpu), _pt(shares.cpu), _pt(shares.memory)]
    return row


def align(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Plain-text table: first column left-aligned, the rest right-aligned."""
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]

    def fmt(cells):
        out = [str(cells[0]).ljust(widths[0])]
        out += [str(c).rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join(out).rstrip()

    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


def _render_csv(doc: ReportDocument) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in doc.records:
        w.writerow(_record_row(rec, doc.shares.get(rec.model_label)))
    return buf.getvalue()


def _render_table(doc: ReportDocument) -> str:
    rows = [_record_row(rec, doc.shares.get(rec.model_label)) for rec in doc.records]
    parts = [align(CSV_HEADER, rows)]
    ratios = []
    for rec in doc.records:
        gpp = rec.grams_per_point
        ratios.append([rec.model_label] + [_f2(gpp[k]) if k in gpp else ""
                                           for k in ("rouge1", "rouge2", "rougeL", "meteor", "bertscore")])
    if ratios:
        parts.append("\ngrams CO2e per score point (all epochs)\n")
        parts.append(align(("label", "rouge1", "rouge2", "rougeL", "meteor", "bertscore"), ratios))
    for label, sweep in doc.sweeps.items():
        parts.append(f"\nlocation sweep: {label}\n")
        parts.append(align(("location", "ci_g_per_kwh", "pue", "energy_wh", "grams_per_epoch"),
                           [[r.location_id, _f2(r.carbon_intensity_g_per_kwh), _f2(r.pue),
                             _f2(r.energy_wh), _f2(r.grams_per_epoch)] for r in sweep]))
    prov = doc.provenance
    if prov:
        parts.append(f"\n# {prov.get('tool', '')} {prov.get('version', '')}\n")
        for name in prov.get("inputs", []):
            parts.append(f"# input: {name}\n")
        for note in prov.get("notes", []):
            parts.append(f"# note: {note}\n")
    return "".join(parts)


def render(doc: ReportDocument, fmt: str = "plain-table") -> str:
    try:
        kind = FORMATS[fmt]
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}; choose from {', '.join(sorted(FORMATS))}") from None
    if kind == "json":
        return json.dumps(document_to_dict(doc), indent=2) + "\n"
    if kind == "csv":
        return _render_csv(doc)
    return _render_table(doc)
