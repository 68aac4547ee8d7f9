"""Command-line interface.

    ftcarbon estimate  --scenario RUN.json [--registry REG.json] [--profile P] [--facility F] [--epochs N]
    ftcarbon sweep     --scenario RUN.json [--locations LOCS.json | --facility F ...]
    ftcarbon telemetry --trace TRACE.csv [--profile P] [--facility F]
    ftcarbon score     --pairs PAIRS.tsv [--embeddings DIR]
    ftcarbon report    --scenario MANIFEST.json [--locations LOCS.json]

Exit codes: 0 success, 1 usage error, 2 unparseable input, 3 invariant or
lookup failure. Diagnostics go to stderr as one ``error: ...`` line.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import FileUnreadable, FtCarbonError, SchemaViolation
from .estimator import (
    KOLKATA_DEHRADUN,
    PARIS_LONDON,
    FootprintResult,
    estimate,
    flight_equivalent,
    footprint_to_dict,
    load_scenario,
    run_from_dict,
    sweep_locations,
)
from .metrics import METRIC_NOTES, MetricScore, load_embedding_dir, load_pairs, score_corpus, score_to_dict
from .registry import facility_from_dict, load_registry, lookup_facility, lookup_profile
from .report import align, build_document, build_records, render
from .telemetry import effective_estimate, full_usage_estimate, parse_trace, summarize

EXIT_USAGE = 1


class UsageError(Exception):
    def __init__(self, message: str, parser: argparse.ArgumentParser | None = None):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}", self)


def _read_json(path: Path, what: str):
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read {what} {str(path)!r}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{what} {str(path)!r} is not valid JSON: {exc}") from None


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _f2(x: float) -> str:
    return f"{x:.2f}"


def _equivalents(grams: float) -> list[dict]:
    out = []
    for route in (PARIS_LONDON, KOLKATA_DEHRADUN):
        eq = flight_equivalent(grams, route)
        out.append({"route_label": eq.route_label, "distance_km": eq.distance_km, "per_km_g": eq.per_km_g,
                    "fraction": eq.fraction, "percent": eq.percent_text})
    return out


def _footprint_table(r: FootprintResult) -> list[list[str]]:
    e = r.energy
    rows = [
        ["label", r.label],
        ["facility", r.facility.location_id],
        ["carbon intensity (g/kWh)", _f2(r.facility.carbon_intensity_g_per_kwh)],
        ["pue", _f2(r.facility.pue)],
        ["runtime per epoch (min)", _f2(r.runtime_hours * 60)],
        ["u_cpu", _f2(r.u_cpu)],
        ["u_gpu", _f2(r.u_gpu)],
        ["cpu energy (Wh)", _f2(e.cpu_wh)],
        ["gpu energy (Wh)", _f2(e.gpu_wh)],
        ["memory energy (Wh)", _f2(e.memory_wh)],
        ["energy per epoch (Wh)", _f2(e.total_wh)],
    ]
    if e.shares_defined:
        rows += [["share gpu (%)", _f2(e.share_gpu * 100)], ["share cpu (%)", _f2(e.share_cpu * 100)],
                 ["share memory (%)", _f2(e.share_memory * 100)]]
    else:
        rows.append(["shares", "undefined (zero energy)"])
    rows += [["gCO2e per epoch", _f2(r.grams_co2e_per_epoch)], ["epochs", str(r.epochs)],
             ["energy total (Wh)", _f2(r.energy_wh_total)], ["gCO2e total", _f2(r.grams_co2e_total)]]
    return rows


# -- subcommands ------------------------------------------------------------

def cmd_estimate(args) -> str:
    registry = load_registry(args.registry)
    run = load_scenario(args.scenario)
    if args.epochs is not None:
        run = replace(run, epochs=args.epochs)
    profile = lookup_profile(registry, args.profile or run.profile_ref)
    facility = lookup_facility(registry, args.facility or run.facility_ref)
    result = estimate(run, profile, facility)
    if args.format == "table":
        rows = _footprint_table(result)
        rows += [[f"flight {q['route_label']} ({q['distance_km']:.0f} km)", q["percent"]]
                 for q in _equivalents(result.grams_co2e_per_epoch)]
        return align(("quantity", "value"), rows)
    doc = footprint_to_dict(result)
    doc["flight_equivalents"] = _equivalents(result.grams_co2e_per_epoch)
    return _dumps(doc)


def _load_locations(path: Path, registry) -> list:
    doc = _read_json(path, "locations file")
    if not isinstance(doc, list):
        raise SchemaViolation(f"locations file {str(path)!r}: expected a JSON array")
    out = []
    for i, item in enumerate(doc):
        if isinstance(item, str):
            out.append(lookup_facility(registry, item))
        else:
            out.append(facility_from_dict(item, where=f"locations[{i}]"))
    return out


def cmd_sweep(args) -> str:
    registry = load_registry(args.registry)
    run = load_scenario(args.scenario)
    if args.epochs is not None:
        run = replace(run, epochs=args.epochs)
    profile = lookup_profile(registry, args.profile or run.profile_ref)
    facilities = []
    if args.locations:
        facilities += _load_locations(Path(args.locations), registry)
    facilities += [lookup_facility(registry, f) for f in (args.facility or [])]
    if not args.locations and not args.facility:
        facilities = [registry.facilities[k] for k in sorted(registry.facilities)]
    results = sweep_locations(run, profile, facilities)
    if args.format == "json":
        return _dumps({"label": run.label,
                       "results": [{"location_id": fid, **footprint_to_dict(r)} for fid, r in results]})
    header = ("location", "ci_g_per_kwh", "pue", "energy_wh", "grams_per_epoch", "grams_total")
    rows = [[fid, _f2(r.facility.carbon_intensity_g_per_kwh), _f2(r.facility.pue), _f2(r.energy.total_wh),
             _f2(r.grams_co2e_per_epoch), _f2(r.grams_co2e_total)] for fid, r in results]
    if args.format == "csv":
        return ",".join(header) + "\n" + "".join(",".join(row) + "\n" for row in rows)
    return f"location sweep: {run.label}\n" + align(header, rows)


def cmd_telemetry(args) -> str:
    registry = load_registry(args.registry)
    trace = parse_trace(args.trace)
    profile = lookup_profile(registry, args.profile or "paper-rig")
    facility = lookup_facility(registry, args.facility or "paper-iowa")
    epochs = args.epochs or 1
    summary = summarize(trace)
    eff = effective_estimate(trace, profile, facility, epochs=epochs)
    full = full_usage_estimate(trace, profile, facility, epochs=epochs)
    if args.format == "table":
        rows = [
            ["trace", trace.source_label],
            ["samples", str(len(trace.samples))],
            ["duration (min)", _f2(summary.duration_hours * 60)],
            ["u_cpu effective", f"{summary.u_cpu_eff:.4f}"],
            ["u_gpu effective", f"{summary.u_gpu_eff:.4f}"],
            ["peak gpu memory (GB)", _f2(summary.peak_gpu_mem_gb)],
            ["peak system memory (GB)", _f2(summary.peak_sys_mem_gb)],
            ["energy measured-usage (Wh)", _f2(eff.energy.total_wh)],
            ["energy 100%-usage (Wh)", _f2(full.energy.total_wh)],
            ["gCO2e measured-usage", _f2(eff.grams_co2e_per_epoch)],
            ["gCO2e 100%-usage", _f2(full.grams_co2e_per_epoch)],
        ]
        return align(("quantity", "value"), rows)
    return _dumps({
        "source_label": trace.source_label,
        "samples": len(trace.samples),
        "summary": vars(summary),
        "effective": footprint_to_dict(eff),
        "full_usage": footprint_to_dict(full),
    })


def _score_rows(per_pair, corpus):
    def pts(s: MetricScore):
        return [f"{s.rouge1.f1 * 100:.2f}", f"{s.rouge2.f1 * 100:.2f}", f"{s.rougeL.f1 * 100:.2f}",
                f"{s.meteor * 100:.2f}", "" if s.bertscore is None else f"{s.bertscore.f1 * 100:.2f}"]
    rows = [[str(i)] + pts(s) for i, s in enumerate(per_pair, start=1)]
    rows.append(["corpus"] + pts(corpus))
    return rows


def cmd_score(args) -> str:
    pairs = load_pairs(args.pairs)
    embeddings = load_embedding_dir(args.embeddings, len(pairs)) if args.embeddings else None
    per_pair, corpus = score_corpus(pairs, embeddings)
    if args.format == "table":
        out = align(("pair", "rouge1", "rouge2", "rougeL", "meteor", "bertscore"), _score_rows(per_pair, corpus))
        return out + "".join(f"# note: {n}\n" for n in METRIC_NOTES)
    return _dumps({"pairs": [{"pair": i, **score_to_dict(s)} for i, s in enumerate(per_pair, start=1)],
                   "corpus": score_to_dict(corpus), "notes": list(METRIC_NOTES)})


_POINT_KEYS = ("rouge1", "rouge2", "rougeL", "meteor", "bertscore")


def _manifest_scores(label: str, entry, base: Path, inputs: list[str]) -> MetricScore:
    where = f"manifest scores.{label}"
    if not isinstance(entry, dict):
        raise SchemaViolation(f"{where}: expected an object")
    if "points" in entry:
        if set(entry) != {"points"}:
            raise SchemaViolation(f"{where}: 'points' cannot be combined with other keys")
        pts = entry["points"]
        if not isinstance(pts, dict) or set(pts) - set(_POINT_KEYS) or set(_POINT_KEYS[:4]) - set(pts):
            raise SchemaViolation(f"{where}.points: need rouge1, rouge2, rougeL, meteor (bertscore optional)")
        for k, v in pts.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 <= v <= 100:
                raise SchemaViolation(f"{where}.points.{k}: expected a number in [0, 100], got {v!r}")
        return MetricScore.from_points(**pts)
    if set(entry) - {"pairs", "embeddings"} or "pairs" not in entry:
        raise SchemaViolation(f"{where}: expected {{'points': ...}} or {{'pairs': FILE, 'embeddings': DIR}}")
    pairs_path = base / entry["pairs"]
    inputs.append(entry["pairs"])
    pairs = load_pairs(pairs_path)
    emb = None
    if entry.get("embeddings"):
        inputs.append(entry["embeddings"])
        emb = load_embedding_dir(base / entry["embeddings"], len(pairs))
    return score_corpus(pairs, emb)[1]


def cmd_report(args) -> str:
    registry = load_registry(args.registry)
    manifest_path = Path(args.scenario)
    base = manifest_path.parent
    doc = _read_json(manifest_path, "report manifest")
    if not isinstance(doc, dict) or set(doc) != {"scenarios", "scores"}:
        raise SchemaViolation("report manifest: expected exactly the keys 'scenarios' and 'scores'")
    if not isinstance(doc["scenarios"], dict) or not isinstance(doc["scores"], dict):
        raise SchemaViolation("report manifest: 'scenarios' and 'scores' must be objects keyed by model label")
    inputs = [args.scenario]
    if args.registry:
        inputs.append(args.registry)

    footprints, runs = {}, {}
    for label, entry in doc["scenarios"].items():
        if isinstance(entry, str):
            inputs.append(entry)
            run = replace(load_scenario(base / entry), label=label)
        else:
            if not isinstance(entry, dict):
                raise SchemaViolation(f"manifest scenarios.{label}: expected an object or a file name")
            run = run_from_dict({**entry, "label": label}, f"manifest scenarios.{label}")
        if args.epochs is not None:
            run = replace(run, epochs=args.epochs)
        profile = lookup_profile(registry, args.profile or run.profile_ref)
        facility = lookup_facility(registry, args.facility or run.facility_ref)
        runs[label] = (run, profile)
        footprints[label] = estimate(run, profile, facility)
    scores = {label: _manifest_scores(label, entry, base, inputs) for label, entry in doc["scores"].items()}
    records = build_records(scores, footprints)

    sweeps = None
    if args.locations:
        inputs.append(args.locations)
        facilities = _load_locations(Path(args.locations), registry)
        sweeps = {label: sweep_locations(run, profile, facilities) for label, (run, profile) in runs.items()}
    return render(build_document(records, sweeps, inputs), args.format)


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ftcarbon", description="Energy and carbon accounting for fine-tuning runs.")
    parser.add_argument("--version", action="version", version=f"ftcarbon {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="{estimate,sweep,telemetry,score,report}",
                                parser_class=_Parser)

    def common(p, formats, default):
        p.add_argument("--format", choices=formats, default=default, help="output format (default: %(default)s)")
        p.add_argument("--out", metavar="PATH", help="write output to PATH instead of stdout")

    def hardware(p):
        p.add_argument("--registry", metavar="FILE", help="registry JSON merged over the built-ins")
        p.add_argument("--profile", metavar="NAME", help="hardware profile (overrides the scenario)")
        p.add_argument("--epochs", type=int, metavar="N", help="number of epochs (overrides the scenario)")

    p = sub.add_parser("estimate", help="footprint of one run")
    p.add_argument("--scenario", required=True, metavar="FILE", help="run scenario JSON")
    hardware(p)
    p.add_argument("--facility", metavar="ID", help="facility id (overrides the scenario)")
    common(p, ("json", "table"), "json")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="footprint of one run across facilities")
    p.add_argument("--scenario", required=True, metavar="FILE", help="run scenario JSON")
    hardware(p)
    p.add_argument("--locations", metavar="FILE", help="JSON array of facility ids or inline facilities")
    p.add_argument("--facility", action="append", metavar="ID", help="facility id; repeatable")
    common(p, ("table", "csv", "json"), "table")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("telemetry", help="footprint from a resource-usage trace")
    p.add_argument("--trace", required=True, metavar="FILE", help="telemetry CSV")
    hardware(p)
    p.add_argument("--facility", metavar="ID", help="facility id (default: paper-iowa)")
    common(p, ("json", "table"), "json")
    p.set_defaults(func=cmd_telemetry)

    p = sub.add_parser("score", help="quality metrics over candidate/reference pairs")
    p.add_argument("--pairs", required=True, metavar="FILE", help="candidate<TAB>reference file")
    p.add_argument("--embeddings", metavar="DIR", help="directory of <n>.cand.emb / <n>.ref.emb files")
    common(p, ("json", "table"), "json")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="efficiency report joining scores and footprints")
    p.add_argument("--scenario", required=True, metavar="FILE", help="report manifest JSON")
    hardware(p)
    p.add_argument("--facility", metavar="ID", help="facility id for every model (overrides the manifest)")
    p.add_argument("--locations", metavar="FILE", help="facilities for per-model location sweeps")
    common(p, ("table", "csv", "json"), "table")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("ftcarbon: a subcommand is required")
        text = args.func(args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        (exc.parser or parser).print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FtCarbonError as exc:
        print("error: " + " ".join(str(exc).split()), file=sys.stderr)
        return exc.exit_code
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
