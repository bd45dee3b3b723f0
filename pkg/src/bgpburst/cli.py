"""Command-line front end: ingest, analyze, detect, evaluate, simulate.

Every command snapshots its configuration, input digests, and output digests
into a manifest.json in the output directory, so identical inputs and
settings can be shown to yield identical outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .burstiness import (
    DEFAULT_MIN_EVENTS,
    DegenerateTableError,
    InsufficientDataError,
    InsufficientNullDataError,
    UndefinedStatisticError,
    joint_distribution,
    joint_sidecar,
    monte_carlo_null_test,
    series_burstiness,
    write_joint_csv,
    write_significance_json,
)
from .detector import (
    AnomalyReport,
    DetectorConfig,
    load_config_file,
    detect_events,
    detect_volume,
    write_trace_csv,
)
from .evaluation import (
    DEFAULT_BIN_SECONDS,
    ConfigurationError,
    IncidentWindow,
    evaluate_incident,
    load_incidents,
    parse_utc,
    write_results_csv,
)
from .events import (
    ANNOUNCEMENT,
    WITHDRAWAL,
    EventFormatError,
    build_series,
    build_volume_series,
    parse_event_lines,
    series_keys,
    write_event_lines,
)
from .mrt import MrtParseError, decompress, parse_mrt_updates
from .synth import GeneratorSpec, IncidentSpec, generate_stream, inject_incident_events

CONFIG_ENV_VAR = "BGPBURST_CONFIG"


class CliError(Exception):
    """User-facing failure; message goes to stderr, exit code 2."""


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha256_path(path: Path) -> str:
    return _sha256_bytes(path.read_bytes())


class Manifest:
    def __init__(self, command: str, argv: list[str], config: dict, seed: int | None):
        self.started = time.time()
        self.doc = {
            "tool": "bgpburst",
            "version": __version__,
            "command": command,
            "argv": argv,
            "config": config,
            "seed": seed,
            "inputs": [],
            "outputs": [],
        }

    def add_input(self, path: Path) -> None:
        self.doc["inputs"].append({"path": str(path), "sha256": _sha256_path(path)})

    def add_output(self, path: Path) -> None:
        self.doc["outputs"].append({"path": str(path), "sha256": _sha256_path(path)})

    def write(self, out_dir: Path) -> Path:
        self.doc["duration_s"] = round(time.time() - self.started, 3)
        target = out_dir / "manifest.json"
        target.write_text(
            json.dumps(self.doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return target


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_time(text: str) -> int:
    text = text.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    try:
        return parse_utc(text)
    except ValueError as exc:
        raise CliError(f"cannot parse time {text!r}: {exc}") from exc


def _load_events(path: Path):
    try:
        raw = decompress(path.read_bytes())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    text = raw.decode("utf-8")
    try:
        return list(parse_event_lines(io.StringIO(text)))
    except EventFormatError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _safe_name(text: str) -> str:
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in text)


def _resolve_detector_config(args) -> tuple[DetectorConfig, dict]:
    """Defaults, then config file, then command-line overrides."""
    settings: dict = {}
    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    if config_path:
        try:
            settings.update(load_config_file(config_path))
        except (OSError, ValueError) as exc:
            raise CliError(f"config file {config_path}: {exc}") from exc
    for key in ("r", "omega", "delta", "warmup", "variance_floor"):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    min_events = int(settings.pop("min_events", DEFAULT_MIN_EVENTS))
    if getattr(args, "min_events", None) is not None:
        min_events = args.min_events
    try:
        config = DetectorConfig.from_mapping(settings)
    except ValueError as exc:
        raise CliError(f"bad detector settings: {exc}") from exc
    snapshot = {
        "r": config.r,
        "omega": config.omega,
        "delta": config.delta,
        "warmup": config.warmup,
        "variance_floor": config.variance_floor,
        "min_events": min_events,
    }
    return config, snapshot


# ---------------------------------------------------------------- ingest


def _parse_one_input(path: Path, collector: str | None):
    raw = path.read_bytes()
    payload = decompress(raw)
    head = payload.lstrip()[:1]
    if head in (b"{", b""):
        events = list(parse_event_lines(io.StringIO(payload.decode("utf-8"))))
        stats = {
            "format": "canonical",
            "events_emitted": len(events),
            "events_dropped": 0,
            "records_skipped": 0,
        }
    else:
        result = parse_mrt_updates(raw, collector=collector or "unknown")
        events = result.events
        stats = {"format": "mrt", **result.stats.as_dict()}
    return events, stats


def cmd_ingest(args) -> int:
    out = _out_dir(args)
    manifest = Manifest("ingest", sys.argv[1:], {"asn": args.asn, "collector": args.collector}, args.seed)
    paths = [Path(p) for p in args.inputs]
    failures = []
    for path in paths:
        if not path.is_file():
            failures.append(str(path))
    if failures:
        raise CliError(f"unreadable inputs: {', '.join(failures)}")
    for path in paths:
        manifest.add_input(path)

    workers = max(1, args.threads)
    if workers > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parsed = list(pool.map(lambda p: _parse_one_input(p, args.collector), paths))
    else:
        parsed = [_parse_one_input(p, args.collector) for p in paths]

    events = []
    totals = {"events_emitted": 0, "events_dropped": 0, "records_skipped": 0}
    per_input = []
    for path, (evs, stats) in zip(paths, parsed):
        events.extend(evs)
        per_input.append({"path": str(path), **stats})
        for key in totals:
            totals[key] += int(stats.get(key, 0))

    if args.collector is not None:
        events = [ev for ev in events if ev.collector == args.collector]
    if args.asn is not None:
        events = [ev for ev in events if ev.origin_asn == args.asn]
    announcements = sum(1 for ev in events if ev.kind == ANNOUNCEMENT)
    withdrawals = sum(1 for ev in events if ev.kind == WITHDRAWAL)

    events_path = out / "events.jsonl"
    with events_path.open("w", encoding="utf-8", newline="\n") as fh:
        written = write_event_lines(events, fh)
    summary = {
        "events_written": written,
        "announcements": announcements,
        "withdrawals_excluded_from_statistics": withdrawals,
        "events_dropped": totals["events_dropped"],
        "records_skipped": totals["records_skipped"],
        "inputs": per_input,
    }
    summary_path = out / "ingest_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    manifest.add_output(events_path)
    manifest.add_output(summary_path)
    manifest.write(out)
    print(
        f"ingest: wrote {written} events ({announcements} announcements, "
        f"{withdrawals} withdrawals) to {events_path}"
    )
    return 0


# ---------------------------------------------------------------- detect


def _write_report(
    out: Path, detector: str, report: AnomalyReport, span, config_snapshot: dict, manifest: Manifest
) -> None:
    stem = f"{detector}_AS{report.origin_asn}_{_safe_name(report.collector)}"
    trace_path = out / f"trace_{stem}.csv"
    with trace_path.open("w", encoding="utf-8", newline="\n") as fh:
        write_trace_csv(report, fh)
    report_path = out / f"report_{stem}.json"
    doc = {
        "detector": detector,
        "origin_asn": report.origin_asn,
        "collector": report.collector,
        "span": list(span),
        "anomalous_timestamps": list(report.anomalous_timestamps),
        "config": config_snapshot,
    }
    report_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    manifest.add_output(trace_path)
    manifest.add_output(report_path)


def cmd_detect(args) -> int:
    out = _out_dir(args)
    config, snapshot = _resolve_detector_config(args)
    manifest = Manifest("detect", sys.argv[1:], snapshot, args.seed)
    events_path = Path(args.events)
    if not events_path.is_file():
        raise CliError(f"unreadable input: {events_path}")
    manifest.add_input(events_path)
    events = _load_events(events_path)

    keys = series_keys(events)
    if args.collector is not None:
        keys = [k for k in keys if k[1] == args.collector]
    if args.asn is not None:
        keys = [k for k in keys if k[0] == args.asn]
    if not keys:
        print("detect: warning: no matching series; nothing to do", file=sys.stderr)
        manifest.write(out)
        return 0

    for asn, collector in keys:
        series = build_series(events, asn, collector)
        span = series.span or (0, 0)
        if args.detector in ("both", "burstiness"):
            report = detect_events(series, config, collect_trace=True)
            _write_report(out, "burstiness", report, span, snapshot, manifest)
        if args.detector in ("both", "volume"):
            volume = build_volume_series(events, asn, collector)
            report = detect_volume(volume, config, collect_trace=True)
            _write_report(out, "volume", report, span, snapshot, manifest)
    manifest.write(out)
    print(f"detect: processed {len(keys)} series into {out}")
    return 0


# ---------------------------------------------------------------- analyze


def _load_null_windows(path: Path) -> list[tuple[int, int]]:
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise CliError(f"{path}: null window file must be a JSON array")
    windows = []
    for item in raw:
        if isinstance(item, dict):
            if "start_utc" in item:
                windows.append((parse_utc(item["start_utc"]), parse_utc(item["end_utc"])))
            else:
                windows.append((int(item["start"]), int(item["end"])))
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            windows.append((int(item[0]), int(item[1])))
        else:
            raise CliError(f"{path}: bad null window entry {item!r}")
    for start, end in windows:
        if start >= end:
            raise CliError(f"{path}: null window [{start}, {end}) is empty")
    return windows


def _check_null_overlap(
    windows: list[tuple[int, int]], incidents: list[IncidentWindow]
) -> None:
    for start, end in windows:
        for inc in incidents:
            if start < inc.end and inc.start < end:
                raise CliError(
                    f"null window [{start}, {end}) overlaps incident {inc.name!r}"
                )


def cmd_analyze(args) -> int:
    out = _out_dir(args)
    window = (_parse_time(args.window[0]), _parse_time(args.window[1]))
    if window[0] >= window[1]:
        raise CliError("analysis window start must precede end")
    manifest = Manifest(
        "analyze",
        sys.argv[1:],
        {"window": list(window), "min_events": args.min_events, "k": args.k, "alpha_sig": args.alpha_sig},
        args.seed,
    )
    events_path = Path(args.events)
    if not events_path.is_file():
        raise CliError(f"unreadable input: {events_path}")
    manifest.add_input(events_path)
    events = _load_events(events_path)

    keys = series_keys(events)
    collectors = sorted({collector for _, collector in keys})
    if args.collector is not None:
        if args.collector not in collectors:
            raise CliError(f"collector {args.collector!r} not present in events")
        collectors = [args.collector]
    elif len(collectors) > 1:
        raise CliError(
            f"events span {len(collectors)} collectors; pick one with --collector"
        )
    if not collectors:
        raise CliError("no usable announcements in events file")
    collector = collectors[0]

    corpus = [
        build_series(events, asn, coll) for asn, coll in keys if coll == collector
    ]
    try:
        table = joint_distribution(corpus, window, min_events=args.min_events)
    except DegenerateTableError as exc:
        raise CliError(f"joint distribution for {collector!r}: {exc}") from exc
    joint_csv = out / f"joint_{_safe_name(collector)}.csv"
    with joint_csv.open("w", encoding="utf-8", newline="\n") as fh:
        write_joint_csv(table, fh)
    sidecar_path = out / f"joint_{_safe_name(collector)}.json"
    sidecar_path.write_text(
        json.dumps(joint_sidecar(table), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    manifest.add_output(joint_csv)
    manifest.add_output(sidecar_path)

    if args.target_asn:
        if not args.null_windows:
            raise CliError("significance testing needs --null-windows")
        null_path = Path(args.null_windows)
        if not null_path.is_file():
            raise CliError(f"unreadable input: {null_path}")
        manifest.add_input(null_path)
        null_windows = _load_null_windows(null_path)
        if args.incidents:
            incidents = load_incidents(args.incidents)
            _check_null_overlap(null_windows, incidents)
        null_events_path = Path(args.null_events) if args.null_events else events_path
        if null_events_path != events_path:
            if not null_events_path.is_file():
                raise CliError(f"unreadable input: {null_events_path}")
            manifest.add_input(null_events_path)
            null_events = _load_events(null_events_path)
        else:
            null_events = events
        for asn in args.target_asn:
            base = build_series(null_events, asn, collector)
            nulls = [base.restrict(start, end) for start, end in null_windows]
            observed_series = build_series(events, asn, collector).restrict(*window)
            try:
                observed = series_burstiness(observed_series, args.min_events)
                result = monte_carlo_null_test(
                    nulls,
                    observed,
                    k=args.k,
                    alpha_sig=args.alpha_sig,
                    min_events=args.min_events,
                )
            except (InsufficientDataError, InsufficientNullDataError, UndefinedStatisticError) as exc:
                raise CliError(f"significance test for AS{asn}: {exc}") from exc
            sig_path = out / f"significance_AS{asn}.json"
            with sig_path.open("w", encoding="utf-8", newline="\n") as fh:
                write_significance_json(result, fh)
            manifest.add_output(sig_path)
    manifest.write(out)
    print(f"analyze: {len(table.rows)} ASes tabulated for {collector} into {out}")
    return 0


# ---------------------------------------------------------------- evaluate


def _load_report(path: Path) -> dict:
    doc = json.loads(path.read_text(encoding="utf-8"))
    for key in ("detector", "origin_asn", "collector", "span", "anomalous_timestamps"):
        if key not in doc:
            raise CliError(f"{path}: report missing field {key!r}")
    return doc


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    manifest = Manifest("evaluate", sys.argv[1:], {"m": args.m}, args.seed)
    report_paths = [Path(p) for p in args.reports]
    for path in report_paths:
        if not path.is_file():
            raise CliError(f"unreadable input: {path}")
        manifest.add_input(path)
    incidents_path = Path(args.incidents)
    if not incidents_path.is_file():
        raise CliError(f"unreadable input: {incidents_path}")
    manifest.add_input(incidents_path)
    try:
        incidents = load_incidents(incidents_path)
    except ConfigurationError as exc:
        raise CliError(str(exc)) from exc

    docs = [_load_report(p) for p in report_paths]
    if args.t0 is not None and args.t1 is not None:
        bounds = (_parse_time(args.t0), _parse_time(args.t1))
    else:
        spans = [doc["span"] for doc in docs if doc["span"] != [0, 0]]
        if not spans:
            raise CliError("reports carry no data span; pass --t0/--t1")
        bounds = (min(s[0] for s in spans), max(s[1] for s in spans) + 1)

    rows = []
    for incident in incidents:
        matching = [doc for doc in docs if doc["origin_asn"] == incident.perpetrator_asn]
        if not matching:
            continue
        by_collector: dict[str, dict[str, AnomalyReport]] = {}
        for doc in matching:
            by_collector.setdefault(doc["collector"], {})[doc["detector"]] = AnomalyReport(
                origin_asn=doc["origin_asn"],
                collector=doc["collector"],
                anomalous_timestamps=tuple(doc["anomalous_timestamps"]),
            )
        for collector in sorted(by_collector):
            try:
                rows.extend(
                    evaluate_incident(by_collector[collector], incident, bounds, args.m)
                )
            except ConfigurationError as exc:
                raise CliError(str(exc)) from exc
    if not rows:
        raise CliError("no report matches any configured incident perpetrator")
    results_path = out / "results.csv"
    with results_path.open("w", encoding="utf-8", newline="\n") as fh:
        write_results_csv(rows, fh)
    manifest.add_output(results_path)
    manifest.write(out)
    print(f"evaluate: {len(rows)} rows written to {results_path}")
    return 0


# ---------------------------------------------------------------- simulate


def _spec_from_doc(doc: dict, default_seed: int | None) -> tuple[GeneratorSpec, IncidentSpec | None]:
    gen = doc.get("generator", doc)
    incident_doc = doc.get("incident")
    try:
        spec = GeneratorSpec(
            process=gen["process"],
            mean_gap=float(gen["mean_gap"]),
            n_events=int(gen["n_events"]),
            start_ts=int(gen["start_ts"]),
            asn=int(gen["asn"]),
            collector=gen["collector"],
            seed=int(gen.get("seed", default_seed if default_seed is not None else 0)),
            pareto_alpha=float(gen.get("pareto_alpha", 1.5)),
        )
    except KeyError as exc:
        raise CliError(f"generator spec missing field {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise CliError(f"bad generator spec: {exc}") from exc
    incident = None
    if incident_doc is not None:
        try:
            incident = IncidentSpec(
                start=int(incident_doc["start"]),
                end=int(incident_doc["end"]),
                burst_gap=int(incident_doc.get("burst_gap", 1)),
                prefixes_per_second=int(incident_doc.get("prefixes_per_second", 1)),
            )
        except KeyError as exc:
            raise CliError(f"incident spec missing field {exc.args[0]!r}") from exc
        except ValueError as exc:
            raise CliError(f"bad incident spec: {exc}") from exc
    return spec, incident


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    manifest = Manifest("simulate", sys.argv[1:], {}, args.seed)
    for spec_arg in args.specs:
        spec_path = Path(spec_arg)
        if not spec_path.is_file():
            raise CliError(f"unreadable input: {spec_path}")
        manifest.add_input(spec_path)
        doc = json.loads(spec_path.read_text(encoding="utf-8"))
        spec, incident = _spec_from_doc(doc, args.seed)
        events = generate_stream(spec)
        if incident is not None:
            try:
                events = inject_incident_events(events, incident)
            except ValueError as exc:
                raise CliError(f"{spec_path}: {exc}") from exc
        target = out / f"{spec_path.stem}.jsonl"
        with target.open("w", encoding="utf-8", newline="\n") as fh:
            written = write_event_lines(events, fh)
        manifest.add_output(target)
        print(f"simulate: {written} events from {spec_path.name} to {target}")
    manifest.write(out)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bgpburst",
        description="Burstiness-based anomaly detection for BGP announcement streams",
    )
    parser.add_argument("--version", action="version", version=f"bgpburst {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help=f"detector config file (or ${CONFIG_ENV_VAR})")
    common.add_argument("--out", default="bgpburst-out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="default RNG seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for file parsing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="normalize MRT or canonical inputs")
    p.add_argument("inputs", nargs="+", help="MRT dumps or canonical .jsonl files (gz/bz2 ok)")
    p.add_argument("--asn", type=int, default=None, help="keep only this origin AS")
    p.add_argument("--collector", default=None, help="collector name for MRT input; filter otherwise")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("detect", parents=[common], help="run burstiness and volume detectors")
    p.add_argument("events", help="canonical events file")
    p.add_argument("--asn", type=int, default=None)
    p.add_argument("--collector", default=None)
    p.add_argument("--detector", choices=("both", "burstiness", "volume"), default="both")
    p.add_argument("--r", type=float, default=None, help="intensity decay factor (default 1/300)")
    p.add_argument("--omega", type=int, default=None, help="moving-average window length (default 200)")
    p.add_argument("--delta", type=float, default=None, help="band width in standard deviations (default 2)")
    p.add_argument("--warmup", type=int, default=None, help="suppress flags for the first N events")
    p.add_argument("--variance-floor", dest="variance_floor", type=float, default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("analyze", parents=[common], help="joint distribution and significance test")
    p.add_argument("events", help="canonical events file")
    p.add_argument("--collector", default=None)
    p.add_argument("--window", nargs=2, required=True, metavar=("START", "END"),
                   help="analysis window (unix seconds or RFC 3339, UTC)")
    p.add_argument("--target-asn", dest="target_asn", type=int, action="append", default=[],
                   help="AS to significance-test (repeatable)")
    p.add_argument("--null-windows", dest="null_windows", default=None,
                   help="JSON list of no-incident windows")
    p.add_argument("--null-events", dest="null_events", default=None,
                   help="canonical events file for null windows (default: main events)")
    p.add_argument("--incidents", default=None, help="incident config for overlap validation")
    p.add_argument("--min-events", dest="min_events", type=int, default=DEFAULT_MIN_EVENTS)
    p.add_argument("--k", type=int, default=100, help="null sample count")
    p.add_argument("--alpha-sig", dest="alpha_sig", type=float, default=0.05)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("evaluate", parents=[common], help="score detector reports against incidents")
    p.add_argument("reports", nargs="+", help="report JSON files from the detect command")
    p.add_argument("--incidents", required=True, help="incident config JSON")
    p.add_argument("--m", type=int, default=DEFAULT_BIN_SECONDS, help="bin length in seconds")
    p.add_argument("--t0", default=None, help="study start (unix or RFC 3339)")
    p.add_argument("--t1", default=None, help="study end, exclusive")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", parents=[common], help="generate synthetic canonical streams")
    p.add_argument("specs", nargs="+", help="generator spec JSON files")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MrtParseError, EventFormatError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
