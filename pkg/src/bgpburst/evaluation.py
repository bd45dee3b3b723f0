"""Binned scoring of detector reports against ground-truth incident windows.

The study period is cut into fixed-length bins (3 hours by default, the
shortest sustained burst among the studied incidents).  A bin is ground
truth when it overlaps the incident window at all, and detected when at
least one flagged timestamp falls inside it.  Precision, recall, and F1 are
computed from the resulting bin sets; metrics whose denominator is empty
are reported as None rather than coerced to zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Mapping

from .detector import AnomalyReport

DEFAULT_BIN_SECONDS = 10800  # 3 hours

KIND_LARGE_SCALE = "large-scale"
KIND_INTERCEPTION = "interception"


class BinBoundsError(ValueError):
    """Timestamps fall outside the study bounds being binned."""


class ConfigurationError(ValueError):
    """Incident windows and study bounds do not line up."""


@dataclass(frozen=True)
class IncidentWindow:
    name: str
    perpetrator_asn: int
    start: int
    end: int
    kind: str

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"incident {self.name!r}: start must precede end")
        if self.kind not in (KIND_LARGE_SCALE, KIND_INTERCEPTION):
            raise ValueError(f"incident {self.name!r}: unknown kind {self.kind!r}")


def parse_utc(text: str) -> int:
    """RFC 3339 timestamp to unix seconds; everything is UTC."""
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def load_incidents(path: str | Path) -> list[IncidentWindow]:
    """Incident config: JSON array of {name, asn, start_utc, end_utc, kind}."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ConfigurationError("incident config must be a JSON array")
    windows = []
    for item in raw:
        try:
            windows.append(
                IncidentWindow(
                    name=item["name"],
                    perpetrator_asn=int(item["asn"]),
                    start=parse_utc(item["start_utc"]),
                    end=parse_utc(item["end_utc"]),
                    kind=item["kind"],
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad incident entry {item!r}: {exc}") from exc
    _check_disjoint(windows)
    return windows


def _check_disjoint(windows: list[IncidentWindow]) -> None:
    ordered = sorted(windows, key=lambda w: w.start)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise ConfigurationError(
                f"incident windows overlap: {prev.name!r} and {cur.name!r}"
            )


def bin_count(t0: int, t1: int, m: int) -> int:
    if t0 >= t1:
        raise ValueError("t0 must precede t1")
    if m <= 0:
        raise ValueError("bin length m must be positive")
    return math.ceil((t1 - t0) / m)


def bin_timestamps(timestamps: Iterable[int], t0: int, t1: int, m: int) -> set[int]:
    """Map timestamps to bin indices floor((ts - t0) / m); duplicates collapse.

    Raises BinBoundsError listing offenders outside [t0, t1).
    """
    bin_count(t0, t1, m)  # validates bounds and bin length
    out: set[int] = set()
    offenders = []
    for ts in timestamps:
        if ts < t0 or ts >= t1:
            offenders.append(ts)
            continue
        out.add((ts - t0) // m)
    if offenders:
        shown = ", ".join(str(t) for t in offenders[:10])
        more = "" if len(offenders) <= 10 else f" (+{len(offenders) - 10} more)"
        raise BinBoundsError(
            f"{len(offenders)} timestamps outside [{t0}, {t1}): {shown}{more}"
        )
    return out


def incident_bins(window: IncidentWindow, t0: int, t1: int, m: int) -> set[int]:
    """All bins overlapping [window.start, window.end) by any amount."""
    if window.start < t0 or window.end > t1:
        raise ConfigurationError(
            f"incident {window.name!r} [{window.start}, {window.end}) "
            f"outside study bounds [{t0}, {t1})"
        )
    n = bin_count(t0, t1, m)
    first = (window.start - t0) // m
    last = math.ceil((window.end - t0) / m) - 1
    return set(range(max(first, 0), min(last, n - 1) + 1))


@dataclass(frozen=True)
class BinnedEvaluation:
    t0: int
    t1: int
    m: int
    n_bins: int
    truth_bins: frozenset[int]
    detected_bins: frozenset[int]
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float | None
    recall: float | None
    f1: float | None


def score(
    truth_bins: set[int] | frozenset[int],
    detected_bins: set[int] | frozenset[int],
    n_bins: int,
) -> tuple[int, int, int, int, float | None, float | None, float | None]:
    """Counts and metrics for one (ground truth, detection) bin pair.

    Returns (tp, fp, fn, tn, precision, recall, f1).  Undefined metrics are
    None, never 0.
    """
    bad = [b for b in set(truth_bins) | set(detected_bins) if b < 0 or b >= n_bins]
    if bad:
        raise ValueError(f"bin indices outside [0, {n_bins}): {sorted(bad)[:10]}")
    tp = len(set(truth_bins) & set(detected_bins))
    fp = len(set(detected_bins) - set(truth_bins))
    fn = len(set(truth_bins) - set(detected_bins))
    tn = n_bins - tp - fp - fn
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return tp, fp, fn, tn, precision, recall, f1


def evaluate_window(
    truth_bins: set[int],
    detected_timestamps: Iterable[int],
    t0: int,
    t1: int,
    m: int,
) -> BinnedEvaluation:
    n = bin_count(t0, t1, m)
    detected = bin_timestamps(detected_timestamps, t0, t1, m)
    tp, fp, fn, tn, precision, recall, f1 = score(truth_bins, detected, n)
    return BinnedEvaluation(
        t0=t0,
        t1=t1,
        m=m,
        n_bins=n,
        truth_bins=frozenset(truth_bins),
        detected_bins=frozenset(detected),
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        precision=precision,
        recall=recall,
        f1=f1,
    )


@dataclass(frozen=True)
class EvaluationRow:
    incident: str
    collector: str
    detector: str
    evaluation: BinnedEvaluation


def evaluate_incident(
    reports: Mapping[str, AnomalyReport],
    window: IncidentWindow,
    bounds: tuple[int, int],
    m: int = DEFAULT_BIN_SECONDS,
) -> list[EvaluationRow]:
    """Score each detector's report against one incident window.

    All reports must target the same collector; ground truth bins come from
    the window by interval overlap.
    """
    t0, t1 = bounds
    truth = incident_bins(window, t0, t1, m)
    rows = []
    for detector_name in sorted(reports):
        report = reports[detector_name]
        rows.append(
            EvaluationRow(
                incident=window.name,
                collector=report.collector,
                detector=detector_name,
                evaluation=evaluate_window(
                    truth, report.anomalous_timestamps, t0, t1, m
                ),
            )
        )
    return rows


def _fmt_metric(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def write_results_csv(rows: Iterable[EvaluationRow], out: IO[str]) -> None:
    out.write("incident,collector,detector,precision,recall,f1,tp,fp,fn,tn\n")
    for row in rows:
        ev = row.evaluation
        out.write(
            f"{row.incident},{row.collector},{row.detector},"
            f"{_fmt_metric(ev.precision)},{_fmt_metric(ev.recall)},{_fmt_metric(ev.f1)},"
            f"{ev.tp},{ev.fp},{ev.fn},{ev.tn}\n"
        )
