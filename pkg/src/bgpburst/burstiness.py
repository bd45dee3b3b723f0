"""Inter-arrival burstiness statistics and their significance testing.

The burstiness coefficient maps an inter-arrival distribution onto [-1, 1]:
-1 for perfectly regular gaps, 0 for memoryless (exponential) gaps, and
towards +1 as the gaps become heavy-tailed.  Short series bias the raw
coefficient, so a finite-sample correction parameterized by the event count
is applied before any cross-AS comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .events import EventSeries

DEFAULT_MIN_EVENTS = 5


class UndefinedStatisticError(ValueError):
    """mu and sigma are both zero (or there are no intervals at all)."""


class InsufficientDataError(ValueError):
    """Fewer events than the minimum required for a corrected coefficient."""


class DegenerateTableError(ValueError):
    """A joint activity table needs at least two qualifying ASes."""


class InsufficientNullDataError(ValueError):
    """Too few usable null windows to run the significance test."""


@dataclass(frozen=True)
class InterArrivalSample:
    """Gaps between consecutive events plus the underlying event count."""

    intervals: tuple[float, ...]
    n_events: int

    def __post_init__(self):
        if self.n_events >= 1 and len(self.intervals) != self.n_events - 1:
            raise ValueError("expected n_events - 1 intervals")
        if any(iv < 0 for iv in self.intervals):
            raise ValueError("negative inter-arrival interval")


@dataclass(frozen=True)
class BurstinessResult:
    mu: float
    sigma: float
    b_raw: float
    b_corrected: float | None
    n_events: int


def inter_arrivals(series: EventSeries) -> InterArrivalSample:
    """Consecutive timestamp differences; zero gaps are kept."""
    ts = series.timestamps
    gaps = tuple(float(ts[i + 1] - ts[i]) for i in range(len(ts) - 1))
    return InterArrivalSample(gaps, len(ts))


def burstiness_raw(sample: InterArrivalSample | Sequence[float]) -> float:
    """(sigma - mu) / (sigma + mu) of the intervals, population sigma."""
    intervals = sample.intervals if isinstance(sample, InterArrivalSample) else sample
    if len(intervals) == 0:
        raise UndefinedStatisticError("no intervals")
    arr = np.asarray(intervals, dtype=float)
    mu = float(arr.mean())
    sigma = float(arr.std())  # population (divide by count)
    if sigma + mu == 0.0:
        raise UndefinedStatisticError("all intervals are zero")
    return (sigma - mu) / (sigma + mu)


def finite_size_correction(b_raw: float, n_events: int) -> float:
    """Rescale a raw coefficient measured from n_events onto the asymptotic scale.

    The map fixes -1 (regular series stay regular), sends the small-sample
    expectation of a memoryless process to 0, and converges to the identity
    as n_events grows.
    """
    sp = math.sqrt(n_events + 1)
    sm = math.sqrt(n_events - 1)
    num = sp - sm + (sp + sm) * b_raw
    den = sp + sm - 2 + (sp - sm - 2) * b_raw
    return num / den


def burstiness_corrected(
    sample: InterArrivalSample, min_events: int = DEFAULT_MIN_EVENTS
) -> float:
    if sample.n_events < min_events:
        raise InsufficientDataError(
            f"{sample.n_events} events < required minimum {min_events}"
        )
    return finite_size_correction(burstiness_raw(sample), sample.n_events)


def burstiness_result(
    sample: InterArrivalSample, min_events: int = DEFAULT_MIN_EVENTS
) -> BurstinessResult:
    """Full summary for one sample; b_corrected is None below min_events."""
    arr = np.asarray(sample.intervals, dtype=float)
    if arr.size == 0:
        raise UndefinedStatisticError("no intervals")
    mu = float(arr.mean())
    sigma = float(arr.std())
    if sigma + mu == 0.0:
        raise UndefinedStatisticError("all intervals are zero")
    b_raw = (sigma - mu) / (sigma + mu)
    b_corr = None
    if sample.n_events >= min_events:
        b_corr = finite_size_correction(b_raw, sample.n_events)
    return BurstinessResult(mu, sigma, b_raw, b_corr, sample.n_events)


def series_burstiness(
    series: EventSeries, min_events: int = DEFAULT_MIN_EVENTS
) -> BurstinessResult:
    return burstiness_result(inter_arrivals(series), min_events)


@dataclass(frozen=True)
class ActivityRow:
    asn: int
    b_corrected: float
    count: int
    quadrant: int


@dataclass(frozen=True)
class JointActivityTable:
    """Per-AS burstiness vs announcement volume over one window, with the
    two 95th-percentile thresholds that cut the plane into quadrants."""

    window: tuple[int, int]
    rows: tuple[ActivityRow, ...]
    b_p95: float
    count_p95: float
    skipped: tuple[tuple[int, int], ...] = ()  # (asn, count) below min_events


def _quadrant(b: float, count: int, b_p95: float, count_p95: float) -> int:
    high_b = b > b_p95
    high_count = count > count_p95
    if high_b and high_count:
        return 1
    if high_count:
        return 2
    if high_b:
        return 4
    return 3


def joint_distribution(
    corpus: Iterable[EventSeries],
    window: tuple[int, int],
    min_events: int = DEFAULT_MIN_EVENTS,
    percentile: float = 95.0,
) -> JointActivityTable:
    """Quadrant table of corrected burstiness vs announcement count per AS.

    All series must come from a single collector.  ASes with fewer than
    min_events announcements inside the window are excluded from both the
    rows and the percentile thresholds, and reported in `skipped`.
    """
    start, end = window
    if start >= end:
        raise ValueError("window start must precede end")
    collector = None
    seen: set[int] = set()
    qualifying: list[tuple[int, float, int]] = []
    skipped: list[tuple[int, int]] = []
    for series in corpus:
        if collector is None:
            collector = series.collector
        elif series.collector != collector:
            raise ValueError(
                f"mixed collectors in corpus: {collector!r} vs {series.collector!r}"
            )
        if series.origin_asn in seen:
            raise ValueError(f"duplicate series for AS{series.origin_asn}")
        seen.add(series.origin_asn)
        windowed = series.restrict(start, end)
        count = len(windowed)
        if count < min_events:
            skipped.append((series.origin_asn, count))
            continue
        b = burstiness_corrected(inter_arrivals(windowed), min_events)
        qualifying.append((series.origin_asn, b, count))
    if len(qualifying) < 2:
        raise DegenerateTableError(
            f"only {len(qualifying)} ASes with >= {min_events} announcements in window"
        )
    b_p95 = float(np.percentile([b for _, b, _ in qualifying], percentile))
    count_p95 = float(np.percentile([c for _, _, c in qualifying], percentile))
    rows = tuple(
        ActivityRow(asn, b, count, _quadrant(b, count, b_p95, count_p95))
        for asn, b, count in sorted(qualifying)
    )
    return JointActivityTable(
        window=(start, end),
        rows=rows,
        b_p95=b_p95,
        count_p95=count_p95,
        skipped=tuple(sorted(skipped)),
    )


def write_joint_csv(table: JointActivityTable, out: IO[str]) -> None:
    out.write("asn,b_corrected,count,quadrant\n")
    for row in table.rows:
        out.write(f"{row.asn},{row.b_corrected:.6f},{row.count},{row.quadrant}\n")


def joint_sidecar(table: JointActivityTable) -> dict:
    return {
        "window": list(table.window),
        "b_p95": table.b_p95,
        "count_p95": table.count_p95,
        "n_rows": len(table.rows),
        "skipped": [{"asn": asn, "count": count} for asn, count in table.skipped],
    }


@dataclass(frozen=True)
class SignificanceResult:
    """Rank-based two-sided test of an observed burstiness against null windows."""

    observed_b: float
    null_samples: tuple[float, ...]
    empirical_p: float
    significant: bool
    alpha_sig: float
    skipped_windows: int = 0

    def as_dict(self) -> dict:
        return {
            "observed_b": self.observed_b,
            "null_samples": list(self.null_samples),
            "empirical_p": self.empirical_p,
            "significant": self.significant,
            "alpha_sig": self.alpha_sig,
            "skipped_windows": self.skipped_windows,
        }


def monte_carlo_null_test(
    null_windows: Iterable[EventSeries],
    observed: BurstinessResult,
    k: int = 100,
    alpha_sig: float = 0.05,
    min_events: int = DEFAULT_MIN_EVENTS,
    min_usable: int = 20,
) -> SignificanceResult:
    """Compare observed corrected burstiness with up to k no-incident windows.

    The p-value is the rank-based tail probability (1 + worse) / (1 + k) on
    whichever side the observation falls; significance at level alpha_sig
    means the observation sits outside the central 1 - alpha_sig band of the
    null distribution, i.e. the tail p-value is at most alpha_sig / 2.
    """
    if observed.b_corrected is None:
        raise InsufficientDataError("observed window lacks a corrected coefficient")
    nulls: list[float] = []
    skipped = 0
    for series in null_windows:
        if len(nulls) == k:
            break
        if len(series) < min_events:
            skipped += 1
            continue
        try:
            nulls.append(burstiness_corrected(inter_arrivals(series), min_events))
        except UndefinedStatisticError:
            skipped += 1
    if len(nulls) < min_usable:
        raise InsufficientNullDataError(
            f"{len(nulls)} usable null windows < required {min_usable}"
        )
    obs = observed.b_corrected
    n = len(nulls)
    p_upper = (1 + sum(1 for x in nulls if x >= obs)) / (1 + n)
    p_lower = (1 + sum(1 for x in nulls if x <= obs)) / (1 + n)
    empirical_p = min(p_upper, p_lower)
    return SignificanceResult(
        observed_b=obs,
        null_samples=tuple(nulls),
        empirical_p=empirical_p,
        significant=empirical_p <= alpha_sig / 2.0,
        alpha_sig=alpha_sig,
        skipped_windows=skipped,
    )


def write_significance_json(result: SignificanceResult, out: IO[str]) -> None:
    json.dump(result.as_dict(), out, indent=2, sort_keys=True)
    out.write("\n")
