"""Seeded synthetic announcement streams and incident injection.

Streams come in three inter-arrival flavors (regular, poisson, pareto) plus
an update-batched background that mimics what collectors actually record:
update messages arrive as a Poisson process and each one announces a small
random batch of prefixes, so the per-second unique-prefix counts are noisy
the way real feeds are.  Incident injection overlays a sustained barrage of
distinct prefixes at a fixed short gap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .events import ANNOUNCEMENT, AnnouncementEvent, EventSeries

PROCESS_REGULAR = "regular"
PROCESS_POISSON = "poisson"
PROCESS_PARETO = "pareto"

_PROCESSES = (PROCESS_REGULAR, PROCESS_POISSON, PROCESS_PARETO)


@dataclass(frozen=True)
class GeneratorSpec:
    process: str
    mean_gap: float
    n_events: int
    start_ts: int
    asn: int
    collector: str
    seed: int
    pareto_alpha: float = 1.5

    def __post_init__(self):
        if self.process not in _PROCESSES:
            raise ValueError(f"unknown process {self.process!r}")
        if self.mean_gap <= 0:
            raise ValueError("mean_gap must be positive")
        if self.n_events < 1:
            raise ValueError("n_events must be >= 1")
        if self.process == PROCESS_PARETO and self.pareto_alpha <= 1:
            raise ValueError("pareto_alpha must exceed 1 for a finite mean")


@dataclass(frozen=True)
class IncidentSpec:
    start: int
    end: int
    burst_gap: int = 1
    prefixes_per_second: int = 1

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError("incident window must have positive length")
        if self.burst_gap <= 0:
            raise ValueError("burst_gap must be positive")
        if self.prefixes_per_second < 1:
            raise ValueError("prefixes_per_second must be >= 1")


def stream_prefix(asn: int) -> str:
    """Stable synthetic prefix for a background stream."""
    return f"10.{(asn >> 8) & 0xFF}.{asn & 0xFF}.0/24"


def _pool_prefix(index: int) -> str:
    return f"10.{(index >> 8) & 0xFF}.{index & 0xFF}.0/24"


def _incident_prefix(index: int) -> str:
    # 100.64.0.0/10 space, disjoint from the background pools.
    return f"100.{64 + (index >> 8)}.{index & 0xFF}.0/24"


def _gap_sampler(spec: GeneratorSpec, rng: random.Random):
    if spec.process == PROCESS_REGULAR:
        return lambda: spec.mean_gap
    if spec.process == PROCESS_POISSON:
        rate = 1.0 / spec.mean_gap
        return lambda: rng.expovariate(rate)
    alpha = spec.pareto_alpha
    minimum = spec.mean_gap * (alpha - 1.0) / alpha  # scale so the mean matches
    return lambda: minimum * (1.0 - rng.random()) ** (-1.0 / alpha)


def generate_timestamps(spec: GeneratorSpec) -> tuple[int, ...]:
    """n_events whole-second timestamps; the first lands on start_ts."""
    rng = random.Random(spec.seed)
    sample = _gap_sampler(spec, rng)
    t = float(spec.start_ts)
    out = [spec.start_ts]
    for _ in range(spec.n_events - 1):
        t += sample()
        out.append(int(round(t)))
    return tuple(out)


def generate_stream(spec: GeneratorSpec) -> list[AnnouncementEvent]:
    """Canonical announcement events for one synthetic stream."""
    prefix = stream_prefix(spec.asn)
    return [
        AnnouncementEvent(
            timestamp=ts,
            collector=spec.collector,
            prefix=prefix,
            kind=ANNOUNCEMENT,
            origin_asn=spec.asn,
        )
        for ts in generate_timestamps(spec)
    ]


def generate_series(spec: GeneratorSpec) -> EventSeries:
    return EventSeries(spec.asn, spec.collector, generate_timestamps(spec))


def incident_timestamps(incident: IncidentSpec) -> list[int]:
    """One timestamp per injected announcement, burst_gap apart, repeated
    prefixes_per_second times per active second."""
    out = []
    for tick in range(incident.start, incident.end, incident.burst_gap):
        out.extend([tick] * incident.prefixes_per_second)
    return out


def _check_span(series_span: tuple[int, int] | None, incident: IncidentSpec) -> None:
    if series_span is None:
        raise ValueError("cannot inject into an empty background")
    first, last = series_span
    if incident.start < first or incident.end > last + 1:
        raise ValueError(
            f"incident [{incident.start}, {incident.end}) outside "
            f"background span [{first}, {last}]"
        )


def inject_incident(background: EventSeries, incident: IncidentSpec) -> EventSeries:
    """Merge incident announcements into a background series, sorted."""
    _check_span(background.span, incident)
    merged = sorted(list(background.timestamps) + incident_timestamps(incident))
    return EventSeries(background.origin_asn, background.collector, tuple(merged))


def inject_incident_events(
    background: list[AnnouncementEvent], incident: IncidentSpec
) -> list[AnnouncementEvent]:
    """Event-level injection: distinct synthetic prefixes per active second."""
    if not background:
        raise ValueError("cannot inject into an empty background")
    stamps = sorted(ev.timestamp for ev in background)
    _check_span((stamps[0], stamps[-1]), incident)
    origin = background[0].origin_asn
    collector = background[0].collector
    injected = [
        AnnouncementEvent(
            timestamp=tick,
            collector=collector,
            prefix=_incident_prefix(i),
            kind=ANNOUNCEMENT,
            origin_asn=origin,
        )
        for tick in range(incident.start, incident.end, incident.burst_gap)
        for i in range(incident.prefixes_per_second)
    ]
    return sorted(background + injected, key=lambda ev: ev.timestamp)


def update_stream(
    asn: int,
    collector: str,
    start_ts: int,
    duration: int,
    mean_gap: float,
    seed: int,
    batch_continue: float = 0.45,
    batch_cap: int = 16,
    pool_size: int = 256,
) -> list[AnnouncementEvent]:
    """Poisson update arrivals where each update announces a prefix batch.

    Batch sizes are geometric (continue probability batch_continue, capped at
    batch_cap) over a pool of pool_size prefixes, which gives the per-second
    unique-prefix counts the spread seen on real collector feeds.
    """
    rng = random.Random(seed)
    rate = 1.0 / mean_gap
    end = start_ts + duration
    events = []
    t = float(start_ts)
    while True:
        ts = int(round(t))
        if ts >= end:
            break
        k = 1
        while k < batch_cap and rng.random() < batch_continue:
            k += 1
        for index in rng.sample(range(pool_size), k):
            events.append(
                AnnouncementEvent(
                    timestamp=ts,
                    collector=collector,
                    prefix=_pool_prefix(index),
                    kind=ANNOUNCEMENT,
                    origin_asn=asn,
                )
            )
        t += rng.expovariate(rate)
    return events


@dataclass(frozen=True)
class IncidentScenario:
    """A ready-to-score synthetic study: background + one injected incident."""

    events: list[AnnouncementEvent]
    asn: int
    collector: str
    bounds: tuple[int, int]
    incident_start: int
    incident_end: int


def incident_scenario(
    seed: int = 1,
    asn: int = 64500,
    collector: str = "synth-collector",
    start_ts: int = 1_400_000_000,
    days: int = 7,
    mean_gap: float = 600.0,
    incident_bin: int = 28,
    bin_seconds: int = 10800,
    burst_gap: int = 1,
    prefixes_per_second: int = 100,
) -> IncidentScenario:
    """Seven days of batched background plus a bin-aligned sustained burst."""
    duration = days * 86400
    incident_start = start_ts + incident_bin * bin_seconds
    incident = IncidentSpec(
        start=incident_start,
        end=incident_start + bin_seconds,
        burst_gap=burst_gap,
        prefixes_per_second=prefixes_per_second,
    )
    background = update_stream(asn, collector, start_ts, duration, mean_gap, seed)
    events = inject_incident_events(background, incident)
    return IncidentScenario(
        events=events,
        asn=asn,
        collector=collector,
        bounds=(start_ts, start_ts + duration),
        incident_start=incident.start,
        incident_end=incident.end,
    )
