"""Event-log ingestion and the discrete event space.

Raw activity records are timestamped geo-events.  Binning truncates
coordinates to a fixed number of decimal digits and splits the observed
time span into equal-width bins; the cross product of spatial cell and
time bin is one categorical event.  Each (domain, user) pair becomes one
*view*: a sparse vector of event counts over the shared vocabulary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Mapping

import numpy as np

__all__ = [
    "ActivityLogError",
    "ActivityRecord",
    "Granularity",
    "View",
    "Vocabulary",
    "bin_spatial",
    "bin_temporal",
    "build_event_space",
    "l1_distance",
    "overlap_stats",
    "parse_activity_log",
    "relative_frequency",
]

DOMAINS = ("X", "Y")


class ActivityLogError(ValueError):
    """Malformed activity-log input; carries the offending line and field."""

    def __init__(self, message: str, line: int, fieldname: str | None = None):
        self.line = line
        self.fieldname = fieldname
        where = f"line {line}" + (f", field {fieldname}" if fieldname else "")
        super().__init__(f"{message} ({where})")


@dataclass(frozen=True)
class ActivityRecord:
    """One raw event: a (domain, user, time, GPS coordinate) tuple."""

    domain: str
    user_id: str
    timestamp: int
    lat: float
    lon: float

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat out of range: {self.lat!r}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"lon out of range: {self.lon!r}")


@dataclass(frozen=True)
class Granularity:
    """Resolution of the event space.

    ``spatial_digits`` counts decimal digits kept after truncating each
    coordinate; ``temporal_bins`` is the number of equal-width bins over
    the observed time span.
    """

    spatial_digits: int
    temporal_bins: int

    def __post_init__(self):
        if not 0 <= self.spatial_digits <= 6:
            raise ValueError("spatial_digits must be in [0, 6]")
        if self.temporal_bins < 1:
            raise ValueError("temporal_bins must be >= 1")


@dataclass
class Vocabulary:
    """Dense bijection between event keys and integer ids ``0..W-1``."""

    event_to_index: dict[str, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.event_to_index)

    def add(self, key: str) -> int:
        """Return the id for ``key``, assigning the next dense id if new."""
        idx = self.event_to_index.get(key)
        if idx is None:
            idx = len(self.event_to_index)
            self.event_to_index[key] = idx
        return idx

    @classmethod
    def identity(cls, n_events: int) -> "Vocabulary":
        """Trivial vocabulary over abstract event ids (synthetic corpora)."""
        return cls({str(i): i for i in range(n_events)})


@dataclass(frozen=True)
class View:
    """One entity's event sequence in one domain, reduced to counts."""

    view_id: str
    domain: str
    counts: dict[int, int]
    total: int

    @classmethod
    def from_counts(cls, view_id: str, domain: str, counts: Mapping[int, int]) -> "View":
        clean = {int(w): int(c) for w, c in sorted(counts.items())}
        if any(c <= 0 for c in clean.values()):
            raise ValueError(f"view {view_id!r}: counts must be strictly positive")
        total = sum(clean.values())
        if total <= 0:
            raise ValueError(f"view {view_id!r} is empty")
        return cls(view_id=view_id, domain=domain, counts=clean, total=total)

    @cached_property
    def event_ids(self) -> np.ndarray:
        return np.fromiter(self.counts.keys(), dtype=np.int64, count=len(self.counts))

    @cached_property
    def event_counts(self) -> np.ndarray:
        return np.fromiter(self.counts.values(), dtype=np.float64, count=len(self.counts))


def parse_activity_log(stream: IO[str] | Iterable[str]) -> list[ActivityRecord]:
    """Parse a comma-separated activity log into records, preserving order.

    One record per line: ``domain,user_id,timestamp,lat,lon`` with domain in
    {X, Y}, no header.  Lines starting with ``#`` and blank lines are skipped.
    """
    records: list[ActivityRecord] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ActivityLogError(f"expected 5 fields, got {len(parts)}", lineno)
        domain, user_id, ts_s, lat_s, lon_s = (p.strip() for p in parts)
        if domain not in DOMAINS:
            raise ActivityLogError(f"unknown domain {domain!r}", lineno, "domain")
        if not user_id:
            raise ActivityLogError("empty user id", lineno, "user_id")
        try:
            timestamp = int(ts_s)
        except ValueError:
            raise ActivityLogError(f"invalid timestamp {ts_s!r}", lineno, "timestamp") from None
        if timestamp < 0:
            raise ActivityLogError("timestamp must be >= 0", lineno, "timestamp")
        try:
            lat = float(lat_s)
        except ValueError:
            raise ActivityLogError(f"invalid latitude {lat_s!r}", lineno, "lat") from None
        try:
            lon = float(lon_s)
        except ValueError:
            raise ActivityLogError(f"invalid longitude {lon_s!r}", lineno, "lon") from None
        if not -90.0 <= lat <= 90.0:
            raise ActivityLogError(f"latitude out of range: {lat!r}", lineno, "lat")
        if not -180.0 <= lon <= 180.0:
            raise ActivityLogError(f"longitude out of range: {lon!r}", lineno, "lon")
        records.append(ActivityRecord(domain, user_id, timestamp, lat, lon))
    return records


def _truncate(value: float, digits: int) -> str:
    # Truncation toward zero; -0.0 collapses onto 0.0 so the cells straddling
    # zero form a single cell.  The pre-truncation snap absorbs float dust
    # like 0.29 * 100 == 28.999999999999996.
    scaled = round(value * 10**digits, 9)
    units = math.trunc(scaled)
    if digits == 0:
        return str(units)
    s = str(abs(units)).zfill(digits + 1)
    sign = "-" if units < 0 else ""
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


def bin_spatial(lat: float, lon: float, spatial_digits: int) -> str:
    """Spatial cell key: both coordinates truncated to ``spatial_digits`` decimals."""
    if not -90.0 <= lat <= 90.0:
        raise ValueError(f"lat out of range: {lat!r}")
    if not -180.0 <= lon <= 180.0:
        raise ValueError(f"lon out of range: {lon!r}")
    if not 0 <= spatial_digits <= 6:
        raise ValueError("spatial_digits must be in [0, 6]")
    return f"{_truncate(lat, spatial_digits)},{_truncate(lon, spatial_digits)}"


def bin_temporal(timestamp: int, span_start: int, span_end: int, temporal_bins: int) -> int:
    """Equal-width time bin of ``timestamp`` within ``[span_start, span_end]``.

    The right edge of the span is clamped into the last bin.
    """
    if temporal_bins < 1:
        raise ValueError("temporal_bins must be >= 1")
    if span_end <= span_start:
        raise ValueError("span_end must exceed span_start")
    if not span_start <= timestamp <= span_end:
        raise ValueError(f"timestamp {timestamp} outside span [{span_start}, {span_end}]")
    idx = (temporal_bins * (timestamp - span_start)) // (span_end - span_start)
    return min(int(idx), temporal_bins - 1)


def event_key(cell: str, time_bin: int) -> str:
    """Categorical event key: spatial cell crossed with time bin."""
    return f"{cell}|{time_bin}"


def build_event_space(
    records: Iterable[ActivityRecord], granularity: Granularity
) -> tuple[Vocabulary, list[View]]:
    """Bin records at the given granularity and build per-(domain, user) views.

    The time span for binning is ``[min, max]`` timestamp over the union of
    both domains, so X and Y views share time bins.  Vocabulary ids are
    assigned in first-seen order; every record contributes exactly one count.
    """
    records = list(records)
    if not records:
        raise ValueError("record list must be non-empty")
    span_start = min(r.timestamp for r in records)
    span_end = max(r.timestamp for r in records)
    degenerate_span = span_end == span_start

    vocab = Vocabulary()
    counts: dict[tuple[str, str], dict[int, int]] = {}
    for rec in records:
        cell = bin_spatial(rec.lat, rec.lon, granularity.spatial_digits)
        tbin = 0 if degenerate_span else bin_temporal(
            rec.timestamp, span_start, span_end, granularity.temporal_bins
        )
        idx = vocab.add(event_key(cell, tbin))
        bucket = counts.setdefault((rec.domain, rec.user_id), {})
        bucket[idx] = bucket.get(idx, 0) + 1

    views = [
        View.from_counts(f"{domain}:{user}", domain, bucket)
        for (domain, user), bucket in counts.items()
    ]
    return vocab, views


def relative_frequency(view: View, n_events: int) -> np.ndarray:
    """Dense empirical distribution of a view over the full event space."""
    if view.total <= 0:
        raise ValueError(f"view {view.view_id!r} is empty")
    if n_events < len(view.counts) or (len(view.counts) and view.event_ids.max() >= n_events):
        raise ValueError("n_events smaller than the view support")
    probs = np.zeros(n_events, dtype=np.float64)
    probs[view.event_ids] = view.event_counts / view.total
    return probs


def l1_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation style L1 distance between two distributions, in [0, 2]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    return float(np.abs(p - q).sum())


def overlap_stats(x_view: View, y_view: View) -> tuple[int, float]:
    """Common-support size and L1 distance between two views' relative frequencies."""
    common = x_view.counts.keys() & y_view.counts.keys()
    l1 = 0.0
    for w in x_view.counts.keys() | y_view.counts.keys():
        px = x_view.counts.get(w, 0) / x_view.total
        py = y_view.counts.get(w, 0) / y_view.total
        l1 += abs(px - py)
    return len(common), l1


def merge_views(view_id: str, domain: str, views: Iterable[View]) -> View:
    """Element-wise sum of several views' counts into one view."""
    merged: dict[int, int] = {}
    for v in views:
        for w, c in v.counts.items():
            merged[w] = merged.get(w, 0) + c
    return View.from_counts(view_id, domain, merged)
