"""Pre-storage filtering and normalisation of collected data.

Exclusion zones drop points the authority considers worthless (roads,
vehicles). Building entry/exit intervals are expanded to regular point
reports at the building center. ``dedup_stationary`` is the device-side
suppression rule the simulator applies before upload.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import Area, GeoPoint, TrajectoryPoint, check_timestamp, haversine, haversine_np
from .errors import ValidationError

KEEP = None


@dataclass(frozen=True, slots=True)
class ExclusionZone:
    zone_id: str
    center: GeoPoint
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError(f"zone radius must be > 0, got {self.radius}")


@dataclass(frozen=True, slots=True)
class IntervalRecord:
    person: str
    area: Area
    entry: int
    exit: int

    def __post_init__(self):
        check_timestamp(self.entry)
        check_timestamp(self.exit)
        if not self.entry < self.exit:
            raise ValidationError(f"interval entry {self.entry} must precede exit {self.exit}")


@dataclass(frozen=True, slots=True)
class DeviceReportConfig:
    report_period_x: int = 300
    stationary_radius_y: float = 2.0

    def __post_init__(self):
        if self.report_period_x < 0 or self.stationary_radius_y < 0:
            raise ValidationError("report period and stationary radius must be >= 0")


def filter_point(p: TrajectoryPoint, zones: Sequence[ExclusionZone]) -> str | None:
    """Return ``None`` (keep) or the id of the first zone that drops the point."""
    for z in zones:
        if haversine(z.center, p.loc) <= z.radius:
            return z.zone_id
    return KEEP


def zone_mask(lat, lon, zones: Sequence[ExclusionZone]) -> np.ndarray:
    """Vectorised keep-mask for point columns."""
    keep = np.ones(len(lat), dtype=bool)
    for z in zones:
        keep &= haversine_np(z.center.lat, z.center.lon, lat, lon) > z.radius
    return keep


@dataclass
class FilterStats:
    kept: int = 0
    dropped: int = 0


def filter_columns(persons, lat, lon, ts, zones, stats: FilterStats | None = None):
    if not zones:
        if stats is not None:
            stats.kept += len(ts)
        return persons, lat, lon, ts
    keep = zone_mask(lat, lon, zones)
    if stats is not None:
        stats.kept += int(keep.sum())
        stats.dropped += int((~keep).sum())
    idx = np.flatnonzero(keep)
    return [persons[i] for i in idx.tolist()], lat[keep], lon[keep], ts[keep]


def expand_interval(rec: IntervalRecord, delta_t: int) -> list[TrajectoryPoint]:
    if delta_t <= 0:
        raise ValidationError("interval expansion needs delta_t > 0")
    times = list(range(rec.entry, rec.exit + 1, delta_t))
    if times[-1] != rec.exit:
        times.append(rec.exit)
    return [TrajectoryPoint(rec.person, rec.area.center, t) for t in times]


def dedup_stationary(stream: Iterable[TrajectoryPoint], cfg: DeviceReportConfig) -> list[TrajectoryPoint]:
    """Drop reports of one person that are too soon or too close to the last kept one."""
    out: list[TrajectoryPoint] = []
    prev_t = None
    for p in stream:
        if prev_t is not None and p.time < prev_t:
            raise ValidationError(f"stream not sorted by time at t={p.time}")
        prev_t = p.time
        if out:
            last = out[-1]
            if p.time - last.time < cfg.report_period_x:
                continue
            if haversine(p.loc, last.loc) <= cfg.stationary_radius_y:
                continue
        out.append(p)
    return out
