"""Readers and writers for the CSV / JSONL interchange formats.

Coordinates travel as fixed 6-decimal strings and are held internally as
integer micro-degrees, so a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import Area, GeoPoint, check_person_id, check_timestamp
from .errors import ValidationError

POINTS_HEADER = ["person_id", "lat", "lon", "ts"]
PATIENTS_HEADER = ["person_id", "status", "confirmed_at"]
INTERVALS_HEADER = ["person_id", "area_id", "entry_ts", "exit_ts"]
ZONES_HEADER = ["zone_id", "lat", "lon", "radius_m"]
AREAS_HEADER = ["area_id", "lat", "lon", "radius_m"]


def to_micro(deg):
    """Degrees -> integer micro-degrees (round half to even)."""
    if np.ndim(deg) == 0:
        return int(round(float(deg) * 1e6))
    return np.rint(np.asarray(deg, dtype=np.float64) * 1e6).astype(np.int64)


def fmt6(micro: int) -> str:
    sign = "-" if micro < 0 else ""
    whole, frac = divmod(abs(micro), 1_000_000)
    return f"{sign}{whole}.{frac:06d}"


def _open_rows(path, header):
    f = open(path, newline="", encoding="utf-8")
    reader = csv.reader(f)
    got = next(reader, None)
    if got is None:
        f.close()
        return None, iter(())
    if [h.strip() for h in got] != header:
        f.close()
        raise ValidationError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
    return f, reader


def read_points_csv(path):
    """Return column lists ``(person_ids, lat, lon, ts)``; lat/lon as float arrays."""
    f, reader = _open_rows(path, POINTS_HEADER)
    persons, lats, lons, tss = [], [], [], []
    try:
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValidationError(f"{path}:{n}: expected 4 fields")
            persons.append(row[0])
            lats.append(row[1])
            lons.append(row[2])
            tss.append(row[3])
    finally:
        if f is not None:
            f.close()
    try:
        lat = np.array(lats, dtype=np.float64)
        lon = np.array(lons, dtype=np.float64)
        ts = np.array(tss, dtype=np.int64)
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed numeric field ({exc})") from None
    return persons, lat, lon, ts


def parse_points_jsonl(text: str):
    persons, lats, lons, tss = [], [], [], []
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            persons.append(obj["person_id"])
            lats.append(float(obj["lat"]))
            lons.append(float(obj["lon"]))
            tss.append(check_timestamp(obj["ts"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValidationError(f"line {n}: bad trajectory record ({exc})") from None
    return (persons, np.array(lats, dtype=np.float64), np.array(lons, dtype=np.float64),
            np.array(tss, dtype=np.int64))


def read_points(path):
    path = Path(path)
    if path.suffix in (".jsonl", ".ndjson"):
        return parse_points_jsonl(path.read_text(encoding="utf-8"))
    return read_points_csv(path)


def points_csv_lines(persons, lat6, lon6, ts):
    """Yield CSV body lines for columns (person ids already resolved to strings)."""
    for p, a, o, t in zip(persons, np.asarray(lat6).tolist(), np.asarray(lon6).tolist(), np.asarray(ts).tolist()):
        yield f"{p},{fmt6(a)},{fmt6(o)},{t}\n"


def write_points_csv(path, persons, lat6, lon6, ts, append=False):
    path = Path(path)
    new = not append or not path.exists() or path.stat().st_size == 0
    with open(path, "a" if append else "w", encoding="utf-8", newline="") as f:
        if new:
            f.write(",".join(POINTS_HEADER) + "\n")
        f.writelines(points_csv_lines(persons, lat6, lon6, ts))


def read_patients_csv(path):
    f, reader = _open_rows(path, PATIENTS_HEADER)
    out = []
    try:
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"{path}:{n}: expected 3 fields")
            try:
                out.append((check_person_id(row[0]), row[1], check_timestamp(int(row[2]))))
            except ValueError as exc:
                raise ValidationError(f"{path}:{n}: {exc}") from None
    finally:
        if f is not None:
            f.close()
    return out


def write_patients_csv(path, records):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(PATIENTS_HEADER) + "\n")
        for r in records:
            f.write(f"{r.person},{r.status.value},{r.confirmed_at}\n")


def _read_circles(path, header):
    f, reader = _open_rows(path, header)
    out = []
    try:
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append((row[0], GeoPoint(float(row[1]), float(row[2])), float(row[3])))
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"{path}:{n}: {exc}") from None
    finally:
        if f is not None:
            f.close()
    return out


def read_areas_csv(path) -> list[Area]:
    return [Area(a, c, r) for a, c, r in _read_circles(path, AREAS_HEADER)]


def write_areas_csv(path, areas):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(AREAS_HEADER) + "\n")
        for a in areas:
            f.write(f"{a.area_id},{fmt6(to_micro(a.center.lat))},{fmt6(to_micro(a.center.lon))},{a.radius!r}\n")


def read_zones_csv(path):
    from .ingest import ExclusionZone

    return [ExclusionZone(z, c, r) for z, c, r in _read_circles(path, ZONES_HEADER)]


def read_intervals_csv(path):
    """Rows as ``(person_id, area_id, entry_ts, exit_ts)``; area resolution is the caller's job."""
    f, reader = _open_rows(path, INTERVALS_HEADER)
    out = []
    try:
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append((row[0], row[1], int(row[2]), int(row[3])))
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"{path}:{n}: {exc}") from None
    finally:
        if f is not None:
            f.close()
    return out


def parse_intervals_jsonl(text: str):
    out = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            out.append((obj["person_id"], obj["area_id"], check_timestamp(obj["entry_ts"]),
                        check_timestamp(obj["exit_ts"])))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValidationError(f"line {n}: bad interval record ({exc})") from None
    return out


def read_kv(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{path}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def write_kv(path, items: dict):
    with open(path, "w", encoding="utf-8", newline="") as f:
        for k, v in items.items():
            f.write(f"{k}={v}\n")
