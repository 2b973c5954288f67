"""Append-only trajectory log, health registry and immutable snapshots."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import (
    GeoPoint,
    ProximityConfig,
    TrajectoryPoint,
    check_person_id,
    check_timestamp,
    haversine_np,
)
from .errors import ConflictingDuplicate, DuplicateReport, IllegalTransition, ValidationError
from .index import GridIndex
from . import io

TS_BITS = 34
MAX_TS = (1 << TS_BITS) - 1
MIN_CELL_M = 10.0


class PatientStatus(str, Enum):
    ACTIVE = "active"
    RECOVERED = "recovered"
    DEAD = "dead"


_ALLOWED = {
    (PatientStatus.ACTIVE, PatientStatus.RECOVERED),
    (PatientStatus.ACTIVE, PatientStatus.DEAD),
}


@dataclass(frozen=True, slots=True)
class PatientRecord:
    person: str
    status: PatientStatus
    confirmed_at: int


@dataclass(frozen=True, slots=True)
class AppendReceipt:
    accepted: int
    duplicates: int


def _pack_loc(lat6, lon6):
    return ((lat6 + 90_000_000) << 30) | (lon6 + 180_000_000)


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


class TrajectoryStore:
    """Set-semantics point log keyed by (person, time), plus the patient registry.

    Mutations go through one lock (single writer). ``sink`` receives every
    accepted batch as ``(person_ids, lat6, lon6, ts)`` so a caller can persist
    the log.
    """

    def __init__(self, sink: Callable | None = None):
        self._ids: list[str] = []
        self._pidx: dict[str, int] = {}
        self._seen: dict[int, int] = {}
        self._chunks: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
        self._patients: dict[str, PatientRecord] = {}
        self._lock = threading.Lock()
        self.sink = sink

    # -- ingestion -----------------------------------------------------------

    def __len__(self):
        return len(self._seen)

    def _person_index(self, person: str) -> int:
        i = self._pidx.get(person)
        if i is None:
            check_person_id(person)
            i = len(self._ids)
            self._ids.append(person)
            self._pidx[person] = i
        return i

    def append_points(self, batch: Iterable[TrajectoryPoint]) -> AppendReceipt:
        batch = list(batch)
        return self.append_columns(
            [p.person for p in batch],
            np.array([p.loc.lat for p in batch], dtype=np.float64),
            np.array([p.loc.lon for p in batch], dtype=np.float64),
            np.array([p.time for p in batch], dtype=np.int64),
        )

    def append_columns(self, persons: Sequence[str], lat, lon, ts) -> AppendReceipt:
        """Bulk append. The whole batch is rejected if any row conflicts."""
        lat = np.asarray(lat, dtype=np.float64)
        lon = np.asarray(lon, dtype=np.float64)
        ts = np.asarray(ts, dtype=np.int64)
        n = len(persons)
        if not (len(lat) == len(lon) == len(ts) == n):
            raise ValidationError("column lengths differ")
        if n == 0:
            return AppendReceipt(0, 0)
        if not (np.all(np.abs(lat) <= 90.0) and np.all(np.abs(lon) <= 180.0)):
            raise ValidationError("coordinates out of range")
        if ts.min() < 0 or ts.max() > MAX_TS:
            raise ValidationError("timestamps must be in [0, 2^34)")
        lat6 = io.to_micro(lat)
        lon6 = io.to_micro(lon)

        with self._lock:
            uniq, inv = np.unique(np.asarray(persons, dtype=object).astype(str), return_inverse=True)
            n_ids_before = len(self._ids)
            try:
                umap = np.array([self._person_index(p) for p in uniq.tolist()], dtype=np.int64)
            except ValidationError:
                self._rollback_ids(n_ids_before)
                raise
            pidx = umap[inv]
            keys = ((pidx << TS_BITS) | ts).tolist()
            vals = _pack_loc(lat6, lon6).tolist()

            seen = self._seen
            accepted = np.zeros(n, dtype=bool)
            inserted = []
            conflict = None
            for i, (k, v) in enumerate(zip(keys, vals)):
                old = seen.get(k)
                if old is None:
                    seen[k] = v
                    inserted.append(k)
                    accepted[i] = True
                elif old != v:
                    conflict = i
                    break
            if conflict is not None:
                for k in inserted:
                    del seen[k]
                self._rollback_ids(n_ids_before)
                i = conflict
                raise ConflictingDuplicate(
                    f"point ({persons[i]}, t={int(ts[i])}) conflicts with a stored location"
                )
            cols = (pidx[accepted], lat6[accepted], lon6[accepted], ts[accepted])
            if len(cols[0]):
                self._chunks.append(cols)
                if self.sink is not None:
                    ids = self._ids
                    self.sink([ids[j] for j in cols[0].tolist()], cols[1], cols[2], cols[3])
            n_acc = int(accepted.sum())
            return AppendReceipt(n_acc, n - n_acc)

    def _rollback_ids(self, n_before):
        for p in self._ids[n_before:]:
            del self._pidx[p]
        del self._ids[n_before:]

    # -- health registry -----------------------------------------------------

    def report_patient(self, person: str, confirmed_at: int) -> PatientRecord:
        check_person_id(person)
        confirmed_at = check_timestamp(confirmed_at)
        with self._lock:
            cur = self._patients.get(person)
            if cur is not None and cur.status is PatientStatus.ACTIVE:
                raise DuplicateReport(f"{person} is already an active patient")
            rec = PatientRecord(person, PatientStatus.ACTIVE, confirmed_at)
            self._patients[person] = rec
            return rec

    def update_status(self, person: str, new_status) -> PatientRecord:
        try:
            new_status = PatientStatus(new_status)
        except ValueError:
            raise ValidationError(f"unknown status {new_status!r}") from None
        with self._lock:
            cur = self._patients.get(person)
            if cur is None or (cur.status, new_status) not in _ALLOWED:
                have = "no record" if cur is None else cur.status.value
                raise IllegalTransition(f"{person}: {have} -> {new_status.value} not allowed")
            rec = PatientRecord(person, new_status, cur.confirmed_at)
            self._patients[person] = rec
            return rec

    def restore_patient(self, rec: PatientRecord):
        """Load a record verbatim (persistence path, no transition checks)."""
        self._patients[rec.person] = rec

    @property
    def patients(self) -> list[PatientRecord]:
        return sorted(self._patients.values(), key=lambda r: r.person)

    # -- reads ---------------------------------------------------------------

    def _columns(self):
        with self._lock:
            if len(self._chunks) > 1:
                self._chunks = [tuple(np.concatenate(c) for c in zip(*self._chunks))]
            ids = list(self._ids)
            patients = list(self._patients.values())
            if not self._chunks:
                e = np.empty(0, dtype=np.int64)
                return ids, patients, (e, e, e, e)
            return ids, patients, self._chunks[0]

    def snapshot(self, as_of: int, proximity: ProximityConfig | None = None) -> "StoreSnapshot":
        as_of = check_timestamp(as_of)
        ids, patients, (pidx, lat6, lon6, ts) = self._columns()
        keep = ts <= as_of
        pidx, lat6, lon6, ts = pidx[keep], lat6[keep], lon6[keep], ts[keep]
        patients = [r for r in patients if r.confirmed_at <= as_of]
        return StoreSnapshot.from_columns(ids, pidx, lat6, lon6, ts, patients, as_of,
                                          proximity or ProximityConfig())

    @classmethod
    def load(cls, directory, sink=None) -> "TrajectoryStore":
        directory = Path(directory)
        store = cls()
        if (directory / "points.csv").exists():
            persons, lat, lon, ts = io.read_points_csv(directory / "points.csv")
            store.append_columns(persons, lat, lon, ts)
        if (directory / "patients.csv").exists():
            for person, status, confirmed_at in io.read_patients_csv(directory / "patients.csv"):
                store.restore_patient(PatientRecord(person, PatientStatus(status), confirmed_at))
        store.sink = sink
        return store


class StoreSnapshot:
    """Immutable view at ``as_of``: points sorted by (person id, time).

    Person ids live in ``persons`` (sorted); ``pidx`` holds positions into it.
    Patients without trajectory points are included in ``persons`` too.
    """

    def __init__(self, persons, pidx, lat6, lon6, ts, patients, as_of, proximity):
        self.persons: tuple[str, ...] = tuple(persons)
        self.person_index = {p: i for i, p in enumerate(self.persons)}
        self.pidx = _frozen(pidx)
        self.lat6 = _frozen(lat6)
        self.lon6 = _frozen(lon6)
        self.ts = _frozen(ts)
        self.lat = _frozen(lat6 / 1e6)
        self.lon = _frozen(lon6 / 1e6)
        self.patients: tuple[PatientRecord, ...] = tuple(sorted(patients, key=lambda r: r.person))
        self.as_of = int(as_of)
        self.proximity = proximity
        self._indexes: dict[tuple[float, int], GridIndex] = {}
        # point range per person (points are grouped by pidx)
        bounds = np.searchsorted(self.pidx, np.arange(len(self.persons) + 1))
        self._bounds = bounds

    @classmethod
    def from_columns(cls, ids, pidx, lat6, lon6, ts, patients, as_of, proximity):
        """Build from columns whose ``pidx`` indexes into ``ids`` (any order)."""
        used = np.unique(pidx)
        persons = sorted({ids[i] for i in used.tolist()} | {r.person for r in patients})
        rank = {p: i for i, p in enumerate(persons)}
        remap = np.full(max(len(ids), 1), -1, dtype=np.int64)
        for i in used.tolist():
            remap[i] = rank[ids[i]]
        pidx = remap[pidx] if len(pidx) else np.asarray(pidx, dtype=np.int64)
        order = np.lexsort((ts, pidx))
        return cls(persons, pidx[order], lat6[order], lon6[order], ts[order], patients, as_of, proximity)

    def __len__(self):
        return len(self.ts)

    def __eq__(self, other):
        if not isinstance(other, StoreSnapshot):
            return NotImplemented
        return (self.persons == other.persons and self.patients == other.patients
                and self.as_of == other.as_of
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("pidx", "lat6", "lon6", "ts")))

    def point(self, i: int) -> TrajectoryPoint:
        return TrajectoryPoint(self.persons[self.pidx[i]], GeoPoint(self.lat[i], self.lon[i]), int(self.ts[i]))

    def points(self) -> Iterable[TrajectoryPoint]:
        for i in range(len(self.ts)):
            yield self.point(i)

    def person_range(self, person_idx: int) -> tuple[int, int]:
        return int(self._bounds[person_idx]), int(self._bounds[person_idx + 1])

    def person_points(self, person: str) -> list[TrajectoryPoint]:
        j = self.person_index.get(person)
        if j is None:
            return []
        lo, hi = self.person_range(j)
        return [self.point(i) for i in range(lo, hi)]

    def index(self, proximity: ProximityConfig | None = None) -> GridIndex:
        proximity = proximity or self.proximity
        key = (max(proximity.epsilon, MIN_CELL_M), proximity.delta_t)
        idx = self._indexes.get(key)
        if idx is None:
            idx = GridIndex(self.lat, self.lon, self.ts, key[0], key[1])
            self._indexes[key] = idx
        return idx

    # -- persistence ---------------------------------------------------------

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        io.write_points_csv(directory / "points.csv", [self.persons[i] for i in self.pidx.tolist()],
                            self.lat6, self.lon6, self.ts)
        io.write_patients_csv(directory / "patients.csv", self.patients)
        io.write_kv(directory / "meta", {
            "as_of": self.as_of,
            "epsilon": repr(float(self.proximity.epsilon)),
            "delta_t": self.proximity.delta_t,
        })

    @classmethod
    def load(cls, directory) -> "StoreSnapshot":
        directory = Path(directory)
        meta = io.read_kv(directory / "meta")
        persons, lat, lon, ts = io.read_points_csv(directory / "points.csv")
        patients = [PatientRecord(p, PatientStatus(s), c)
                    for p, s, c in io.read_patients_csv(directory / "patients.csv")]
        prox = ProximityConfig(float(meta["epsilon"]), int(meta["delta_t"]))
        ids, pidx = np.unique(np.asarray(persons, dtype=str), return_inverse=True) if persons else ([], [])
        return cls.from_columns(list(ids), np.asarray(pidx, dtype=np.int64), io.to_micro(lat),
                                io.to_micro(lon), ts, patients, int(meta["as_of"]), prox)


def candidates_near(p: TrajectoryPoint, cfg: ProximityConfig, snap: StoreSnapshot) -> list[TrajectoryPoint]:
    """All snapshot points of other persons co-located with ``p``."""
    if len(snap) == 0:
        return []
    idx = snap.index(cfg)
    lat = io.to_micro(p.loc.lat) / 1e6
    lon = io.to_micro(p.loc.lon) / 1e6
    _, cand = idx.probe([lat], [lon], [p.time])
    if len(cand) == 0:
        return []
    cand = np.sort(cand)
    d = haversine_np(lat, lon, snap.lat[cand], snap.lon[cand])
    me = snap.person_index.get(p.person, -1)
    ok = (d <= cfg.epsilon) & (np.abs(snap.ts[cand] - p.time) <= cfg.delta_t) & (snap.pidx[cand] != me)
    return [snap.point(i) for i in cand[ok].tolist()]
