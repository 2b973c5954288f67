"""Investigation algorithms over a store snapshot.

* :func:`classify_suspects` partitions the population into distance classes:
  class 0 holds the active patients, class ``d`` everyone whose shortest chain
  of co-location contacts to a patient has length ``d``. Only contacts whose
  time lies within the incubation period before the current date count.
* :func:`find_black_areas` counts distinct patients per public area.
* :func:`suspects_from_black_areas` lists the non-patient visitors of every
  black area.
* :func:`query_person` answers a single person's status without revealing
  anyone else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import Area, ProximityConfig, haversine_np
from .errors import NoPatients, UnknownPerson, ValidationError
from .index import GridIndex
from .store import MIN_CELL_M, PatientStatus, StoreSnapshot

DAY = 86_400
PROBE_CHUNK = 100_000
_NEVER = np.iinfo(np.int64).max
_ALWAYS = np.iinfo(np.int64).min


@dataclass(frozen=True)
class InvestigationConfig:
    current_date: int
    incubation_period: int = 14 * DAY
    proximity: ProximityConfig = field(default_factory=ProximityConfig)
    alpha: int = 3
    black_area_window: int | None = None
    causal_ordering: bool = False

    def __post_init__(self):
        if self.incubation_period <= 0:
            raise ValidationError("incubation period must be > 0")
        if self.alpha < 1:
            raise ValidationError("alpha must be >= 1")
        if self.black_area_window is not None and self.black_area_window < 0:
            raise ValidationError("black-area window must be >= 0 or unbounded")


@dataclass(frozen=True)
class Classification:
    classes: tuple[frozenset[str], ...]
    contact_time: Mapping[str, int]
    as_of: int
    population: frozenset[str]

    def distance(self, person: str) -> int | None:
        for d, members in enumerate(self.classes):
            if person in members:
                return d
        return None

    @property
    def suspected(self) -> frozenset[str]:
        """Every classified person outside class 0."""
        return frozenset().union(*self.classes[1:])

    def rows(self):
        """``(person, class, contact_ts)`` sorted by class, then person."""
        return [(p, d, self.contact_time[p]) for d, m in enumerate(self.classes) for p in sorted(m)]


@dataclass(frozen=True)
class BlackAreaResult:
    counts: tuple[tuple[Area, int], ...]
    alpha: int

    @property
    def black_areas(self) -> tuple[tuple[Area, int], ...]:
        return tuple((a, c) for a, c in self.counts if c >= self.alpha)


@dataclass(frozen=True)
class SuspectsByArea:
    per_area: Mapping[str, Mapping[str, int]]   # area id -> person -> first visit

    @property
    def suspects(self) -> frozenset[str]:
        return frozenset().union(*(set(v) for v in self.per_area.values()))

    def first_area(self, person: str) -> str | None:
        for area_id, visitors in self.per_area.items():
            if person in visitors:
                return area_id
        return None


@dataclass(frozen=True)
class QueryResponse:
    aux: bool
    s: int | None
    ba_k: str | None

    def to_json(self) -> dict:
        return {"aux": self.aux, "s": self.s, "ba_k": self.ba_k}


def contact_events(snap: StoreSnapshot, index: GridIndex, indexed, query, prox: ProximityConfig, t_lo: int):
    """Co-location events between ``query`` points and ``indexed`` points.

    ``indexed`` / ``query`` are arrays of snapshot point positions; ``index``
    must be built over ``indexed``. Returns parallel arrays
    ``(query_pos, other_pos, contact_ts)`` where the contact time is the later
    of the two observation times and is at least ``t_lo``. Same-person pairs
    are excluded.
    """
    out_q, out_o, out_t = [], [], []
    for s in range(0, len(query), PROBE_CHUNK):
        q = query[s:s + PROBE_CHUNK]
        qi, oi = index.probe(snap.lat[q], snap.lon[q], snap.ts[q])
        if len(qi) == 0:
            continue
        qp, op = q[qi], indexed[oi]
        ok = snap.pidx[qp] != snap.pidx[op]
        tq, to = snap.ts[qp], snap.ts[op]
        ok &= np.abs(tq - to) <= prox.delta_t
        ct = np.maximum(tq, to)
        ok &= ct >= t_lo
        qp, op, ct = qp[ok], op[ok], ct[ok]
        d = haversine_np(snap.lat[qp], snap.lon[qp], snap.lat[op], snap.lon[op])
        ok = d <= prox.epsilon
        out_q.append(qp[ok])
        out_o.append(op[ok])
        out_t.append(ct[ok])
    if not out_q:
        e = np.empty(0, dtype=np.int64)
        return e, e, e
    return np.concatenate(out_q), np.concatenate(out_o), np.concatenate(out_t)


def _window_points(snap: StoreSnapshot, t_lo: int, t_hi: int):
    return np.flatnonzero((snap.ts >= t_lo) & (snap.ts <= t_hi))


def _build_index(snap, pos, prox):
    return GridIndex(snap.lat[pos], snap.lon[pos], snap.ts[pos], max(prox.epsilon, MIN_CELL_M), prox.delta_t)


def classify_suspects(snap: StoreSnapshot, cfg: InvestigationConfig) -> Classification:
    cd = cfg.current_date
    prox = cfg.proximity
    seeds = [r for r in snap.patients if r.status is PatientStatus.ACTIVE and r.confirmed_at <= cd]
    if not seeds:
        raise NoPatients("no active patients to seed the investigation")

    n_persons = len(snap.persons)
    level = np.full(n_persons, -1, dtype=np.int64)
    placed_at = np.full(n_persons, _NEVER, dtype=np.int64)
    # causal mode: a person may only pass exposure on through contacts at or after this time
    exposed_at = np.full(n_persons, _NEVER, dtype=np.int64)
    seed_idx = np.array(sorted(snap.person_index[r.person] for r in seeds), dtype=np.int64)
    level[seed_idx] = 0
    exposed_at[seed_idx] = _ALWAYS
    for r in seeds:
        placed_at[snap.person_index[r.person]] = r.confirmed_at

    t_lo = cd - cfg.incubation_period
    # a point older than t_lo can still pair with a newer one up to delta_t later
    pos = _window_points(snap, t_lo - prox.delta_t, cd)
    index = _build_index(snap, pos, prox)
    pos_person = snap.pidx[pos]

    classes = [frozenset(snap.persons[i] for i in seed_idx.tolist())]
    frontier = seed_idx
    d = 0
    while len(frontier):
        d += 1
        query = pos[np.isin(pos_person, frontier)]
        qp, op, ct = contact_events(snap, index, pos, query, prox, t_lo)
        src, dst = snap.pidx[qp], snap.pidx[op]
        ok = level[dst] == -1
        if cfg.causal_ordering:
            ok &= ct >= exposed_at[src]
        dst, ct = dst[ok], ct[ok]
        if len(dst) == 0:
            break
        best = np.full(n_persons, _NEVER, dtype=np.int64)
        np.minimum.at(best, dst, ct)
        frontier = np.flatnonzero(best != _NEVER)
        level[frontier] = d
        placed_at[frontier] = best[frontier]
        exposed_at[frontier] = best[frontier]
        classes.append(frozenset(snap.persons[i] for i in frontier.tolist()))

    classified = np.flatnonzero(level >= 0)
    contact_time = {snap.persons[i]: int(placed_at[i]) for i in classified.tolist()}
    return Classification(tuple(classes), contact_time, cd, frozenset(snap.persons))


def _visit_bounds(cfg: InvestigationConfig):
    cd = cfg.current_date
    if cfg.black_area_window is None:
        return _ALWAYS, cd
    return cd - cfg.black_area_window, cd


def find_black_areas(snap: StoreSnapshot, areas: Sequence[Area], cfg: InvestigationConfig) -> BlackAreaResult:
    if not areas:
        raise ValidationError("at least one area is required")
    lo, hi = _visit_bounds(cfg)
    counted = [snap.person_index[r.person] for r in snap.patients if lo <= r.confirmed_at <= hi]
    pts = np.flatnonzero(np.isin(snap.pidx, counted) & (snap.ts >= lo) & (snap.ts <= hi))
    counts = []
    for a in areas:
        inside = haversine_np(a.center.lat, a.center.lon, snap.lat[pts], snap.lon[pts]) <= a.radius
        counts.append((a, int(len(np.unique(snap.pidx[pts[inside]])))))
    return BlackAreaResult(tuple(counts), cfg.alpha)


def suspects_from_black_areas(snap: StoreSnapshot, ba: BlackAreaResult, cfg: InvestigationConfig) -> SuspectsByArea:
    lo, hi = _visit_bounds(cfg)
    patients = [snap.person_index[r.person] for r in snap.patients]
    pts = np.flatnonzero(~np.isin(snap.pidx, patients) & (snap.ts >= lo) & (snap.ts <= hi))
    per_area = {}
    for a, _ in ba.black_areas:
        inside = pts[haversine_np(a.center.lat, a.center.lon, snap.lat[pts], snap.lon[pts]) <= a.radius]
        visitors = {}
        # points are sorted by (person, time): the first hit per person is the earliest visit
        for pi, t in zip(snap.pidx[inside].tolist(), snap.ts[inside].tolist()):
            visitors.setdefault(snap.persons[pi], t)
        per_area[a.area_id] = visitors
    return SuspectsByArea(per_area)


def query_person(person: str, cls: Classification, sba: SuspectsByArea) -> QueryResponse:
    if person not in cls.population:
        raise UnknownPerson(f"unknown person {person!r}")
    s = cls.distance(person)
    ba_k = sba.first_area(person)
    return QueryResponse(s is not None or ba_k is not None, s, ba_k)


# -- exports ------------------------------------------------------------------

def classification_csv(cls: Classification) -> str:
    lines = ["person_id,distance_class,contact_ts"]
    lines += [f"{p},{d},{t}" for p, d, t in cls.rows()]
    return "\n".join(lines) + "\n"


def black_areas_csv(ba: BlackAreaResult) -> str:
    lines = ["area_id,count,is_black"]
    lines += [f"{a.area_id},{c},{'true' if c >= ba.alpha else 'false'}" for a, c in ba.counts]
    return "\n".join(lines) + "\n"


def suspects_csv(sba: SuspectsByArea) -> str:
    lines = ["area_id,person_id,visit_ts"]
    for area_id, visitors in sba.per_area.items():
        lines += [f"{area_id},{p},{t}" for p, t in sorted(visitors.items())]
    return "\n".join(lines) + "\n"
