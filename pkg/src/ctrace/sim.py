"""Synthetic world with known ground truth.

Persons leave home each day, visit 1-4 points of interest (POIs) in straight
lines and go back. Every ``report_period_x`` seconds each participating
device samples its position. Home samples are never reported. Inside a POI
a visitor moves between the spots of a small lattice, with a new spot at
every sample. Transmission happens only at POIs: two visitors on the same spot
whose sample times differ by at most ``delta_t`` are in contact. Each
contiguous contact episode between an infectious and a susceptible person
gets one Bernoulli(p_trans) trial.

All randomness comes from independent child streams of one seed, so
``participation`` and ``p_offline`` change what is reported but never the
movement or the transmissions.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import EARTH_RADIUS_M, Area, GeoPoint, ProximityConfig, TrajectoryPoint, haversine
from .engine import Classification
from .errors import ValidationError
from .ingest import DeviceReportConfig, dedup_stationary
from . import io

_M_PER_DEG = EARTH_RADIUS_M * math.pi / 180


@dataclass(frozen=True)
class SimConfig:
    persons: int = 1000
    pois: int = 30
    days: int = 7
    seed: int = 0
    participation: float = 1.0
    p_offline: float = 0.0
    p_trans: float = 0.1
    initial_patients: int = 5
    report: DeviceReportConfig = field(default_factory=DeviceReportConfig)
    proximity: ProximityConfig = field(default_factory=ProximityConfig)
    bbox: tuple[float, float, float, float] = (48.80, 2.25, 48.90, 2.42)   # lat0, lon0, lat1, lon1
    start_ts: int = 1_699_920_000                                          # a UTC midnight
    speed_mps: float = 8.0
    spot_spacing_m: float = 4.0
    spots_per_side: int = 3

    def __post_init__(self):
        if not self.persons >= self.initial_patients >= 1:
            raise ValidationError("need persons >= initial_patients >= 1")
        if not 0 < self.participation <= 1:
            raise ValidationError("participation must be in (0, 1]")
        if not (0 <= self.p_offline <= 1 and 0 <= self.p_trans <= 1):
            raise ValidationError("probabilities must be in [0, 1]")
        if self.report.report_period_x <= 0:
            raise ValidationError("report period must be > 0 for sampling")
        if self.pois < 0 or self.days < 1:
            raise ValidationError("need pois >= 0 and days >= 1")
        if self.spot_spacing_m <= self.report.stationary_radius_y:
            raise ValidationError("spot spacing must exceed the stationary radius")


@dataclass(frozen=True)
class Visit:
    poi: int
    arrive: int
    depart: int


@dataclass
class World:
    person_ids: list[str]
    homes: list[GeoPoint]
    pois: list[GeoPoint]
    spots: list[list[GeoPoint]]
    itineraries: list[list[list[Visit]]]          # person -> day -> visits
    seeds: list[str]

    def areas(self, radius: float) -> list[Area]:
        return [Area(f"POI{k:03d}", c, radius) for k, c in enumerate(self.pois)]


@dataclass
class GroundTruth:
    transmissions: list[tuple[str, str, GeoPoint, int]]
    true_infected: set[str]
    contacts: set[str]
    seeds: set[str]


@dataclass
class SimResult:
    world: World
    batches: list[list[TrajectoryPoint]]
    truth: GroundTruth
    participants: set[str]
    cfg: SimConfig

    @property
    def areas(self) -> list[Area]:
        half = self.cfg.spot_spacing_m * (self.cfg.spots_per_side - 1) / 2
        return self.world.areas(radius=math.ceil(half * math.sqrt(2)) + 5.0)

    @property
    def end_ts(self) -> int:
        return self.cfg.start_ts + self.cfg.days * 86_400


def _streams(seed: int):
    ss = np.random.SeedSequence(seed)
    names = ("world", "itinerary", "spots", "transmission", "participation", "offline")
    return dict(zip(names, (np.random.default_rng(s) for s in ss.spawn(len(names)))))


def _offset(c: GeoPoint, east_m: float, north_m: float) -> GeoPoint:
    lat = c.lat + north_m / _M_PER_DEG
    lon = c.lon + east_m / (_M_PER_DEG * math.cos(math.radians(c.lat)))
    return GeoPoint(round(lat, 6), round(lon, 6))


def generate_world(cfg: SimConfig, rng=None) -> World:
    rng = rng or _streams(cfg.seed)
    wr, ir = rng["world"], rng["itinerary"]
    lat0, lon0, lat1, lon1 = cfg.bbox

    def uniform_points(n):
        la = wr.uniform(lat0, lat1, n)
        lo = wr.uniform(lon0, lon1, n)
        return [GeoPoint(round(a, 6), round(b, 6)) for a, b in zip(la.tolist(), lo.tolist())]

    ids = [f"P{i:05d}" for i in range(cfg.persons)]
    homes = uniform_points(cfg.persons)
    pois = uniform_points(cfg.pois)
    k = cfg.spots_per_side
    half = (k - 1) / 2
    spots = [[_offset(c, (i - half) * cfg.spot_spacing_m, (j - half) * cfg.spot_spacing_m)
              for i in range(k) for j in range(k)] for c in pois]
    seeds = sorted(ids[i] for i in wr.permutation(cfg.persons)[:cfg.initial_patients].tolist())

    itineraries = []
    for p in range(cfg.persons):
        days = []
        for d in range(cfg.days):
            day0 = cfg.start_ts + d * 86_400
            visits: list[Visit] = []
            n_visits = int(ir.integers(1, 5))
            t = day0 + int(ir.integers(7 * 3600, 10 * 3600))
            pos = homes[p]
            for _ in range(n_visits if cfg.pois else 0):
                choices = [q for q in range(cfg.pois) if not visits or q != visits[-1].poi] or [0]
                poi = choices[int(ir.integers(len(choices)))]
                dwell = int(ir.integers(20 * 60, 120 * 60))
                arrive = t + math.ceil(haversine(pos, pois[poi]) / cfg.speed_mps)
                if arrive + dwell > day0 + 21 * 3600:
                    break
                visits.append(Visit(poi, arrive, arrive + dwell))
                t, pos = arrive + dwell, pois[poi]
            days.append(visits)
        itineraries.append(days)
    return World(ids, homes, pois, spots, itineraries, seeds)


def _grid_times(cfg: SimConfig, lo: int, hi: int, lo_open: bool):
    """Sample times on the global grid inside (lo, hi) or [lo, hi)."""
    x = cfg.report.report_period_x
    k = -(-(lo - cfg.start_ts) // x)
    t = cfg.start_ts + k * x
    if lo_open and t == lo:
        t += x
    while t < hi:
        yield t
        t += x


def _person_samples(cfg, world, p, spot_rng, presence):
    """True sampled positions of person ``p`` outside home, in time order.

    ``presence`` collects ``(poi, spot) -> [(t, person)]`` for the contact model.
    """
    out = []
    home = world.homes[p]
    pid = world.person_ids[p]
    y = cfg.report.stationary_radius_y
    for visits in world.itineraries[p]:
        prev_pos, prev_t = home, None
        legs = []
        for v in visits:
            legs.append(("travel", prev_pos, world.pois[v.poi], prev_t, v.arrive))
            legs.append(("dwell", v.poi, v.arrive, v.depart))
            prev_pos, prev_t = world.pois[v.poi], v.depart
        if visits:
            legs.append(("travel", prev_pos, home, prev_t, prev_t + math.ceil(
                haversine(prev_pos, home) / cfg.speed_mps)))
        last = None
        for leg in legs:
            if leg[0] == "travel":
                _, a, b, t0, t1 = leg
                if t0 is None:
                    t0 = t1 - math.ceil(haversine(a, b) / cfg.speed_mps)
                for t in _grid_times(cfg, t0, t1, lo_open=True):
                    f = (t - t0) / (t1 - t0)
                    pos = GeoPoint(round(a.lat + f * (b.lat - a.lat), 6), round(a.lon + f * (b.lon - a.lon), 6))
                    out.append(TrajectoryPoint(pid, pos, t))
                    last = pos
            else:
                _, poi, t0, t1 = leg
                spots = world.spots[poi]
                for t in _grid_times(cfg, t0, t1, lo_open=False):
                    # always move farther than the stationary radius so every dwell sample is reported
                    ok = [s for s in range(len(spots)) if last is None or haversine(last, spots[s]) > y]
                    s = ok[int(spot_rng.integers(len(ok)))]
                    out.append(TrajectoryPoint(pid, spots[s], t))
                    presence[(poi, s)].append((t, p))
                    last = spots[s]
    return out


def _contact_events(presence, delta_t):
    events = []
    for (poi, s), seq in presence.items():
        seq.sort()
        j0 = 0
        for i in range(len(seq)):
            ti, pi = seq[i]
            while seq[j0][0] < ti - delta_t:
                j0 += 1
            for j in range(j0, i):
                tj, pj = seq[j]
                if pj != pi:
                    a, b = (pi, pj) if pi < pj else (pj, pi)
                    events.append((ti, a, b, poi, s))
    events.sort()
    return events


def _transmit(cfg, world, events, rng):
    pos = {pid: i for i, pid in enumerate(world.person_ids)}
    infected_at = {pos[s]: -1 for s in world.seeds}
    seeds = set(infected_at)
    last_seen: dict[tuple[int, int], int] = {}
    tried: set[tuple[int, int]] = set()
    transmissions = []
    contacts = set()
    x = cfg.report.report_period_x
    for t, a, b, poi, s in events:
        key = (a, b)
        prev = last_seen.get(key)
        if prev is None or t - prev > x:
            tried.discard(key)
        last_seen[key] = t
        inf_a = infected_at.get(a, t + 1) <= t
        inf_b = infected_at.get(b, t + 1) <= t
        if inf_a and b not in seeds:
            contacts.add(b)
        if inf_b and a not in seeds:
            contacts.add(a)
        if inf_a == inf_b or key in tried:
            continue
        tried.add(key)
        src, dst = (a, b) if inf_a else (b, a)
        if rng.random() < cfg.p_trans:
            infected_at[dst] = t
            transmissions.append((world.person_ids[src], world.person_ids[dst], world.spots[poi][s], t))
    ids = world.person_ids
    return GroundTruth(
        transmissions,
        {ids[i] for i in infected_at},
        {ids[i] for i in contacts},
        set(world.seeds),
    )


def simulate(cfg: SimConfig) -> SimResult:
    rng = _streams(cfg.seed)
    world = generate_world(cfg, rng)
    n = cfg.persons
    n_part = max(round(cfg.participation * n), len(world.seeds))
    seed_set = set(world.seeds)
    others = [i for i in rng["participation"].permutation(n).tolist() if world.person_ids[i] not in seed_set]
    participants = seed_set | {world.person_ids[i] for i in others[:n_part - len(seed_set)]}

    presence = defaultdict(list)
    per_day = [[[] for _ in range(cfg.days)] for _ in range(n)]
    for p in range(n):
        samples = _person_samples(cfg, world, p, rng["spots"], presence)
        if world.person_ids[p] not in participants:
            continue
        for pt in dedup_stationary(samples, cfg.report):
            per_day[p][(pt.time - cfg.start_ts) // 86_400].append(pt)

    truth = _transmit(cfg, world, _contact_events(presence, cfg.proximity.delta_t), rng["transmission"])

    # devices that are offline for a day hold that day's points and flush them with the next upload
    offline = rng["offline"]
    held = [[] for _ in range(n)]
    batches = []
    for d in range(cfg.days):
        batch = []
        for p in range(n):
            pts = per_day[p][d]
            if offline.random() < cfg.p_offline:
                held[p].extend(pts)
                continue
            batch.extend(pts)
            batch.extend(held[p])
            held[p] = []
        batches.append(batch)
    batches.append([pt for h in held for pt in h])
    return SimResult(world, [b for b in batches if b], truth, participants, cfg)


def measure_recall(cls: Classification, truth: GroundTruth) -> float:
    """Share of true non-seed contacts that the investigation classified as suspects."""
    if not truth.contacts:
        return 1.0
    found = cls.suspected - truth.seeds
    return len(found & truth.contacts) / len(truth.contacts)


def write_outputs(res: SimResult, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = res.cfg
    with open(out / "points.csv", "w", encoding="utf-8", newline="") as f:
        f.write(",".join(io.POINTS_HEADER) + "\n")
        for batch in res.batches:
            for p in batch:
                f.write(f"{p.person},{io.fmt6(io.to_micro(p.loc.lat))},{io.fmt6(io.to_micro(p.loc.lon))},{p.time}\n")
    with open(out / "patients.csv", "w", encoding="utf-8", newline="") as f:
        f.write(",".join(io.PATIENTS_HEADER) + "\n")
        for s in res.world.seeds:
            f.write(f"{s},active,{cfg.start_ts}\n")
    io.write_areas_csv(out / "areas.csv", res.areas)
    with open(out / "ground_truth.csv", "w", encoding="utf-8", newline="") as f:
        f.write("source,target,lat,lon,ts\n")
        for src, dst, loc, t in res.truth.transmissions:
            f.write(f"{src},{dst},{io.fmt6(io.to_micro(loc.lat))},{io.fmt6(io.to_micro(loc.lon))},{t}\n")
    io.write_kv(out / "world_meta", {
        "seed": cfg.seed,
        "persons": cfg.persons,
        "pois": cfg.pois,
        "days": cfg.days,
        "participation": repr(cfg.participation),
        "p_offline": repr(cfg.p_offline),
        "p_trans": repr(cfg.p_trans),
        "initial_patients": cfg.initial_patients,
        "bbox": ",".join(repr(v) for v in cfg.bbox),
        "start_ts": cfg.start_ts,
        "end_ts": res.end_ts,
        "report_period_x": cfg.report.report_period_x,
        "stationary_radius_y": repr(cfg.report.stationary_radius_y),
        "epsilon": repr(cfg.proximity.epsilon),
        "delta_t": cfg.proximity.delta_t,
        "points": sum(len(b) for b in res.batches),
        "true_infected": len(res.truth.true_infected),
    })


def bulk_trajectories(persons: int = 1000, days: int = 7, cadence_s: int = 300, pois: int = 30,
                      seed: int = 0, bbox=SimConfig.bbox, start_ts: int = SimConfig.start_ts):
    """Dense columnar trajectories for load testing, one point per person per ``cadence_s``.

    Unlike :func:`simulate`, home samples are kept, so the volume is
    ``persons * days * 86400 / cadence_s``. Between 09:00 and 18:00 each sample
    is at a random POI spot with probability 0.3, else a few metres from home.
    Returns ``(person_ids, lat, lon, ts)`` ordered by time.
    """
    rng = np.random.default_rng(seed)
    lat0, lon0, lat1, lon1 = bbox
    home_lat = rng.uniform(lat0, lat1, persons)
    home_lon = rng.uniform(lon0, lon1, persons)
    poi_lat = rng.uniform(lat0, lat1, pois)
    poi_lon = rng.uniform(lon0, lon1, pois)
    m_lat = 1 / _M_PER_DEG
    m_lon = 1 / (_M_PER_DEG * math.cos(math.radians((lat0 + lat1) / 2)))

    times = start_ts + np.arange(0, days * 86_400, cadence_s, dtype=np.int64)
    n_t = len(times)
    ts = np.repeat(times, persons)
    pidx = np.tile(np.arange(persons), n_t)
    lat = home_lat[pidx] + rng.normal(0, 3, len(ts)) * m_lat
    lon = home_lon[pidx] + rng.normal(0, 3, len(ts)) * m_lon
    hour = (ts - start_ts) % 86_400 // 3600
    out = (hour >= 9) & (hour < 18) & (rng.random(len(ts)) < 0.3) & (pois > 0)
    k = int(out.sum())
    poi = rng.integers(0, max(pois, 1), k)
    gx = rng.integers(-1, 2, k) * 4.0
    gy = rng.integers(-1, 2, k) * 4.0
    lat[out] = poi_lat[poi] + gy * m_lat
    lon[out] = poi_lon[poi] + gx * m_lon
    ids = [f"P{i:05d}" for i in range(persons)]
    return [ids[i] for i in pidx.tolist()], np.round(lat, 6), np.round(lon, 6), ts
