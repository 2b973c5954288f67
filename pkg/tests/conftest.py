import math
import random
from collections import defaultdict

import numpy as np
import pytest

from ctrace.core import GeoPoint, ProximityConfig, TrajectoryPoint
from ctrace.engine import InvestigationConfig
from ctrace.store import TrajectoryStore

T0 = 1_700_000_000

# Six symbolic locations ~1.1 km apart so that epsilon = 0 separates them.
SYMBOLIC = {f"c{i}": GeoPoint(48.85 + 0.01 * i, 2.35) for i in range(1, 7)}
SYMBOLIC_TIMES = {f"t{i}": T0 + i * 3600 for i in range(1, 7)}

TRAJECTORY_ROWS = [
    ("P1", "c1", "t1"), ("P2", "c2", "t1"), ("P3", "c3", "t2"), ("P1", "c4", "t3"),
    ("P1", "c5", "t4"), ("P1", "c2", "t5"), ("P3", "c2", "t5"), ("P4", "c6", "t5"),
    ("P5", "c3", "t6"), ("P1", "c3", "t6"),
]


def symbolic_points(rows=TRAJECTORY_ROWS):
    return [TrajectoryPoint(p, SYMBOLIC[c], SYMBOLIC_TIMES[t]) for p, c, t in rows]


def symbolic_store(patients=("P3",)):
    store = TrajectoryStore()
    store.append_points(symbolic_points())
    for p in patients:
        store.report_patient(p, T0 + 7 * 3600)
    return store


@pytest.fixture
def symbolic():
    return symbolic_store()


# -- brute-force reference ----------------------------------------------------------

def ref_distance_m(a: GeoPoint, b: GeoPoint) -> float:
    # chord length on the 6,371 km sphere converted to arc length
    r = 6_371_000.0
    la1, lo1, la2, lo2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    dx = math.cos(la2) * math.cos(lo2) - math.cos(la1) * math.cos(lo1)
    dy = math.cos(la2) * math.sin(lo2) - math.cos(la1) * math.sin(lo1)
    dz = math.sin(la2) - math.sin(la1)
    chord = math.sqrt(dx * dx + dy * dy + dz * dz)
    return 2 * r * math.asin(min(1.0, chord / 2))


def ref_contact_graph(points, epsilon, delta_t, t_lo, t_hi):
    """person -> {neighbour: earliest contact time}, all pairs compared."""
    pts = [p for p in points if p.time <= t_hi]
    adj = defaultdict(dict)
    for i in range(len(pts)):
        p = pts[i]
        for j in range(i + 1, len(pts)):
            q = pts[j]
            if p.person == q.person or abs(p.time - q.time) > delta_t:
                continue
            ct = max(p.time, q.time)
            if ct < t_lo or ref_distance_m(p.loc, q.loc) > epsilon:
                continue
            for a, b in ((p.person, q.person), (q.person, p.person)):
                if ct < adj[a].get(b, math.inf):
                    adj[a][b] = ct
    return adj


def ref_classes(points, seeds, cfg: InvestigationConfig):
    """Multi-source BFS over the brute-force contact graph: list of person sets."""
    prox = cfg.proximity
    adj = ref_contact_graph(points, prox.epsilon, prox.delta_t, cfg.current_date - cfg.incubation_period,
                            cfg.current_date)
    level = {s: 0 for s in seeds}
    classes = [set(seeds)]
    frontier = set(seeds)
    while frontier:
        nxt = {n for p in frontier for n in adj.get(p, {}) if n not in level}
        if not nxt:
            break
        for n in nxt:
            level[n] = len(classes)
        classes.append(nxt)
        frontier = nxt
    return classes, adj


def random_instance(rng: random.Random):
    """Small clustered instance: persons, points, patients and an investigation config."""
    n_persons = rng.randint(2, 50)
    n_points = rng.randint(1, 500)
    n_spots = rng.randint(1, 25)
    base = GeoPoint(rng.uniform(-60, 60), rng.uniform(-170, 170))
    spread_m = rng.choice([5.0, 20.0, 60.0])
    m_lat = 1 / 111_195.0
    m_lon = m_lat / math.cos(math.radians(base.lat))
    spots = [GeoPoint(round(base.lat + rng.uniform(-spread_m, spread_m) * m_lat, 6),
                      round(base.lon + rng.uniform(-spread_m, spread_m) * m_lon, 6)) for _ in range(n_spots)]
    horizon = rng.choice([3600, 6 * 3600, 2 * 86_400])
    persons = [f"U{i:02d}" for i in range(n_persons)]
    used = set()
    points = []
    for _ in range(n_points):
        p = rng.choice(persons)
        t = T0 + rng.randrange(0, horizon, rng.choice([1, 60, 300]))
        if (p, t) in used:
            continue
        used.add((p, t))
        points.append(TrajectoryPoint(p, rng.choice(spots), t))
    known = sorted({p.person for p in points}) or persons[:1]
    seeds = rng.sample(known, rng.randint(1, min(3, len(known))))
    cfg = InvestigationConfig(
        current_date=T0 + rng.randint(horizon // 2, horizon + 3600),
        incubation_period=rng.randint(600, horizon + 3600),
        proximity=ProximityConfig(rng.choice([0.0, rng.uniform(0, 40)]), rng.choice([0, 60, 300, 900])),
        alpha=1,
    )
    return points, seeds, cfg


def build_store(points, seeds, confirmed_at):
    store = TrajectoryStore()
    if points:
        store.append_points(points)
    for s in seeds:
        store.report_patient(s, confirmed_at)
    return store


def ref_candidates(points, probe: TrajectoryPoint, prox: ProximityConfig):
    return {(p.person, p.time) for p in points
            if p.person != probe.person and abs(p.time - probe.time) <= prox.delta_t
            and ref_distance_m(p.loc, probe.loc) <= prox.epsilon}


def random_points(n, seed, lat0=48.85, lon0=2.35, span_m=400.0, horizon=3 * 3600):
    rng = np.random.default_rng(seed)
    m_lat = 1 / 111_195.0
    m_lon = m_lat / math.cos(math.radians(lat0))
    ts = T0 + rng.permutation(horizon)[:n]
    return [TrajectoryPoint(f"R{int(rng.integers(0, 200)):03d}",
                            GeoPoint(round(lat0 + float(rng.uniform(0, span_m)) * m_lat, 6),
                                     round(lon0 + float(rng.uniform(0, span_m)) * m_lon, 6)),
                            int(t)) for t in ts]


# -- acceptance reporting -----------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


@pytest.fixture
def criterion():
    def record(number: int, title: str, ok: bool, detail: str):
        ACCEPTANCE[number] = (bool(ok), title, detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {title}: {detail}")
