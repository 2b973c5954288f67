import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import SYMBOLIC, SYMBOLIC_TIMES, T0, build_store, random_instance, ref_classes, symbolic_points
from ctrace.core import Area, GeoPoint, ProximityConfig, TrajectoryPoint
from ctrace.engine import (
    InvestigationConfig,
    black_areas_csv,
    classification_csv,
    classify_suspects,
    find_black_areas,
    query_person,
    suspects_csv,
    suspects_from_black_areas,
)
from ctrace.errors import NoPatients, UnknownPerson, ValidationError
from ctrace.store import TrajectoryStore

CD = T0 + 7 * 3600
SYMBOLIC_CFG = InvestigationConfig(current_date=CD, proximity=ProximityConfig(0.0, 0), alpha=2)


def _run(store, cfg=SYMBOLIC_CFG, areas=None):
    snap = store.snapshot(cfg.current_date, cfg.proximity)
    cls = classify_suspects(snap, cfg)
    ba = find_black_areas(snap, areas, cfg) if areas else None
    sba = suspects_from_black_areas(snap, ba, cfg) if ba else None
    return snap, cls, ba, sba


def _store(patients=("P3",), status=None):
    store = TrajectoryStore()
    store.append_points(symbolic_points())
    for p in patients:
        store.report_patient(p, CD)
    for p, s in (status or {}).items():
        store.update_status(p, s)
    return store


def test_symbolic_classes_and_contact_times():
    _, cls, _, _ = _run(_store())
    assert [set(c) for c in cls.classes] == [{"P3"}, {"P1"}, {"P5"}]
    assert cls.contact_time == {"P3": CD, "P1": SYMBOLIC_TIMES["t5"], "P5": SYMBOLIC_TIMES["t6"]}
    assert classification_csv(cls).splitlines() == [
        "person_id,distance_class,contact_ts", f"P3,0,{CD}", f"P1,1,{SYMBOLIC_TIMES['t5']}",
        f"P5,2,{SYMBOLIC_TIMES['t6']}"]


def test_queries():
    _, cls, _, sba = _run(_store(), areas=[Area("x", SYMBOLIC["c6"], 10)])
    assert query_person("P1", cls, sba).to_json() == {"aux": True, "s": 1, "ba_k": None}
    assert query_person("P4", cls, sba).to_json() == {"aux": False, "s": None, "ba_k": None}
    assert query_person("P3", cls, sba).s == 0
    with pytest.raises(UnknownPerson):
        query_person("P9", cls, sba)


def test_no_active_patients():
    with pytest.raises(NoPatients):
        _run(_store(patients=()))
    with pytest.raises(NoPatients):
        _run(_store(status={"P3": "recovered"}))


def test_future_confirmation_does_not_seed():
    store = TrajectoryStore()
    store.append_points(symbolic_points())
    store.report_patient("P3", CD + 1)
    with pytest.raises(NoPatients):
        _run(store)


def test_no_trajectories_gives_only_patients():
    store = TrajectoryStore()
    store.report_patient("a", 10)
    cls = classify_suspects(store.snapshot(20), InvestigationConfig(current_date=20))
    assert [set(c) for c in cls.classes] == [{"a"}]


def test_contact_older_than_incubation_period_is_ignored():
    store = _store()
    ip = CD - SYMBOLIC_TIMES["t5"] - 1
    cfg = InvestigationConfig(current_date=CD, incubation_period=ip, proximity=ProximityConfig(0.0, 0))
    _, cls, _, _ = _run(store, cfg)
    assert [set(c) for c in cls.classes] == [{"P3"}]
    cfg = InvestigationConfig(current_date=CD, incubation_period=ip + 1, proximity=ProximityConfig(0.0, 0))
    assert len(_run(store, cfg)[1].classes) == 3


def test_black_areas_on_symbolic_table():
    area = Area("c3", SYMBOLIC["c3"], 10)
    store = _store(patients=("P3", "P5"))
    _, _, ba, _ = _run(store, areas=[area])
    assert ba.counts[0][1] == 2 and [a.area_id for a, _ in ba.black_areas] == ["c3"]
    cfg3 = InvestigationConfig(current_date=CD, proximity=ProximityConfig(0.0, 0), alpha=3)
    assert find_black_areas(store.snapshot(CD), [area], cfg3).black_areas == ()


def test_suspects_from_black_area():
    store = _store(patients=("P3", "P5"))
    cfg = InvestigationConfig(current_date=CD, proximity=ProximityConfig(0.0, 0), alpha=1)
    areas = [Area("c2", SYMBOLIC["c2"], 10), Area("c3", SYMBOLIC["c3"], 10)]
    _, cls, ba, sba = _run(store, cfg, areas)
    assert sba.per_area["c2"] == {"P2": SYMBOLIC_TIMES["t1"], "P1": SYMBOLIC_TIMES["t5"]}
    assert sba.per_area["c3"] == {"P1": SYMBOLIC_TIMES["t6"]}
    assert sba.suspects == {"P1", "P2"}
    assert sba.first_area("P1") == "c2"
    q = query_person("P2", cls, sba)
    assert q.aux and q.s is None and q.ba_k == "c2"
    assert suspects_csv(sba).splitlines()[0] == "area_id,person_id,visit_ts"
    assert black_areas_csv(ba).splitlines() == ["area_id,count,is_black", "c2,1,true", "c3,2,true"]


def test_recovered_patients_still_count_toward_black_areas():
    store = _store(patients=("P3", "P5"), status={"P5": "dead"})
    _, cls, ba, _ = _run(store, areas=[Area("c3", SYMBOLIC["c3"], 10)])
    assert ba.counts[0][1] == 2
    assert cls.classes[0] == {"P3"}


def test_black_area_window_limits_visits():
    store = TrajectoryStore()
    c = GeoPoint(10, 10)
    store.append_points([TrajectoryPoint("p", c, 1000), TrajectoryPoint("q", c, 5000),
                         TrajectoryPoint("v", c, 1500), TrajectoryPoint("w", c, 5500)])
    store.report_patient("p", 5000)
    store.report_patient("q", 5000)
    area = [Area("A", c, 5)]
    unbounded = InvestigationConfig(current_date=6000, alpha=2)
    windowed = InvestigationConfig(current_date=6000, alpha=1, black_area_window=2000)
    snap = store.snapshot(6000)
    assert find_black_areas(snap, area, unbounded).counts[0][1] == 2
    ba = find_black_areas(snap, area, windowed)
    assert ba.counts[0][1] == 1
    assert suspects_from_black_areas(snap, ba, windowed).per_area["A"] == {"w": 5500}


def test_empty_area_list_rejected():
    store = _store()
    with pytest.raises(ValidationError):
        find_black_areas(store.snapshot(CD), [], SYMBOLIC_CFG)


def test_causal_ordering_blocks_backward_chains():
    # a (patient) meets b at t=2000; b met c earlier, at t=1000
    g = GeoPoint(5, 5)
    h = GeoPoint(6, 6)
    store = TrajectoryStore()
    store.append_points([TrajectoryPoint("b", h, 1000), TrajectoryPoint("c", h, 1000),
                         TrajectoryPoint("a", g, 2000), TrajectoryPoint("b", g, 2000),
                         TrajectoryPoint("b", h, 3000), TrajectoryPoint("d", h, 3000)])
    store.report_patient("a", 4000)
    prox = ProximityConfig(1.0, 0)
    plain = classify_suspects(store.snapshot(4000), InvestigationConfig(current_date=4000, proximity=prox))
    causal = classify_suspects(store.snapshot(4000),
                               InvestigationConfig(current_date=4000, proximity=prox, causal_ordering=True))
    assert [set(c) for c in plain.classes] == [{"a"}, {"b"}, {"c", "d"}]
    assert [set(c) for c in causal.classes] == [{"a"}, {"b"}, {"d"}]


def test_delta_t_pairs_points_at_different_times():
    g = GeoPoint(1, 1)
    store = TrajectoryStore()
    store.append_points([TrajectoryPoint("a", g, 1000), TrajectoryPoint("b", g, 1250)])
    store.report_patient("a", 2000)
    cfg = InvestigationConfig(current_date=2000, proximity=ProximityConfig(2.0, 300))
    cls = classify_suspects(store.snapshot(2000), cfg)
    assert cls.contact_time["b"] == 1250


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_matches_reference_bfs(seed):
    points, seeds, cfg = random_instance(random.Random(seed))
    cls = classify_suspects(build_store(points, seeds, cfg.current_date).snapshot(cfg.current_date,
                                                                                cfg.proximity), cfg)
    expected, _ = ref_classes(points, seeds, cfg)
    assert [set(c) for c in cls.classes] == expected


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.floats(0, 1))
def test_more_points_never_increase_distance(seed, frac):
    points, seeds, cfg = random_instance(random.Random(seed))
    k = int(len(points) * frac)
    subset = points[:k]
    full = classify_suspects(build_store(points, seeds, cfg.current_date).snapshot(cfg.current_date), cfg)
    part = classify_suspects(build_store(subset, seeds, cfg.current_date).snapshot(cfg.current_date), cfg)
    for p in part.contact_time:
        assert full.distance(p) is not None and full.distance(p) <= part.distance(p)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_ingest_order_does_not_change_outputs(seed):
    rng = random.Random(seed)
    points, seeds, cfg = random_instance(rng)
    shuffled = points[:]
    rng.shuffle(shuffled)
    a = classify_suspects(build_store(points, seeds, cfg.current_date).snapshot(cfg.current_date), cfg)
    b = classify_suspects(build_store(shuffled, seeds, cfg.current_date).snapshot(cfg.current_date), cfg)
    assert classification_csv(a) == classification_csv(b)
