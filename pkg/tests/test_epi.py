import math

import pytest
from hypothesis import given, settings, strategies as st

from ctrace.core import GeoPoint, ProximityConfig, TrajectoryPoint
from ctrace.engine import DAY, InvestigationConfig, classify_suspects
from ctrace.epi import (
    CompartmentState,
    ContactStats,
    EpiParams,
    contact_stats,
    estimate_contact_rate,
    estimate_from_stats,
    series_csv,
    simulate_seir,
    simulate_sir,
)
from ctrace.errors import EmptyWindow, NonFiniteState, ValidationError
from ctrace.store import TrajectoryStore

CD = 10 * DAY


def _contact_world():
    # patient x meets a twice and b once inside the window; c is met before the window opens
    g = GeoPoint(3, 3)
    pts = [
        TrajectoryPoint("x", g, CD - 3 * DAY), TrajectoryPoint("a", g, CD - 3 * DAY),
        TrajectoryPoint("x", g, CD - 2 * DAY), TrajectoryPoint("a", g, CD - 2 * DAY),
        TrajectoryPoint("b", g, CD - 2 * DAY),
        TrajectoryPoint("x", g, CD - 9 * DAY), TrajectoryPoint("c", g, CD - 9 * DAY),
        TrajectoryPoint("y", GeoPoint(4, 4), CD - DAY),
    ]
    store = TrajectoryStore()
    store.append_points(pts)
    store.report_patient("x", CD)
    store.report_patient("y", CD)
    return store


def test_contact_stats_counts_distinct_pairs_per_infective_day():
    store = _contact_world()
    cfg = InvestigationConfig(current_date=CD, incubation_period=5 * DAY, proximity=ProximityConfig(1.0, 0))
    snap = store.snapshot(CD)
    cls = classify_suspects(snap, cfg)
    stats, est = estimate_contact_rate(snap, cls, cfg, p_trans=0.5)
    assert stats.distinct_pairs == 2 and stats.infective_count == 2
    assert stats.contacts_per_infective_per_day == pytest.approx(2 / (2 * 5))
    assert est.beta_hat == pytest.approx(0.5 * 0.2)
    # two patients detected, a and b suspected
    assert est.iu_size == 2 and est.theta_hat == pytest.approx(0.5)


def test_contact_stats_needs_an_infective_in_window():
    store = _contact_world()
    cfg = InvestigationConfig(current_date=CD, proximity=ProximityConfig(1.0, 0))
    snap = store.snapshot(CD)
    cls = classify_suspects(snap, cfg)
    with pytest.raises(EmptyWindow):
        contact_stats(snap, cls, cfg, window=(0, DAY // 2))
    with pytest.raises(ValidationError):
        contact_stats(snap, cls, cfg, window=(5, 5))


def test_estimate_validates_probability():
    stats = ContactStats((0, DAY), 3.0, 3, 1)
    with pytest.raises(ValidationError):
        estimate_from_stats(stats, None, 1.5)


@pytest.mark.parametrize("kw", [dict(beta=-1, gamma=1), dict(beta=1, gamma=0), dict(beta=1, gamma=1, sigma=0),
                                dict(beta=1, gamma=1, p_trans=2)])
def test_param_validation(kw):
    with pytest.raises(ValidationError):
        EpiParams(**kw)


def test_series_ends_exactly_at_horizon():
    s = simulate_sir(EpiParams(0.3, 0.1), CompartmentState(S=99, I=1, R=0), 1.0, 0.3)
    assert [c.t for c in s] == pytest.approx([0, 0.3, 0.6, 0.9, 1.0])
    assert s[-1].t == 1.0
    thin = simulate_sir(EpiParams(0.3, 0.1), CompartmentState(S=99, I=1, R=0), 1.0, 0.1, record_every=4)
    assert [round(c.t, 9) for c in thin] == [0, 0.4, 0.8, 1.0]


def test_zero_horizon_returns_initial_state():
    s = simulate_seir(EpiParams(0.3, 0.1), CompartmentState(S=99, I=1, R=0), 0.0, 0.1)
    assert len(s) == 1 and s[0].S == 99


def test_unstable_step_raises():
    with pytest.raises(NonFiniteState):
        simulate_seir(EpiParams(0.3, 0.1, sigma=1e6), CompartmentState(S=90, E=10, I=0, R=0), 1.0, 0.1)


def test_bad_step_rejected():
    with pytest.raises(ValidationError):
        simulate_sir(EpiParams(0.3, 0.1), CompartmentState(S=99, I=1, R=0), 1.0, 0.0)


def test_final_size_relation():
    # for SIR started near S=N: ln(S_inf/N) = -R0 (1 - S_inf/N)
    n = 1e6
    s = simulate_sir(EpiParams(0.4, 0.1), CompartmentState(S=n - 1, I=1, R=0), 400, 0.05, record_every=1000)
    x = s[-1].S / n
    assert math.log(x) == pytest.approx(-4 * (1 - x), rel=1e-5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2), st.floats(0.01, 1), st.floats(0.05, 5), st.floats(1, 1e7), st.floats(0, 1))
def test_conservation_and_bounds(beta, gamma, sigma, n, frac):
    i0 = n * frac * 0.5
    init = CompartmentState(S=n - 2 * i0, E=i0, I=i0, R=0)
    for c in simulate_seir(EpiParams(beta, gamma, sigma), init, 30, 0.05, record_every=10):
        assert abs(c.N - n) <= 1e-9 * n
        assert min(c.S, c.E, c.I, c.R) >= -1e-6 * n


def test_series_csv():
    s = simulate_sir(EpiParams(0.3, 0.1), CompartmentState(S=9, I=1, R=0), 0.5, 0.5)
    lines = series_csv(s).splitlines()
    assert lines[0] == "t_days,S,E,I,R" and lines[1] == "0.0,9.0,0.0,1.0,0.0" and len(lines) == 3
