"""Contact-rate estimation and SIR / SEIR integration.

The integrators use fixed-step classical Runge-Kutta on plain floats. Rates
are per day, time is in days. The right-hand sides sum to zero, so the
population total is conserved up to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import DAY, Classification, InvestigationConfig, _build_index, _window_points, contact_events
from .errors import EmptyWindow, NonFiniteState, ValidationError
from .store import StoreSnapshot


@dataclass(frozen=True)
class ContactStats:
    window: tuple[int, int]
    contacts_per_infective_per_day: float
    distinct_pairs: int
    infective_count: int

    def __post_init__(self):
        if not self.window[0] < self.window[1]:
            raise ValidationError("contact window must have start < end")


@dataclass(frozen=True)
class EpiParams:
    beta: float
    gamma: float
    sigma: float = 1.0
    p_trans: float = 1.0

    def __post_init__(self):
        if self.beta < 0 or self.gamma <= 0 or self.sigma <= 0:
            raise ValidationError("need beta >= 0, gamma > 0, sigma > 0")
        if not 0 <= self.p_trans <= 1:
            raise ValidationError("p_trans must be a probability")


@dataclass(frozen=True)
class CompartmentState:
    S: float
    I: float
    R: float
    E: float = 0.0
    t: float = 0.0

    @property
    def N(self) -> float:
        return self.S + self.E + self.I + self.R


@dataclass(frozen=True)
class EpiEstimate:
    beta_hat: float
    theta_hat: float
    iu_size: int


def estimate_from_stats(stats: ContactStats, cls: Classification, p_trans: float) -> EpiEstimate:
    if not 0 <= p_trans <= 1:
        raise ValidationError("p_trans must be a probability")
    detected = len(cls.classes[0])
    iu = len(cls.suspected)
    theta = detected / (detected + iu) if detected + iu else 0.0
    return EpiEstimate(stats.contacts_per_infective_per_day * p_trans, theta, iu)


def contact_stats(snap: StoreSnapshot, cls: Classification, cfg: InvestigationConfig,
                  window: tuple[int, int] | None = None) -> ContactStats:
    """Distinct (infective, non-infective) co-location pairs inside ``window``.

    Infectives are the class-0 persons with at least one point in the window.
    The window defaults to the incubation period ending at the current date.
    """
    if window is None:
        window = (cfg.current_date - cfg.incubation_period, cfg.current_date)
    start, end = window
    if not start < end:
        raise ValidationError("contact window must have start < end")
    prox = cfg.proximity
    seeds = np.array(sorted(snap.person_index[p] for p in cls.classes[0]), dtype=np.int64)
    pos = _window_points(snap, start, end)
    infective_pos = pos[np.isin(snap.pidx[pos], seeds)]
    infectives = np.unique(snap.pidx[infective_pos])
    if len(infectives) == 0:
        raise EmptyWindow("no infective has trajectory points in the window")
    index = _build_index(snap, pos, prox)
    qp, op, _ = contact_events(snap, index, pos, infective_pos, prox, start)
    src, dst = snap.pidx[qp], snap.pidx[op]
    keep = ~np.isin(dst, seeds)
    pairs = np.unique(src[keep] * len(snap.persons) + dst[keep])
    days = (end - start) / DAY
    rate = len(pairs) / (len(infectives) * days)
    return ContactStats((int(start), int(end)), rate, int(len(pairs)), int(len(infectives)))


def estimate_contact_rate(snap: StoreSnapshot, cls: Classification, cfg: InvestigationConfig, p_trans: float,
                          window: tuple[int, int] | None = None) -> tuple[ContactStats, EpiEstimate]:
    stats = contact_stats(snap, cls, cfg, window)
    return stats, estimate_from_stats(stats, cls, p_trans)


# -- integrators ----------------------------------------------------------------

def _rk4(deriv, y, h):
    k1 = deriv(y)
    k2 = deriv([a + h / 2 * b for a, b in zip(y, k1)])
    k3 = deriv([a + h / 2 * b for a, b in zip(y, k2)])
    k4 = deriv([a + h * b for a, b in zip(y, k3)])
    return [a + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]


def _integrate(deriv, y0, n_pop, horizon_days, step_days, record_every):
    if step_days <= 0 or horizon_days < 0:
        raise ValidationError("need step_days > 0 and horizon_days >= 0")
    if record_every < 1:
        raise ValidationError("record_every must be >= 1")
    n_steps = math.ceil(horizon_days / step_days - 1e-9)
    tol = 1e-6 * max(n_pop, 1.0)
    y = [float(v) for v in y0]
    out = [(0.0, y)]
    for k in range(1, n_steps + 1):
        t_prev = (k - 1) * step_days
        # last step is shortened so the series ends exactly at the horizon
        h = min(step_days, horizon_days - t_prev)
        y = _rk4(deriv, y, h)
        if not all(math.isfinite(v) and -tol <= v <= n_pop + tol for v in y):
            raise NonFiniteState(f"state left [0, N] at t={t_prev + h:.6g} days: {y}")
        if k % record_every == 0 or k == n_steps:
            out.append((horizon_days if k == n_steps else k * step_days, y))
    return out


def simulate_sir(params: EpiParams, init: CompartmentState, horizon_days: float, step_days: float,
                 record_every: int = 1) -> list[CompartmentState]:
    n = init.S + init.I + init.R
    beta, gamma = params.beta, params.gamma

    def deriv(y):
        s, i, _ = y
        inf = beta * s * i / n
        rec = gamma * i
        return [-inf, inf - rec, rec]

    series = _integrate(deriv, [init.S, init.I, init.R], n, horizon_days, step_days, record_every)
    return [CompartmentState(S=s, I=i, R=r, t=t) for t, (s, i, r) in series]


def simulate_seir(params: EpiParams, init: CompartmentState, horizon_days: float, step_days: float,
                  record_every: int = 1) -> list[CompartmentState]:
    n = init.N
    beta, gamma, sigma = params.beta, params.gamma, params.sigma

    def deriv(y):
        s, e, i, _ = y
        inf = beta * s * i / n
        lat = sigma * e
        rec = gamma * i
        return [-inf, inf - lat, lat - rec, rec]

    series = _integrate(deriv, [init.S, init.E, init.I, init.R], n, horizon_days, step_days, record_every)
    return [CompartmentState(S=s, E=e, I=i, R=r, t=t) for t, (s, e, i, r) in series]


def series_csv(series: list[CompartmentState]) -> str:
    lines = ["t_days,S,E,I,R"]
    lines += [f"{c.t!r},{c.S!r},{c.E!r},{c.I!r},{c.R!r}" for c in series]
    return "\n".join(lines) + "\n"
