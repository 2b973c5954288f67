"""On-disk state shared by the CLI and the HTTP service.

Layout of a data directory::

    points.csv        append-only trajectory log (store CSV format)
    patients.csv      health registry, rewritten on every change
    areas.csv         public areas checked for black areas
    zones.csv         exclusion zones applied before storage
    investigations/<id>/
        config        key=value investigation parameters
        classes.csv, black_areas.csv, suspects_by_area.csv
        contact_stats key=value (absent when no infective had points)
        population    one known person id per line
"""

from __future__ import annotations

import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Area, GeoPoint, ProximityConfig
from .engine import (
    DAY,
    BlackAreaResult,
    Classification,
    InvestigationConfig,
    SuspectsByArea,
    black_areas_csv,
    classification_csv,
    classify_suspects,
    find_black_areas,
    query_person,
    suspects_csv,
    suspects_from_black_areas,
)
from .epi import ContactStats, EpiEstimate, contact_stats, estimate_from_stats
from .errors import CtraceError, EmptyWindow, ValidationError
from .ingest import ExclusionZone, FilterStats, IntervalRecord, expand_interval, filter_columns
from . import io
from .store import AppendReceipt, TrajectoryStore

log = logging.getLogger(__name__)

DATA_DIR_ENV = "CTRACE_DATA_DIR"


class UnknownInvestigation(CtraceError):
    code = "bad_request"
    http_status = 404


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "ctrace-data"))


@dataclass
class Investigation:
    inv_id: str
    config: InvestigationConfig
    classification: Classification
    black_areas: BlackAreaResult
    suspects: SuspectsByArea
    stats: ContactStats | None

    def query(self, person: str):
        return query_person(person, self.classification, self.suspects)

    def estimate(self, p_trans: float) -> EpiEstimate:
        if self.stats is None:
            raise EmptyWindow("no infective had trajectory points in the investigation window")
        return estimate_from_stats(self.stats, self.classification, p_trans)


def _config_to_kv(cfg: InvestigationConfig) -> dict:
    return {
        "as_of": cfg.current_date,
        "ip_s": cfg.incubation_period,
        "epsilon_m": repr(float(cfg.proximity.epsilon)),
        "delta_t_s": cfg.proximity.delta_t,
        "alpha": cfg.alpha,
        "black_area_window_s": "" if cfg.black_area_window is None else cfg.black_area_window,
        "causal": "true" if cfg.causal_ordering else "false",
    }


def _config_from_kv(kv: dict) -> InvestigationConfig:
    win = kv["black_area_window_s"]
    return InvestigationConfig(
        current_date=int(kv["as_of"]),
        incubation_period=int(kv["ip_s"]),
        proximity=ProximityConfig(float(kv["epsilon_m"]), int(kv["delta_t_s"])),
        alpha=int(kv["alpha"]),
        black_area_window=None if win == "" else int(win),
        causal_ordering=kv["causal"] == "true",
    )


def make_config(as_of, ip_days=14, epsilon_m=2.0, delta_t_s=300, alpha=3, black_area_window_s=None,
                causal=False) -> InvestigationConfig:
    try:
        return InvestigationConfig(
            current_date=int(as_of),
            incubation_period=round(float(ip_days) * DAY),
            proximity=ProximityConfig(float(epsilon_m), int(delta_t_s)),
            alpha=int(alpha),
            black_area_window=None if black_area_window_s is None else int(black_area_window_s),
            causal_ordering=bool(causal),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(str(exc)) from None


class Workspace:
    def __init__(self, data_dir=None):
        self.dir = Path(data_dir) if data_dir is not None else default_data_dir()
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "investigations").mkdir(exist_ok=True)
        self.store = TrajectoryStore.load(self.dir, sink=self._append_log)
        self.areas: list[Area] = io.read_areas_csv(self.areas_path) if self.areas_path.exists() else []
        self.zones: list[ExclusionZone] = io.read_zones_csv(self.zones_path) if self.zones_path.exists() else []
        self.filter_stats = FilterStats()
        self._investigate_lock = threading.Lock()

    @property
    def areas_path(self):
        return self.dir / "areas.csv"

    @property
    def zones_path(self):
        return self.dir / "zones.csv"

    def _append_log(self, persons, lat6, lon6, ts):
        io.write_points_csv(self.dir / "points.csv", persons, lat6, lon6, ts, append=True)

    def _save_patients(self):
        io.write_patients_csv(self.dir / "patients.csv", self.store.patients)

    # -- ingestion -------------------------------------------------------------

    def ingest_columns(self, persons, lat, lon, ts) -> AppendReceipt:
        persons, lat, lon, ts = filter_columns(persons, lat, lon, ts, self.zones, self.filter_stats)
        return self.store.append_columns(persons, lat, lon, ts)

    def ingest_intervals(self, rows, delta_t: int) -> AppendReceipt:
        by_id = {a.area_id: a for a in self.areas}
        pts = []
        for person, area_id, entry, exit_ in rows:
            area = by_id.get(area_id)
            if area is None:
                raise ValidationError(f"interval refers to unknown area {area_id!r}")
            pts.extend(expand_interval(IntervalRecord(person, area, entry, exit_), delta_t))
        return self.ingest_columns([p.person for p in pts],
                                   np.array([p.loc.lat for p in pts], dtype=np.float64),
                                   np.array([p.loc.lon for p in pts], dtype=np.float64),
                                   np.array([p.time for p in pts], dtype=np.int64))

    def set_areas(self, areas: list[Area]):
        ids = [a.area_id for a in areas]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate area ids")
        self.areas = list(areas)
        io.write_areas_csv(self.areas_path, self.areas)

    def set_zones(self, zones: list[ExclusionZone]):
        self.zones = list(zones)
        with open(self.zones_path, "w", encoding="utf-8", newline="") as f:
            f.write(",".join(io.ZONES_HEADER) + "\n")
            for z in zones:
                f.write(f"{z.zone_id},{io.fmt6(io.to_micro(z.center.lat))},"
                        f"{io.fmt6(io.to_micro(z.center.lon))},{z.radius!r}\n")

    def report_patient(self, person, confirmed_at):
        rec = self.store.report_patient(person, confirmed_at)
        self._save_patients()
        return rec

    def update_status(self, person, status):
        rec = self.store.update_status(person, status)
        self._save_patients()
        return rec

    # -- investigations ------------------------------------------------------------

    def _inv_dir(self, inv_id: str) -> Path:
        if not inv_id or "/" in inv_id or inv_id.startswith("."):
            raise UnknownInvestigation(f"unknown investigation {inv_id!r}")
        return self.dir / "investigations" / inv_id

    def investigation_ids(self) -> list[str]:
        return sorted(p.name for p in (self.dir / "investigations").iterdir() if p.is_dir() and not p.name.endswith(".tmp"))

    def run_investigation(self, cfg: InvestigationConfig) -> Investigation:
        with self._investigate_lock:
            snap = self.store.snapshot(cfg.current_date, cfg.proximity)
            cls = classify_suspects(snap, cfg)
            if self.areas:
                ba = find_black_areas(snap, self.areas, cfg)
            else:
                ba = BlackAreaResult((), cfg.alpha)
            sba = suspects_from_black_areas(snap, ba, cfg)
            try:
                stats = contact_stats(snap, cls, cfg)
            except EmptyWindow:
                stats = None
            existing = self.investigation_ids()
            inv_id = f"inv-{len(existing) + 1:06d}"
            inv = Investigation(inv_id, cfg, cls, ba, sba, stats)
            self._persist(inv)
            log.info("investigation %s: %d classes, %d black areas", inv_id, len(cls.classes), len(ba.black_areas))
            return inv

    def _persist(self, inv: Investigation):
        d = self._inv_dir(inv.inv_id)
        tmp = d.with_name(d.name + ".tmp")
        tmp.mkdir(parents=True, exist_ok=True)
        io.write_kv(tmp / "config", _config_to_kv(inv.config))
        (tmp / "classes.csv").write_text(classification_csv(inv.classification), encoding="utf-8")
        (tmp / "black_areas.csv").write_text(black_areas_csv(inv.black_areas), encoding="utf-8")
        (tmp / "suspects_by_area.csv").write_text(suspects_csv(inv.suspects), encoding="utf-8")
        (tmp / "population").write_text("".join(p + "\n" for p in sorted(inv.classification.population)),
                                        encoding="utf-8")
        if inv.stats is not None:
            s = inv.stats
            io.write_kv(tmp / "contact_stats", {
                "window_start": s.window[0], "window_end": s.window[1],
                "contacts_per_infective_per_day": repr(s.contacts_per_infective_per_day),
                "distinct_pairs": s.distinct_pairs, "infective_count": s.infective_count,
            })
        tmp.rename(d)

    def export(self, inv_id: str, name: str) -> str:
        files = {"classes": "classes.csv", "black-areas": "black_areas.csv", "suspects-by-area": "suspects_by_area.csv"}
        if name not in files:
            raise ValidationError(f"unknown export {name!r}")
        path = self._inv_dir(inv_id) / files[name]
        if not path.exists():
            raise UnknownInvestigation(f"unknown investigation {inv_id!r}")
        return path.read_text(encoding="utf-8")

    def latest_id(self) -> str:
        ids = self.investigation_ids()
        if not ids:
            raise UnknownInvestigation("no investigation has been run yet")
        return ids[-1]

    def load_investigation(self, inv_id: str | None = None) -> Investigation:
        inv_id = inv_id or self.latest_id()
        d = self._inv_dir(inv_id)
        if not (d / "config").exists():
            raise UnknownInvestigation(f"unknown investigation {inv_id!r}")
        cfg = _config_from_kv(io.read_kv(d / "config"))

        classes: dict[int, set[str]] = {}
        contact_time = {}
        for row in _csv_rows(d / "classes.csv"):
            person, dist, ts = row
            classes.setdefault(int(dist), set()).add(person)
            contact_time[person] = int(ts)
        population = frozenset((d / "population").read_text(encoding="utf-8").split())
        cls = Classification(tuple(frozenset(classes[k]) for k in sorted(classes)), contact_time,
                             cfg.current_date, population)

        by_id = {a.area_id: a for a in self.areas}
        counts = []
        for area_id, count, _ in _csv_rows(d / "black_areas.csv"):
            counts.append((by_id.get(area_id) or _placeholder_area(area_id), int(count)))
        ba = BlackAreaResult(tuple(counts), cfg.alpha)

        per_area: dict[str, dict[str, int]] = {a.area_id: {} for a, _ in ba.black_areas}
        for area_id, person, ts in _csv_rows(d / "suspects_by_area.csv"):
            per_area.setdefault(area_id, {})[person] = int(ts)
        sba = SuspectsByArea(per_area)

        stats = None
        if (d / "contact_stats").exists():
            kv = io.read_kv(d / "contact_stats")
            stats = ContactStats((int(kv["window_start"]), int(kv["window_end"])),
                                 float(kv["contacts_per_infective_per_day"]),
                                 int(kv["distinct_pairs"]), int(kv["infective_count"]))
        return Investigation(inv_id, cfg, cls, ba, sba, stats)


def _placeholder_area(area_id):
    return Area(area_id, GeoPoint(0.0, 0.0), 1.0)


def _csv_rows(path):
    lines = path.read_text(encoding="utf-8").splitlines()[1:]
    return [line.split(",") for line in lines if line]
