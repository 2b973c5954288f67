"""HTTP API over a :class:`~ctrace.workspace.Workspace`.

Bodies use integer epoch seconds. Every error is returned as
``{"code": ..., "message": ...}`` with the matching HTTP status.
"""

from __future__ import annotations

import threading
from typing import Literal, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, ConfigDict, Field, StrictInt

from .epi import CompartmentState, EpiParams, simulate_seir, simulate_sir
from .errors import CtraceError, ValidationError
from . import io
from .workspace import Workspace, make_config


class PatientIn(BaseModel):
    person_id: str
    confirmed_at: StrictInt


class StatusIn(BaseModel):
    status: str


class InvestigationIn(BaseModel):
    as_of: StrictInt
    ip_days: float = 14
    epsilon_m: float = 2.0
    delta_t_s: StrictInt = 300
    alpha: StrictInt = 3
    black_area_window_s: Optional[StrictInt] = None
    causal: bool = False


class SimulateIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: Literal["sir", "seir"]
    params: dict
    init: dict
    horizon: float = Field(gt=0)
    step: float = Field(gt=0)


def _error(code: str, message: str, status: int) -> JSONResponse:
    return JSONResponse({"code": code, "message": message}, status_code=status)


def _table(text: str, fmt: str):
    if fmt == "csv":
        return PlainTextResponse(text, media_type="text/csv")
    lines = text.splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        rec = {}
        for k, v in zip(header, line.split(",")):
            if k in ("distance_class", "contact_ts", "count", "visit_ts"):
                rec[k] = int(v)
            elif k == "is_black":
                rec[k] = v == "true"
            else:
                rec[k] = v
        rows.append(rec)
    return JSONResponse(rows)


def create_app(data_dir=None, delta_t_s: int = 300) -> FastAPI:
    ws = Workspace(data_dir)
    write_lock = threading.Lock()
    app = FastAPI(title="ctrace")
    app.state.workspace = ws

    @app.exception_handler(CtraceError)
    async def _domain_error(request, exc: CtraceError):
        return _error(exc.code, str(exc), exc.http_status)

    @app.exception_handler(RequestValidationError)
    async def _bad_body(request, exc):
        return _error("bad_request", str(exc.errors()), 400)

    @app.post("/v1/points")
    async def post_points(request: Request):
        text = (await request.body()).decode("utf-8")
        persons, lat, lon, ts = io.parse_points_jsonl(text)
        with write_lock:
            r = ws.ingest_columns(persons, lat, lon, ts)
        return {"accepted": r.accepted, "duplicates": r.duplicates}

    @app.post("/v1/intervals")
    async def post_intervals(request: Request):
        rows = io.parse_intervals_jsonl((await request.body()).decode("utf-8"))
        with write_lock:
            r = ws.ingest_intervals(rows, delta_t_s)
        return {"accepted": r.accepted, "duplicates": r.duplicates}

    @app.get("/v1/patients")
    def list_patients():
        return [{"person_id": r.person, "status": r.status.value, "confirmed_at": r.confirmed_at}
                for r in ws.store.patients]

    @app.post("/v1/patients", status_code=201)
    def post_patient(body: PatientIn):
        with write_lock:
            rec = ws.report_patient(body.person_id, body.confirmed_at)
        return {"person_id": rec.person, "status": rec.status.value, "confirmed_at": rec.confirmed_at}

    @app.post("/v1/patients/{person_id}/status")
    def post_status(person_id: str, body: StatusIn):
        with write_lock:
            rec = ws.update_status(person_id, body.status)
        return {"person_id": rec.person, "status": rec.status.value, "confirmed_at": rec.confirmed_at}

    @app.post("/v1/investigations", status_code=201)
    def post_investigation(body: InvestigationIn):
        cfg = make_config(body.as_of, body.ip_days, body.epsilon_m, body.delta_t_s, body.alpha,
                          body.black_area_window_s, body.causal)
        inv = ws.run_investigation(cfg)
        return {"investigation_id": inv.inv_id}

    @app.get("/v1/investigations/{inv_id}/{table}")
    def get_table(inv_id: str, table: Literal["classes", "black-areas", "suspects-by-area"], format: str = "json"):
        if format not in ("json", "csv"):
            raise ValidationError("format must be json or csv")
        return _table(ws.export(inv_id, table), format)

    @app.get("/v1/query/{person_id}")
    def get_query(person_id: str, investigation: Optional[str] = None):
        return ws.load_investigation(investigation).query(person_id).to_json()

    @app.get("/v1/epi/estimate")
    def get_estimate(p_trans: float, investigation: Optional[str] = None):
        inv = ws.load_investigation(investigation)
        est = inv.estimate(p_trans)
        s = inv.stats
        return {
            "investigation_id": inv.inv_id,
            "beta_hat": est.beta_hat,
            "theta_hat": est.theta_hat,
            "iu_size": est.iu_size,
            "contacts_per_infective_per_day": s.contacts_per_infective_per_day,
            "distinct_pairs": s.distinct_pairs,
            "infective_count": s.infective_count,
            "window": list(s.window),
        }

    @app.post("/v1/epi/simulate")
    def post_simulate(body: SimulateIn):
        try:
            params = EpiParams(**body.params)
            init = CompartmentState(**body.init)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None
        run = simulate_sir if body.model == "sir" else simulate_seir
        series = run(params, init, body.horizon, body.step)
        return [{"t_days": c.t, "S": c.S, "E": c.E, "I": c.I, "R": c.R} for c in series]

    return app
