"""Command-line entry point (``ctrace``).

Settings resolve as: command-line flag, then ``--config`` key=value file,
then the built-in default. Exit status is 0 on success and 2 on any
validation or domain error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import ProximityConfig
from .epi import CompartmentState, EpiParams, series_csv, simulate_seir, simulate_sir
from .errors import CtraceError
from .ingest import DeviceReportConfig
from . import io
from .sim import SimConfig, simulate, write_outputs
from .workspace import Workspace, default_data_dir, make_config

DEFAULTS = {
    "ip_days": 14.0,
    "epsilon": 2.0,
    "delta_t": 300,
    "alpha": 3,
    "black_window": None,
    "p_trans": 0.1,
    "persons": 1000,
    "pois": 30,
    "days": 7,
    "seed": 0,
    "participation": 1.0,
    "p_offline": 0.0,
    "initial_patients": 5,
    "report_period": 300,
    "stationary_radius": 2.0,
}
_TYPES = {k: type(v) for k, v in DEFAULTS.items() if v is not None}
_TYPES["black_window"] = int
_TYPES["causal"] = lambda v: v.strip().lower() in ("1", "true", "yes")


class Settings:
    def __init__(self, args, config_file):
        self.args = args
        self.file = io.read_kv(config_file) if config_file else {}

    def __getattr__(self, key):
        v = getattr(self.args, key, None)
        if v is not None:
            return v
        if key in self.file:
            return _TYPES.get(key, str)(self.file[key])
        return DEFAULTS.get(key)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctrace", description="Contact-tracing investigation engine.")
    p.add_argument("--data-dir", type=Path, default=None,
                   help="state directory (default: $CTRACE_DATA_DIR or ./ctrace-data)")
    p.add_argument("--config", type=Path, default=None, help="key=value settings file")
    p.add_argument("-v", "--verbose", action="store_true")
    # --data-dir / --config are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data-dir", type=Path, default=argparse.SUPPRESS)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="cmd", required=True)

    def _cmd(subparsers, name, **kw):
        return subparsers.add_parser(name, parents=[common], **kw)

    s = _cmd(sub, "simulate", help="generate a synthetic population and its trajectories")
    s.add_argument("--persons", type=int)
    s.add_argument("--pois", type=int)
    s.add_argument("--days", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--participation", type=float)
    s.add_argument("--p-offline", dest="p_offline", type=float)
    s.add_argument("--p-trans", dest="p_trans", type=float)
    s.add_argument("--initial-patients", dest="initial_patients", type=int)
    s.add_argument("--report-period", dest="report_period", type=int)
    s.add_argument("--stationary-radius", dest="stationary_radius", type=float)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--delta-t", dest="delta_t", type=int)
    s.add_argument("--out-dir", dest="out_dir", type=Path, required=True)

    s = _cmd(sub, "ingest", help="load trajectories, intervals, areas, zones or patients")
    s.add_argument("--points", type=Path)
    s.add_argument("--intervals", type=Path)
    s.add_argument("--zones", type=Path)
    s.add_argument("--areas", type=Path)
    s.add_argument("--patients", type=Path)
    s.add_argument("--delta-t", dest="delta_t", type=int, help="interval expansion step")

    s = _cmd(sub, "report", help="report a confirmed case")
    s.add_argument("person_id")
    s.add_argument("--confirmed-at", dest="confirmed_at", type=int, required=True)

    s = _cmd(sub, "status", help="change a patient's status")
    s.add_argument("person_id")
    s.add_argument("status", choices=["recovered", "dead"])

    s = _cmd(sub, "investigate", help="run an investigation and persist its results")
    s.add_argument("--as-of", dest="as_of", type=int, required=True)
    s.add_argument("--ip-days", dest="ip_days", type=float)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--delta-t", dest="delta_t", type=int)
    s.add_argument("--alpha", type=int)
    s.add_argument("--black-window", dest="black_window", type=int)
    s.add_argument("--causal", action="store_true", default=None)

    s = _cmd(sub, "query", help="distance class / black-area hit for one person")
    s.add_argument("person_id")
    s.add_argument("--investigation")

    s = _cmd(sub, "black-areas", help="print the black-area table")
    s.add_argument("--investigation")

    epi = _cmd(sub, "epi", help="epidemic parameter estimation and prediction")
    esub = epi.add_subparsers(dest="epi_cmd", required=True)
    s = _cmd(esub, "estimate")
    s.add_argument("--p-trans", dest="p_trans", type=float)
    s.add_argument("--investigation")
    s = _cmd(esub, "simulate")
    s.add_argument("--model", choices=["sir", "seir"], default="sir")
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--n", type=float, required=True)
    s.add_argument("--i0", type=float, required=True)
    s.add_argument("--e0", type=float, default=0.0)
    s.add_argument("--horizon", type=float, required=True)
    s.add_argument("--step", type=float, required=True)

    s = _cmd(sub, "serve", help="run the HTTP API")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--host", default="127.0.0.1")
    return p


def _cmd_simulate(cfg: Settings, out):
    sc = SimConfig(
        persons=cfg.persons, pois=cfg.pois, days=cfg.days, seed=cfg.seed,
        participation=cfg.participation, p_offline=cfg.p_offline, p_trans=cfg.p_trans,
        initial_patients=cfg.initial_patients,
        report=DeviceReportConfig(cfg.report_period, cfg.stationary_radius),
        proximity=ProximityConfig(cfg.epsilon, cfg.delta_t),
    )
    res = simulate(sc)
    write_outputs(res, cfg.out_dir)
    n = sum(len(b) for b in res.batches)
    print(f"wrote {n} points, {len(res.truth.transmissions)} transmissions to {cfg.out_dir}", file=out)


def _cmd_ingest(ws: Workspace, cfg: Settings, out):
    a = cfg.args
    if a.zones:
        ws.set_zones(io.read_zones_csv(a.zones))
    if a.areas:
        ws.set_areas(io.read_areas_csv(a.areas))
    if a.points:
        r = ws.ingest_columns(*io.read_points(a.points))
        print(f"points: accepted={r.accepted} duplicates={r.duplicates} filtered={ws.filter_stats.dropped}",
              file=out)
    if a.intervals:
        r = ws.ingest_intervals(io.read_intervals_csv(a.intervals), cfg.delta_t)
        print(f"intervals: accepted={r.accepted} duplicates={r.duplicates}", file=out)
    if a.patients:
        for person, status, confirmed_at in io.read_patients_csv(a.patients):
            ws.report_patient(person, confirmed_at)
            if status != "active":
                ws.update_status(person, status)
        print(f"patients: {len(ws.store.patients)} on record", file=out)


def _cmd_investigate(ws: Workspace, cfg: Settings, out):
    icfg = make_config(cfg.as_of, cfg.ip_days, cfg.epsilon, cfg.delta_t, cfg.alpha, cfg.black_window,
                       bool(cfg.causal))
    inv = ws.run_investigation(icfg)
    print(f"investigation {inv.inv_id}", file=out)
    for d, members in enumerate(inv.classification.classes):
        print(f"class {d}: {len(members)} {' '.join(sorted(members))}", file=out)
    black = inv.black_areas.black_areas
    print(f"black areas: {len(black)} {' '.join(a.area_id for a, _ in black)}", file=out)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = Settings(args, args.config)
        if args.cmd == "simulate":
            _cmd_simulate(cfg, out)
            return 0
        if args.cmd == "epi" and args.epi_cmd == "simulate":
            init = CompartmentState(S=args.n - args.i0 - args.e0, E=args.e0, I=args.i0, R=0.0)
            params = EpiParams(args.beta, args.gamma, args.sigma)
            run = simulate_sir if args.model == "sir" else simulate_seir
            out.write(series_csv(run(params, init, args.horizon, args.step)))
            return 0

        data_dir = args.data_dir or default_data_dir()
        if args.cmd == "serve":
            import uvicorn

            from .api import create_app

            uvicorn.run(create_app(data_dir, cfg.delta_t), host=args.host, port=args.port)
            return 0
        ws = Workspace(data_dir)
        if args.cmd == "ingest":
            _cmd_ingest(ws, cfg, out)
        elif args.cmd == "report":
            ws.report_patient(args.person_id, args.confirmed_at)
        elif args.cmd == "status":
            ws.update_status(args.person_id, args.status)
        elif args.cmd == "investigate":
            _cmd_investigate(ws, cfg, out)
        elif args.cmd == "query":
            print(json.dumps(ws.load_investigation(args.investigation).query(args.person_id).to_json()), file=out)
        elif args.cmd == "black-areas":
            out.write(ws.export(args.investigation or ws.latest_id(), "black-areas"))
        elif args.cmd == "epi":
            inv = ws.load_investigation(args.investigation)
            est = inv.estimate(cfg.p_trans)
            print(json.dumps({"investigation_id": inv.inv_id, "beta_hat": est.beta_hat,
                              "theta_hat": est.theta_hat, "iu_size": est.iu_size}), file=out)
        return 0
    except (CtraceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
