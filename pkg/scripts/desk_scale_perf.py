"""Ingest a dense synthetic trajectory set into a data directory and time one investigation.

    python scripts/desk_scale_perf.py --persons 1000 --days 7 --cadence 300
"""

import argparse
import resource
import tempfile
import time

from ctrace.core import Area, GeoPoint
from ctrace.sim import bulk_trajectories
from ctrace.workspace import Workspace, make_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--persons", type=int, default=1000)
    ap.add_argument("--days", type=int, default=7)
    ap.add_argument("--cadence", type=int, default=300)
    ap.add_argument("--patients", type=int, default=5)
    ap.add_argument("--seed", type=int, default=9)
    ap.add_argument("--data-dir", default=None, help="default: a temporary directory")
    args = ap.parse_args()

    t = time.perf_counter()
    persons, lat, lon, ts = bulk_trajectories(args.persons, args.days, args.cadence, seed=args.seed)
    print(f"generated {len(ts)} points in {time.perf_counter() - t:.1f} s")

    with tempfile.TemporaryDirectory() as tmp:
        ws = Workspace(args.data_dir or tmp)
        ws.set_areas([Area(f"A{i:02d}", GeoPoint(48.80 + 0.003 * i, 2.25 + 0.005 * i), 50.0) for i in range(30)])
        per_day = args.persons * 86_400 // args.cadence
        t = time.perf_counter()
        for s in range(0, len(ts), per_day):
            ws.ingest_columns(persons[s:s + per_day], lat[s:s + per_day], lon[s:s + per_day], ts[s:s + per_day])
        t_ingest = time.perf_counter() - t
        for k in range(args.patients):
            ws.report_patient(f"P{k * 7:05d}", int(ts[-1]) - 2 * 86_400)
        t = time.perf_counter()
        inv = ws.run_investigation(make_config(int(ts[-1]) + 1))
        t_inv = time.perf_counter() - t
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024
    print(f"ingest {t_ingest:.1f} s, investigation {t_inv:.1f} s, total {t_ingest + t_inv:.1f} s, "
          f"peak RSS {rss:.0f} MB")
    print("class sizes:", [len(c) for c in inv.classification.classes])
    print("black areas:", [a.area_id for a, _ in inv.black_areas.black_areas])


if __name__ == "__main__":
    main()
