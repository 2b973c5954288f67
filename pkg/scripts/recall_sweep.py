"""Share of true contacts found by the investigation as device participation varies.

    python scripts/recall_sweep.py --seeds 11 12 13 --levels 0.25 0.5 0.75 1.0
"""

import argparse
import time

from ctrace.engine import InvestigationConfig, classify_suspects
from ctrace.sim import SimConfig, measure_recall, simulate
from ctrace.store import TrajectoryStore


def run_once(participation: float, seed: int, persons: int, pois: int, days: int, p_trans: float) -> tuple[float, int]:
    res = simulate(SimConfig(persons=persons, pois=pois, days=days, seed=seed,
                             participation=participation, p_trans=p_trans))
    store = TrajectoryStore()
    for batch in res.batches:
        store.append_points(batch)
    for s in res.world.seeds:
        store.report_patient(s, res.cfg.start_ts)
    cfg = InvestigationConfig(current_date=res.end_ts, proximity=res.cfg.proximity)
    cls = classify_suspects(store.snapshot(cfg.current_date, cfg.proximity), cfg)
    return measure_recall(cls, res.truth), len(res.truth.contacts)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[11])
    ap.add_argument("--levels", type=float, nargs="+", default=[0.25, 0.5, 0.75, 1.0])
    ap.add_argument("--persons", type=int, default=1000)
    ap.add_argument("--pois", type=int, default=30)
    ap.add_argument("--days", type=int, default=7)
    ap.add_argument("--p-trans", type=float, default=1.0)
    args = ap.parse_args()

    print("seed,participation,true_contacts,recall,abs_error,seconds")
    for seed in args.seeds:
        for level in args.levels:
            t = time.perf_counter()
            recall, n = run_once(level, seed, args.persons, args.pois, args.days, args.p_trans)
            print(f"{seed},{level},{n},{recall:.4f},{abs(recall - level):.4f},{time.perf_counter() - t:.1f}")


if __name__ == "__main__":
    main()
