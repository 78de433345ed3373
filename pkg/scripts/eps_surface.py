"""Delay margin and quadratic cost over an (eps1, eps2) grid at fixed alpha.

Prints both surfaces as tables (rows eps1, columns eps2) and the increments
of the delay margin along eps1.

    python3 scripts/eps_surface.py [--steps 10 10] [--alpha 10] [--csv grid.csv]
"""

import argparse
import dataclasses

import numpy as np

from symbiotic.config import default_config
from symbiotic.sweep import records_to_csv, run_eps_grid


def table(name: str, e1s, e2s, values) -> None:
    print(f"\n{name} (rows eps1, columns eps2)")
    print("       " + " ".join(f"{e2:8.2f}" for e2 in e2s))
    for e1, row in zip(e1s, values):
        print(f"{e1:6.2f} " + " ".join(f"{v:8.4f}" for v in row))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, nargs=2, default=[10, 10])
    ap.add_argument("--eps1", type=float, nargs=2, default=[0.5, 10.0])
    ap.add_argument("--eps2", type=float, nargs=2, default=[1.0, 50.0])
    ap.add_argument("--alpha", type=float, default=10.0)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()

    cfg = default_config(kind="eps_grid", eps1_range=args.eps1, eps2_range=args.eps2, steps=args.steps)
    cfg = dataclasses.replace(cfg, control=cfg.control.replace(alpha=args.alpha))
    records = run_eps_grid(cfg, threads=args.threads)
    e1s, e2s = cfg.experiment.points()
    by_point = {(r.eps1, r.eps2): r for r in records}
    dm = np.array([[by_point[(a, b)].delay_margin for b in e2s] for a in e1s])
    cost = np.array([[by_point[(a, b)].quadratic_cost for b in e2s] for a in e1s])
    table("delay margin [s]", e1s, e2s, dm)
    table("delay margin increment along eps1 [s]", e1s[1:], e2s, np.diff(dm, axis=0))
    table("quadratic cost", e1s, e2s, cost)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(records_to_csv(records))


if __name__ == "__main__":
    main()
