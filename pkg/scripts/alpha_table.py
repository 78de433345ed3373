"""Gain, phase and delay margins with tracking cost for a list of alpha values.

    python3 scripts/alpha_table.py [--alphas 1 5 10] [--csv out.csv]
"""

import argparse
import math

from symbiotic.config import default_config
from symbiotic.sweep import records_to_csv, run_alpha_study


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.0, 5.0, 10.0])
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()

    cfg = default_config(kind="alpha_study", alphas=args.alphas)
    records = run_alpha_study(cfg, threads=args.threads)
    print(f"{'alpha':>6} {'law':>4} {'GM':>8} {'GM dB':>8} {'PM deg':>8} {'DM s':>9} {'cost':>9}")
    for r in records:
        gm_db = 20 * math.log10(r.gain_margin) if math.isfinite(r.gain_margin) else math.inf
        print(
            f"{r.alpha:6g} {r.variant:>4} {r.gain_margin:8.4f} {gm_db:8.2f} "
            f"{math.degrees(r.phase_margin):8.2f} {r.delay_margin:9.5f} {r.quadratic_cost:9.5f}"
        )
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(records_to_csv(records))


if __name__ == "__main__":
    main()
