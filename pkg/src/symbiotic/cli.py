"""Command line entry point.

    symbiotic run CONFIG.json [--out DIR] [--validate] [--threads N]
    symbiotic schema

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .certificates import (
    THEOREM1,
    THEOREM2,
    build_certificate_matrices,
    certificate_report,
    classify_regime,
)
from .config import CONFIG_SCHEMA, AlphaStudy, ConfigError, IsoCost, EpsGrid, RunConfig, load_config
from .freq import MarginError, frequency_response, compute_margins
from .linalg import LinalgError, solve_lyapunov
from .model import ModelError, assemble_closed_loop, open_loop_at_plant_input
from .simulate import DivergenceError, integrate
from .sweep import ExperimentError, records_to_csv, run_alpha_study, run_eps_grid, run_iso_cost

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("symbiotic")


def _validate(cfg: RunConfig, out) -> None:
    A_n, _ = cfg.gains.reference_model(cfg.plant)
    P = solve_lyapunov(A_n, cfg.control.weight(cfg.plant.n))
    mats = build_certificate_matrices(cfg.control, P, cfg.plant.B)
    flags = mats.pd_flags
    print("config ok", file=out)
    print("  " + ", ".join(f"{k} pd={v}" for k, v in flags.items()), file=out)
    regime, constants, _ = classify_regime(
        cfg.control, mats, cfg.disturbance.bound(), cfg.disturbance.rate_bound(), cfg.d1, cfg.d2
    )
    if regime == THEOREM1:
        print(
            f"Theorem 1 constants feasible: bstar={constants.bstar!r}, lstar={constants.lstar!r}",
            file=out,
        )
    elif regime == THEOREM2:
        print("Theorem 1 constants infeasible; Theorem 2 regime active", file=out)
    else:
        print("Theorem 1 constants infeasible; no certificate applies", file=out)


def _fmt(x: float) -> str:
    return f"{x:g}"


def _execute(cfg: RunConfig, out_dir: Path, threads: int) -> list[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = ["resolved_config.json"]
    (out_dir / "resolved_config.json").write_text(json.dumps(cfg.resolved, indent=2, sort_keys=True) + "\n")
    exp = cfg.experiment

    if isinstance(exp, AlphaStudy):
        records, trajs = run_alpha_study(cfg, threads, keep_trajectories=True)
        (out_dir / "alpha_study.csv").write_text(records_to_csv(records))
        written.append("alpha_study.csv")
        for (alpha, variant), traj in sorted(trajs.items()):
            name = f"traj_alpha{_fmt(alpha)}_{variant}.csv"
            traj.to_csv(out_dir / name)
            written.append(name)
    elif isinstance(exp, IsoCost):
        picked, grid = run_iso_cost(cfg, threads)
        (out_dir / "eps_grid.csv").write_text(records_to_csv(grid))
        (out_dir / "iso_cost.csv").write_text(records_to_csv(picked))
        written += ["eps_grid.csv", "iso_cost.csv"]
    elif isinstance(exp, EpsGrid):
        grid = run_eps_grid(cfg, threads)
        (out_dir / "eps_grid.csv").write_text(records_to_csv(grid))
        written.append("eps_grid.csv")
    else:
        model = assemble_closed_loop(cfg.plant, cfg.gains, cfg.control)
        traj = integrate(model, cfg.reference, cfg.disturbance, cfg.t_final, cfg.dt)
        traj.to_csv(out_dir / "trajectory.csv")
        loop = open_loop_at_plant_input(cfg.plant, cfg.gains, cfg.control)
        resp = frequency_response(loop, cfg.omega_lo, cfg.omega_hi, cfg.points)
        resp.to_csv(out_dir / "frequency_response.csv")
        margins = compute_margins(resp, loop)
        rep = certificate_report(
            traj,
            cfg.control,
            model.P,
            cfg.plant.B,
            cfg.disturbance.bound(),
            cfg.disturbance.rate_bound(),
            cfg.d1,
            cfg.d2,
        )
        rep.to_csv(out_dir / "certificate_report.csv")
        lines = [
            f"gain_margin = {margins.gain_margin!r}",
            f"gain_margin_db = {margins.gain_margin_db!r}",
            f"phase_margin = {margins.phase_margin!r}",
            f"delay_margin = {margins.delay_margin!r}",
        ]
        (out_dir / "summary.txt").write_text("\n".join(lines) + "\n" + rep.summary())
        written += ["trajectory.csv", "frequency_response.csv", "certificate_report.csv", "summary.txt"]
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symbiotic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a JSON config")
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, default=None, help="output directory (overrides config)")
    run.add_argument("--validate", action="store_true", help="check config and certificate preconditions only")
    run.add_argument("--threads", type=int, default=1)
    sub.add_parser("schema", help="print the config JSON schema")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2))
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.validate:
            _validate(cfg, sys.stdout)
            return EXIT_OK
        out_dir = args.out if args.out is not None else Path(cfg.output_dir)
        for name in _execute(cfg, out_dir, args.threads):
            print(out_dir / name)
    except (ModelError, LinalgError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, MarginError, ExperimentError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
