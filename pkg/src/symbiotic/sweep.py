"""Experiment drivers: alpha studies, (eps1, eps2) grids and iso-cost selection."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .certificates import build_certificate_matrices, classify_regime
from .config import AlphaStudy, EpsGrid, IsoCost, RunConfig
from .freq import MarginReport, loop_margins
from .model import Variant, assemble_closed_loop, open_loop_at_plant_input
from .simulate import Trajectory, integrate, quadratic_cost

log = logging.getLogger(__name__)


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class SweepRecord:
    alpha: float
    eps1: float
    eps2: float
    variant: str
    delay_margin: float | None = None
    gain_margin: float | None = None
    phase_margin: float | None = None
    quadratic_cost: float | None = None
    M2_pd: bool | None = None
    M3_pd: bool | None = None
    M4_pd: bool | None = None
    regime: str = ""
    status: str = "ok"

    FIELDS = (
        "alpha",
        "eps1",
        "eps2",
        "variant",
        "delay_margin",
        "gain_margin",
        "phase_margin",
        "quadratic_cost",
        "M2_pd",
        "M3_pd",
        "M4_pd",
        "regime",
        "status",
    )

    @property
    def key(self) -> tuple:
        return (self.alpha, self.eps1, self.eps2, self.variant)

    def row(self) -> list[str]:
        out = []
        for name in self.FIELDS:
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif isinstance(v, bool):
                out.append(str(v).lower())
            elif isinstance(v, float):
                out.append("inf" if math.isinf(v) else repr(v))
            else:
                out.append(str(v))
        return out


def records_to_csv(records: list[SweepRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SweepRecord.FIELDS)
    for rec in records:
        w.writerow(rec.row())
    return buf.getvalue()


def evaluate_point(
    cfg: RunConfig, alpha: float, eps1: float, eps2: float, variant: Variant
) -> tuple[SweepRecord, MarginReport, Trajectory]:
    """Margins, cost and certificate flags for one parameter point."""
    control = cfg.control.replace(alpha=alpha, eps1=eps1, eps2=eps2, variant=variant)
    loop = open_loop_at_plant_input(cfg.plant, cfg.gains, control)
    margins = loop_margins(loop, cfg.omega_lo, cfg.omega_hi, cfg.points)
    model = assemble_closed_loop(cfg.plant, cfg.gains, control)
    traj = integrate(model, cfg.reference, cfg.disturbance, cfg.t_final, cfg.dt)
    mats = build_certificate_matrices(control, model.P, cfg.plant.B)
    flags = mats.pd_flags
    regime, _, _ = classify_regime(
        control, mats, cfg.disturbance.bound(), cfg.disturbance.rate_bound(), cfg.d1, cfg.d2
    )
    rec = SweepRecord(
        alpha=float(alpha),
        eps1=float(eps1),
        eps2=float(eps2),
        variant=variant.value,
        delay_margin=float(margins.delay_margin),
        gain_margin=float(margins.gain_margin),
        phase_margin=None if margins.phase_margin is None else float(margins.phase_margin),
        quadratic_cost=quadratic_cost(traj),
        M2_pd=flags["M2"],
        M3_pd=flags["M3"],
        M4_pd=flags["M4"],
        regime=regime,
    )
    return rec, margins, traj


def _run_points(cfg: RunConfig, points: list[tuple], threads: int, *, strict: bool, keep=False):
    def job(pt):
        alpha, eps1, eps2, variant = pt
        try:
            rec, _, traj = evaluate_point(cfg, alpha, eps1, eps2, variant)
        except Exception as exc:  # noqa: BLE001 - recorded in-row or re-raised below
            if strict:
                raise ExperimentError(
                    f"alpha={alpha:g}, eps1={eps1:g}, eps2={eps2:g}, variant={variant.value}: {exc}"
                ) from exc
            return SweepRecord(float(alpha), float(eps1), float(eps2), variant.value, status=f"error: {exc}"), None
        return rec, (traj if keep else None)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, points))
    else:
        results = [job(p) for p in points]
    results.sort(key=lambda pair: pair[0].key)
    return results


def run_alpha_study(cfg: RunConfig, threads: int = 1, keep_trajectories: bool = False):
    """One row per (alpha, variant); the first failure aborts with the point named.

    Returns the records, plus the trajectories keyed by (alpha, variant) when
    `keep_trajectories` is set.
    """
    exp = cfg.experiment
    if not isinstance(exp, AlphaStudy) or not exp.alphas:
        raise ExperimentError("alpha study needs a nonempty alpha list")
    c = cfg.control
    points = [(a, c.eps1, c.eps2, v) for a in exp.alphas for v in (Variant.STANDARD, Variant.NEW)]
    results = _run_points(cfg, points, threads, strict=True, keep=keep_trajectories)
    records = [r for r, _ in results]
    if keep_trajectories:
        return records, {(r.alpha, r.variant): tr for r, tr in results}
    return records


def run_eps_grid(cfg: RunConfig, threads: int = 1) -> list[SweepRecord]:
    """Full factorial over (eps1, eps2) for the filtered law; failures stay in-row."""
    exp = cfg.experiment
    if not isinstance(exp, EpsGrid):
        raise ExperimentError("eps grid experiment required")
    eps1s, eps2s = exp.points()
    a = cfg.control.alpha
    points = [(a, float(e1), float(e2), Variant.NEW) for e1 in eps1s for e2 in eps2s]
    return [r for r, _ in _run_points(cfg, points, threads, strict=False)]


def select_iso_cost(records: list[SweepRecord], target: float, tolerance: float) -> list[SweepRecord]:
    """Grid points whose cost lies within ``tolerance * target`` of `target`."""
    band = tolerance * target
    return [
        r
        for r in records
        if r.quadratic_cost is not None and abs(r.quadratic_cost - target) <= band
    ]


def run_iso_cost(cfg: RunConfig, threads: int = 1, grid: list[SweepRecord] | None = None):
    exp = cfg.experiment
    if not isinstance(exp, IsoCost):
        raise ExperimentError("iso-cost experiment required")
    if grid is None:
        grid = run_eps_grid(cfg, threads)
    picked = select_iso_cost(grid, exp.target_cost, exp.tolerance)
    if not picked:
        log.warning("no grid point within %g of target cost %g", exp.tolerance, exp.target_cost)
    return picked, grid
