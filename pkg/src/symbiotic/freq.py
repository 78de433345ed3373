"""Frequency response and classical stability margins of SISO loops."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import complex_solve_masked
from .model import LtiSystem

DEFAULT_OMEGA_LO = 1e-3
DEFAULT_OMEGA_HI = 1e4
DEFAULT_POINTS = 2000
BISECT_TOL = 1e-10
BISECT_MAX_ITER = 200


class MarginError(RuntimeError):
    pass


@dataclass
class FrequencyResponse:
    omega: np.ndarray
    value: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.omega) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        self.magnitude = np.abs(self.value)
        self.phase = np.full(self.omega.shape, np.nan)
        ok = self.valid
        self.phase[ok] = np.unwrap(np.angle(self.value[ok]))

    def to_csv(self, path: str | Path | None = None) -> str:
        lines = ["omega,re,im,mag,phase_rad"]
        for w, v, mag, ph in zip(self.omega, self.value, self.magnitude, self.phase):
            lines.append(",".join(repr(float(c)) for c in (w, v.real, v.imag, mag, ph)))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


@dataclass
class MarginReport:
    """Margins in linear gain, radians and seconds; ``inf`` when no crossing exists."""

    gain_margin: float
    gm_freq: float | None
    phase_margin: float | None
    pm_freq: float | None
    delay_margin: float
    gain_crossings: list[tuple[float, float, float]] = field(default_factory=list)
    phase_crossings: list[tuple[float, float]] = field(default_factory=list)

    @property
    def gain_margin_db(self) -> float:
        return 20.0 * math.log10(self.gain_margin) if math.isfinite(self.gain_margin) else math.inf


def _siso(sys: LtiSystem) -> None:
    if sys.in_dim != 1 or sys.out_dim != 1:
        raise ValueError("frequency analysis requires a SISO system")


def _evaluate(sys: LtiSystem, omega: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = sys.state_dim
    s = 1j * np.asarray(omega, dtype=float)
    if q == 0:
        return np.full(s.shape, complex(sys.D[0, 0])), np.ones(s.shape, dtype=bool)
    M = s[:, None, None] * np.eye(q) - sys.A
    rhs = np.broadcast_to(sys.B[:, 0].astype(complex), s.shape + (q,))
    X, ok = complex_solve_masked(M, rhs)
    L = X @ sys.C[0] + sys.D[0, 0]
    return L, ok


def loop_value(sys: LtiSystem, omega: float) -> complex:
    L, ok = _evaluate(sys, np.array([omega]))
    if not ok[0]:
        raise MarginError(f"loop evaluated at a pole (omega={omega})")
    return complex(L[0])


def frequency_response(
    sys: LtiSystem,
    omega_lo: float = DEFAULT_OMEGA_LO,
    omega_hi: float = DEFAULT_OMEGA_HI,
    points: int = DEFAULT_POINTS,
) -> FrequencyResponse:
    """Sample ``L(jw)`` on a log-spaced grid; samples at poles are flagged invalid."""
    _siso(sys)
    if not (omega_lo > 0 and omega_hi > omega_lo and points >= 2):
        raise ValueError("need 0 < omega_lo < omega_hi and points >= 2")
    omega = np.logspace(math.log10(omega_lo), math.log10(omega_hi), int(points))
    L, ok = _evaluate(sys, omega)
    return FrequencyResponse(omega=omega, value=L, valid=ok)


def _bisect(f, lo: float, hi: float) -> float:
    """Root of `f` on ``[lo, hi]`` (log-frequency bisection) to ``|f| <= BISECT_TOL``."""
    f_lo = f(lo)
    if abs(f_lo) <= BISECT_TOL:
        return lo
    f_hi = f(hi)
    if abs(f_hi) <= BISECT_TOL:
        return hi
    if f_lo * f_hi > 0:
        raise MarginError(f"no sign change on [{lo}, {hi}]")
    a, b = math.log(lo), math.log(hi)
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (a + b)
        w = math.exp(mid)
        f_mid = f(w)
        if abs(f_mid) <= BISECT_TOL:
            return w
        if f_mid * f_lo < 0:
            b = mid
        else:
            a, f_lo = mid, f_mid
        if b - a < 4 * np.finfo(float).eps * max(abs(a), 1.0):
            # interval exhausted in floating point; accept the closer end
            return math.exp(0.5 * (a + b))
    raise MarginError(f"bisection did not converge on [{lo}, {hi}]")


def compute_margins(resp: FrequencyResponse, refine: LtiSystem) -> MarginReport:
    """Gain, phase and delay margins of the return ratio `refine`.

    `resp` only brackets the crossings; every crossing is then refined on
    the exact system. The minimum over crossings is reported for each kind.
    """
    _siso(refine)
    idx = np.flatnonzero(resp.valid)
    w = resp.omega[idx]
    mag = resp.magnitude[idx]
    ph = resp.phase[idx]

    def log_mag(om: float) -> float:
        return math.log(abs(loop_value(refine, om)))

    gain_crossings: list[tuple[float, float, float]] = []
    above = mag > 1.0
    for i in np.flatnonzero(above[:-1] != above[1:]):
        wc = _bisect(log_mag, w[i], w[i + 1])
        Lc = loop_value(refine, wc)
        # phase distance above -pi, folded to (-pi, pi]
        pm = math.remainder(math.atan2(Lc.imag, Lc.real) + math.pi, 2 * math.pi)
        if pm == -math.pi:
            pm = math.pi
        # no delay helps a loop that is already past -pi
        dm = max(pm, 0.0) / wc
        gain_crossings.append((wc, pm, dm))

    phase_crossings: list[tuple[float, float]] = []
    level = np.floor((ph + math.pi) / (2 * math.pi))
    for i in np.flatnonzero(level[:-1] != level[1:]):
        target = 2 * math.pi * max(level[i], level[i + 1]) - math.pi
        L_ref, ph_ref = resp.value[idx[i]], ph[i]

        def phase_err(om: float, L_ref=L_ref, ph_ref=ph_ref, target=target) -> float:
            Lw = loop_value(refine, om)
            return ph_ref + float(np.angle(Lw / L_ref)) - target

        wp = _bisect(phase_err, w[i], w[i + 1])
        phase_crossings.append((wp, 1.0 / abs(loop_value(refine, wp))))

    if phase_crossings:
        wp, gm = min(phase_crossings, key=lambda c: c[1])
        gain_margin, gm_freq = gm, wp
    else:
        gain_margin, gm_freq = math.inf, None

    if gain_crossings:
        wc, pm, _ = min(gain_crossings, key=lambda c: c[1])
        phase_margin, pm_freq = pm, wc
        delay_margin = min(c[2] for c in gain_crossings)
    else:
        phase_margin = pm_freq = None
        delay_margin = math.inf

    return MarginReport(
        gain_margin=gain_margin,
        gm_freq=gm_freq,
        phase_margin=phase_margin,
        pm_freq=pm_freq,
        delay_margin=delay_margin,
        gain_crossings=gain_crossings,
        phase_crossings=phase_crossings,
    )


def loop_margins(
    sys: LtiSystem,
    omega_lo: float = DEFAULT_OMEGA_LO,
    omega_hi: float = DEFAULT_OMEGA_HI,
    points: int = DEFAULT_POINTS,
) -> MarginReport:
    return compute_margins(frequency_response(sys, omega_lo, omega_hi, points), sys)
