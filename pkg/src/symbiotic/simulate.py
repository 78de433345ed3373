"""Fixed-step RK4 simulation of the closed loop and trajectory post-processing."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .model import ClosedLoopModel, LtiSystem

DEFAULT_DT = 1e-3
DEFAULT_T_FINAL = 100.0


class DivergenceError(RuntimeError):
    pass


# --------------------------------------------------------------------------- signals


@dataclass(frozen=True)
class Zero:
    def values(self, t: np.ndarray) -> np.ndarray:
        return np.zeros_like(t, dtype=float)

    def bound(self) -> float:
        return 0.0

    def rate_bound(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Constant:
    level: float

    def values(self, t: np.ndarray) -> np.ndarray:
        return np.full_like(t, self.level, dtype=float)

    def bound(self) -> float:
        return abs(self.level)

    def rate_bound(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Sinusoid:
    """``offset + amplitude * sin(omega * t)``."""

    offset: float
    amplitude: float
    omega: float = 1.0

    def values(self, t: np.ndarray) -> np.ndarray:
        return self.offset + self.amplitude * np.sin(self.omega * t)

    def bound(self) -> float:
        return abs(self.offset) + abs(self.amplitude)

    def rate_bound(self) -> float:
        return abs(self.amplitude * self.omega)


@dataclass(frozen=True)
class FilteredSquareWave:
    """Square wave of +/-amplitude (positive first half-period) through a unit-gain lag.

    The lag ``s' = -pole * (s - sq(t))``, ``s(0) = 0``, is driven by a
    piecewise-constant input, so it is evaluated in closed form.
    """

    amplitude: float = 1.0
    period_s: float = 40.0
    filter_pole: float = 0.5

    def __post_init__(self):
        if not self.period_s > 0:
            raise ValueError("period_s must be positive")
        if not self.filter_pole > 0:
            raise ValueError("filter_pole must be positive")

    def values(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        half = 0.5 * self.period_s
        k = np.floor(t / half)
        tau = t - k * half
        q = math.exp(-self.filter_pole * half)
        sign_k = np.where(k % 2 == 0, 1.0, -1.0)
        # lag value at the start of segment k; q**k underflows harmlessly to 0
        with np.errstate(under="ignore"):
            s_k = self.amplitude * (1.0 - q) * (q**k - sign_k) / (1.0 + q)
        a_k = self.amplitude * sign_k
        return a_k + (s_k - a_k) * np.exp(-self.filter_pole * tau)

    def bound(self) -> float:
        return abs(self.amplitude)

    def rate_bound(self) -> float:
        return 2.0 * abs(self.amplitude) * self.filter_pole


SignalSpec = Zero | Constant | Sinusoid | FilteredSquareWave


def eval_signal(spec: SignalSpec, t, dim: int = 1) -> np.ndarray:
    """Signal value(s) at time(s) `t`, broadcast to `dim` identical channels."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("signals are defined for t >= 0")
    v = spec.values(np.atleast_1d(t_arr))
    out = np.repeat(v[:, None], dim, axis=1)
    return out[0] if t_arr.ndim == 0 else out


# --------------------------------------------------------------------------- RK4


def rk4(f: Callable[[float, np.ndarray], np.ndarray], z0, t: np.ndarray) -> np.ndarray:
    """Classic RK4 on an arbitrary right-hand side over the grid `t`."""
    z = np.asarray(z0, dtype=float).copy()
    out = np.empty((len(t),) + z.shape)
    out[0] = z
    for k in range(len(t) - 1):
        h = t[k + 1] - t[k]
        tk = t[k]
        k1 = f(tk, z)
        k2 = f(tk + 0.5 * h, z + 0.5 * h * k1)
        k3 = f(tk + 0.5 * h, z + 0.5 * h * k2)
        k4 = f(tk + h, z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = z
    return out


def rk4_propagators(A: np.ndarray, B: np.ndarray, h: float):
    """One RK4 step of ``z' = A z + B w(t)`` written as a linear map.

    Returns ``(Phi, G0, Gh, G1)`` with
    ``z+ = Phi z + G0 w(t) + Gh w(t + h/2) + G1 w(t + h)``.
    """

    def step(z, w0, wh, w1):
        k1 = A @ z + B @ w0
        k2 = A @ (z + 0.5 * h * k1) + B @ wh
        k3 = A @ (z + 0.5 * h * k2) + B @ wh
        k4 = A @ (z + h * k3) + B @ w1
        return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    N, nw = B.shape
    I_z, O_z = np.eye(N), np.zeros((N, nw))
    I_w, O_w = np.eye(nw), np.zeros((nw, nw))
    Phi = step(I_z, np.zeros((nw, N)), np.zeros((nw, N)), np.zeros((nw, N)))
    G0 = step(O_z, I_w, O_w, O_w)
    Gh = step(O_z, O_w, I_w, O_w)
    G1 = step(O_z, O_w, O_w, I_w)
    return Phi, G0, Gh, G1


def simulate_lti(
    sys: LtiSystem,
    z0,
    inputs: Callable[[np.ndarray], np.ndarray],
    t: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """RK4 on a uniform grid; inputs are evaluated exactly at every stage time.

    `inputs` maps an array of times to an array of shape ``(len(times), in_dim)``.
    Returns ``(states, outputs)`` sampled on `t`.
    """
    t = np.asarray(t, dtype=float)
    h = t[1] - t[0]
    Phi, G0, Gh, G1 = rk4_propagators(sys.A, sys.B, h)
    w = inputs(t)
    w_half = inputs(t[:-1] + 0.5 * h)
    drive = w[:-1] @ G0.T + w_half @ Gh.T + w[1:] @ G1.T

    Z = np.empty((len(t), sys.state_dim))
    z = np.asarray(z0, dtype=float).copy()
    Z[0] = z
    check_every = 1000
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(len(t) - 1):
            z = Phi @ z + drive[k]
            Z[k + 1] = z
            if k % check_every == 0 and not np.all(np.isfinite(z)):
                break
    bad = ~np.all(np.isfinite(Z), axis=1)
    if bad.any():
        k = int(np.argmax(bad))
        raise DivergenceError(f"divergence at t={t[k]:.6g}")
    Y = Z @ sys.C.T + w @ sys.D.T
    return Z, Y


# --------------------------------------------------------------------------- trajectories

_CHANNELS = ("u", "u_n", "u_f", "u_a", "u_fl", "d_hat", "d")
_CSV_STEMS = {"u": "u", "u_n": "un", "u_f": "uf", "u_a": "ua", "u_fl": "ufl", "d_hat": "dhat", "d": "d"}


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    x_n: np.ndarray
    e: np.ndarray
    u: np.ndarray
    u_n: np.ndarray
    u_f: np.ndarray
    u_a: np.ndarray
    u_fl: np.ndarray
    d_hat: np.ndarray
    d: np.ndarray
    r: np.ndarray | None = None

    def __post_init__(self):
        N = len(self.t)
        for name in ("x", "x_n", "e") + _CHANNELS:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.shape[0] != N:
                raise ValueError(f"series {name} has {arr.shape[0]} samples, expected {N}")
            setattr(self, name, arr)
        scale = max(1.0, float(np.max(np.abs(self.x), initial=0.0)))
        if np.max(np.abs(self.e - (self.x - self.x_n)), initial=0.0) > 1e-9 * scale:
            raise ValueError("e is inconsistent with x - x_n")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def header(self) -> list[str]:
        n, m = self.x.shape[1], self.u.shape[1]
        cols = ["t"]
        cols += [f"x{i + 1}" for i in range(n)]
        cols += [f"xn{i + 1}" for i in range(n)]
        cols += [f"e{i + 1}" for i in range(n)]
        for ch in _CHANNELS:
            stem = _CSV_STEMS[ch]
            cols += [stem] if m == 1 else [f"{stem}{j + 1}" for j in range(m)]
        return cols

    def table(self) -> np.ndarray:
        return np.hstack(
            [self.t[:, None], self.x, self.x_n, self.e] + [getattr(self, ch) for ch in _CHANNELS]
        )

    def to_csv(self, path: str | Path | None = None) -> str:
        """Write the trajectory as CSV (shortest round-trip floats); returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for row in self.table():
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def integrate(
    model: ClosedLoopModel,
    r: SignalSpec,
    d: SignalSpec,
    t_final: float = DEFAULT_T_FINAL,
    dt: float = DEFAULT_DT,
    z0=None,
) -> Trajectory:
    """Simulate the closed loop under reference `r` and disturbance `d`."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_final >= dt:
        raise ValueError("t_final must be at least dt")
    sys = model.system
    rho = float(np.max(np.abs(np.linalg.eigvals(sys.A)), initial=0.0))
    if dt * rho >= 1.0:
        warnings.warn(f"dt={dt} may be too coarse (dt * spectral radius = {dt * rho:.3g})", stacklevel=2)

    steps = int(round(t_final / dt))
    t = dt * np.arange(steps + 1)
    p = model.inputs["r"].stop - model.inputs["r"].start
    m = model.inputs["d"].stop - model.inputs["d"].start

    def inputs(times: np.ndarray) -> np.ndarray:
        return np.hstack([eval_signal(r, times, p), eval_signal(d, times, m)])

    if z0 is None:
        z0 = model.initial_state()
    _, Y = simulate_lti(sys, z0, inputs, t)
    taps = {name: Y[:, sl] for name, sl in model.taps.items()}
    w = inputs(t)
    return Trajectory(
        t=t,
        d=w[:, model.inputs["d"]],
        r=w[:, model.inputs["r"]],
        **taps,
    )


def quadratic_cost(traj: Trajectory, t_end: float | None = None) -> float:
    """Trapezoidal value of the integral of ``e^T e`` over ``[0, t_end]``."""
    t = traj.t
    if t_end is None:
        t_end = float(t[-1])
    if t_end > t[-1] + 1e-9 * max(1.0, abs(t[-1])):
        raise ValueError(f"t_end={t_end} beyond trajectory end {t[-1]}")
    ee = np.sum(traj.e**2, axis=1)
    k = int(np.searchsorted(t, t_end, side="right"))
    ts, ys = t[:k], ee[:k]
    if ts[-1] < t_end:
        # close the last partial interval by linear interpolation
        ts = np.append(ts, t_end)
        ys = np.append(ys, np.interp(t_end, t, ee))
    return float(trapezoid(ys, ts))
