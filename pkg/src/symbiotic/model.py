"""Plant, reference model, symbiotic control law and their LTI realizations.

Closed-loop state ordering (fixed)::

    [x (n), x_n (n), xi1 (n), xi2 (m), u_fl (m), d_hat (m)]

``xi2`` and ``u_fl`` are present only for the new (filtered) fixed-gain
law. ``xi1`` holds ``x0 + integral(A_n x + B_n r)`` so that the fixed-gain
control needs no constant offset term:

    u_f = alpha * B_i (xi1 - x) - alpha * eps1 * xi2
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    LinalgError,
    as_matrix,
    complex_solve,
    hurwitz_check,
    is_positive_definite,
    pseudo_left_inverse,
    solve_lyapunov,
)


class ModelError(ValueError):
    pass


class Variant(str, enum.Enum):
    STANDARD = "SFG"
    NEW = "NFG"


@dataclass(frozen=True)
class PlantModel:
    A: np.ndarray
    B: np.ndarray
    x0: np.ndarray | None = None

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ModelError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ModelError(f"B must have {A.shape[0]} rows, got {B.shape}")
        x0 = np.zeros(A.shape[0]) if self.x0 is None else np.asarray(self.x0, float).reshape(-1)
        if x0.shape != (A.shape[0],):
            raise ModelError(f"x0 must have length {A.shape[0]}")
        # raises on rank-deficient B
        B_i = pseudo_left_inverse(B)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "B_i", B_i)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @classmethod
    def double_integrator(cls) -> PlantModel:
        return cls(A=[[0.0, 1.0], [0.0, 0.0]], B=[[0.0], [1.0]])


@dataclass(frozen=True)
class NominalGains:
    K1: np.ndarray
    K2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K1", as_matrix(self.K1, "K1"))
        object.__setattr__(self, "K2", as_matrix(self.K2, "K2"))

    @property
    def p(self) -> int:
        return self.K2.shape[1]

    def reference_model(self, plant: PlantModel) -> tuple[np.ndarray, np.ndarray]:
        """(A_n, B_n) = (A - B K1, B K2), with the Hurwitz requirement checked."""
        if self.K1.shape != (plant.m, plant.n):
            raise ModelError(f"K1 must be {plant.m}x{plant.n}, got {self.K1.shape}")
        if self.K2.shape[0] != plant.m:
            raise ModelError(f"K2 must have {plant.m} rows, got {self.K2.shape}")
        A_n = plant.A - plant.B @ self.K1
        if not hurwitz_check(A_n):
            raise ModelError("A - B K1 is not Hurwitz")
        return A_n, plant.B @ self.K2


@dataclass(frozen=True)
class SymbioticConfig:
    """Scalars of the symbiotic control law.

    ``eps1`` may be zero, which turns the new law into the standard one.
    """

    alpha: float
    eps1: float = 3.0
    eps2: float = 10.0
    beta1: float = 0.1
    beta2: float = 3.0
    beta3: float = 1.0
    mu1: float = 0.0
    mu2: float = 0.0
    R: np.ndarray | None = None
    variant: Variant = Variant.NEW

    def __post_init__(self):
        for name in ("alpha", "eps2", "beta1", "beta2", "beta3"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be positive")
        for name in ("eps1", "mu1", "mu2"):
            if not getattr(self, name) >= 0:
                raise ModelError(f"{name} must be nonnegative")
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.R is not None:
            R = as_matrix(self.R, "R")
            try:
                pd = is_positive_definite(R)
            except LinalgError as exc:
                raise ModelError(str(exc)) from exc
            if not pd:
                raise ModelError("R must be positive definite")
            object.__setattr__(self, "R", R)

    def weight(self, n: int) -> np.ndarray:
        R = np.eye(n) if self.R is None else self.R
        if R.shape != (n, n):
            raise ModelError(f"R must be {n}x{n}, got {R.shape}")
        return R

    @property
    def filtered(self) -> bool:
        return self.variant is Variant.NEW

    @property
    def eps1_eff(self) -> float:
        return self.eps1 if self.filtered else 0.0

    @property
    def beta4(self) -> float:
        return self.alpha * self.beta2 * self.eps1_eff / self.eps2

    @property
    def filter_time_constant(self) -> float:
        return 1.0 / (self.eps2 + self.mu2)

    @property
    def filter_gain(self) -> float:
        return self.eps2 / (self.eps2 + self.mu2)

    def replace(self, **changes) -> SymbioticConfig:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class LtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, float))
        A = np.asarray(self.A, float)
        q = A.shape[0] if A.size else 0
        A = A.reshape(q, q)
        B = np.asarray(self.B, float).reshape(q, D.shape[1])
        C = np.asarray(self.C, float).reshape(D.shape[0], q)
        for name, M in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, M)

    @classmethod
    def static(cls, D) -> LtiSystem:
        D = np.atleast_2d(np.asarray(D, float))
        return cls(np.zeros((0, 0)), np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)), D)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def in_dim(self) -> int:
        return self.B.shape[1]

    @property
    def out_dim(self) -> int:
        return self.C.shape[0]

    def __neg__(self) -> LtiSystem:
        return LtiSystem(self.A, self.B, -self.C, -self.D)

    def scaled(self, k: float) -> LtiSystem:
        return LtiSystem(self.A, self.B, k * self.C, k * self.D)

    def then(self, other: LtiSystem) -> LtiSystem:
        """Series connection: the output of `self` drives `other`."""
        if other.in_dim != self.out_dim:
            raise ModelError("series connection dimension mismatch")
        q1, q2 = self.state_dim, other.state_dim
        A = np.block(
            [
                [self.A, np.zeros((q1, q2))],
                [other.B @ self.C, other.A],
            ]
        )
        B = np.vstack([self.B, other.B @ self.D])
        C = np.hstack([other.D @ self.C, other.C])
        D = other.D @ self.D
        return LtiSystem(A, B, C, D)

    def evaluate(self, s: complex) -> np.ndarray:
        q = self.state_dim
        if q == 0:
            return self.D.astype(complex)
        X = complex_solve(s * np.eye(q) - self.A, self.B.astype(complex))
        return self.C @ X + self.D


@dataclass(frozen=True)
class ClosedLoopModel:
    """Closed loop with inputs ``[r; d]`` and named output taps."""

    system: LtiSystem
    states: dict[str, slice]
    taps: dict[str, slice]
    inputs: dict[str, slice]
    x0: np.ndarray
    variant: Variant
    P: np.ndarray
    cfg: SymbioticConfig = field(repr=False)

    def initial_state(self, x_n0=None, d_hat0=None, u_fl0=None) -> np.ndarray:
        """Stacked initial state; everything not given is zero, and xi1 starts at x0."""
        z = np.zeros(self.system.state_dim)
        z[self.states["x"]] = self.x0
        z[self.states["xi1"]] = self.x0
        if x_n0 is not None:
            z[self.states["x_n"]] = x_n0
        if d_hat0 is not None:
            z[self.states["d_hat"]] = d_hat0
        if u_fl0 is not None and "u_fl" in self.states:
            z[self.states["u_fl"]] = u_fl0
        return z


class _Layout:
    """Allocates consecutive slices."""

    def __init__(self):
        self.slices: dict[str, slice] = {}
        self.size = 0

    def add(self, name: str, width: int) -> slice:
        sl = slice(self.size, self.size + width)
        self.slices[name] = sl
        self.size += width
        return sl


def _check(plant: PlantModel, gains: NominalGains, cfg: SymbioticConfig):
    A_n, B_n = gains.reference_model(plant)
    R = cfg.weight(plant.n)
    try:
        P = solve_lyapunov(A_n, R)
    except LinalgError as exc:
        raise ModelError(str(exc)) from exc
    return A_n, B_n, P


def _controller_blocks(plant, gains, cfg, A_n, B_n, P, *, with_reference_model: bool):
    """Controller dynamics as a map from (x, r) to u.

    Returns the realization plus the state layout and row maps for u_f.
    """
    n, m, p = plant.n, plant.m, gains.p
    alpha = cfg.alpha
    B, B_i = plant.B, plant.B_i

    lay = _Layout()
    s_xi1 = lay.add("xi1", n)
    if cfg.filtered:
        s_xi2 = lay.add("xi2", m)
        s_ufl = lay.add("u_fl", m)
    s_dh = lay.add("d_hat", m)
    if with_reference_model:
        s_xn = lay.add("x_n", n)
    q = lay.size

    # u_f = Cf z + Df_x x
    Cf = np.zeros((m, q))
    Cf[:, s_xi1] = alpha * B_i
    if cfg.filtered:
        Cf[:, s_xi2] = -alpha * cfg.eps1 * np.eye(m)
    Df_x = -alpha * B_i

    A = np.zeros((q, q))
    Bx = np.zeros((q, n))
    Br = np.zeros((q, p))

    Bx[s_xi1] = A_n
    Br[s_xi1] = B_n
    if cfg.filtered:
        # xi2' = u_f - u_fl
        A[s_xi2] += Cf
        A[s_xi2, s_ufl] -= np.eye(m)
        Bx[s_xi2] += Df_x
        # u_fl' = -eps2 (u_fl - u_f) - mu2 u_fl
        A[s_ufl] += cfg.eps2 * Cf
        A[s_ufl, s_ufl] -= (cfg.eps2 + cfg.mu2) * np.eye(m)
        Bx[s_ufl] += cfg.eps2 * Df_x

    # d_hat' = (beta1 B^T P e - alpha beta2 u_f) / beta3 - mu1 d_hat
    g = B.T @ P * (cfg.beta1 / cfg.beta3)
    A[s_dh] -= (alpha * cfg.beta2 / cfg.beta3) * Cf
    A[s_dh, s_dh] -= cfg.mu1 * np.eye(m)
    Bx[s_dh] += g - (alpha * cfg.beta2 / cfg.beta3) * Df_x
    if with_reference_model:
        A[s_dh, s_xn] -= g
        A[s_xn, s_xn] = A_n
        Br[s_xn] = B_n

    # u = -K1 x + K2 r + u_f - d_hat
    C = Cf.copy()
    C[:, s_dh] -= np.eye(m)
    D = np.hstack([-gains.K1 + Df_x, gains.K2])
    sys = LtiSystem(A, np.hstack([Bx, Br]), C, D)
    return sys, lay.slices, Cf, Df_x


def realize_controller(plant: PlantModel, gains: NominalGains, cfg: SymbioticConfig) -> LtiSystem:
    """Controller from inputs ``[x; r]`` to output ``u``.

    State order is ``[xi1, xi2, u_fl, d_hat, x_n]`` (``xi2``/``u_fl`` only
    for the new law). No derivative of ``x`` is needed.
    """
    A_n, B_n, P = _check(plant, gains, cfg)
    sys, _, _, _ = _controller_blocks(plant, gains, cfg, A_n, B_n, P, with_reference_model=True)
    return sys


def assemble_closed_loop(plant: PlantModel, gains: NominalGains, cfg: SymbioticConfig) -> ClosedLoopModel:
    A_n, B_n, P = _check(plant, gains, cfg)
    n, m, p = plant.n, plant.m, gains.p
    ctrl, cslices, Cf, Df_x = _controller_blocks(
        plant, gains, cfg, A_n, B_n, P, with_reference_model=True
    )

    lay = _Layout()
    s_x = lay.add("x", n)
    s_xn = lay.add("x_n", n)
    order = ["xi1", "xi2", "u_fl", "d_hat"] if cfg.filtered else ["xi1", "d_hat"]
    for name in order:
        lay.add(name, cslices[name].stop - cslices[name].start)
    N = lay.size
    states = lay.slices

    # permutation from controller-local indices to closed-loop indices
    perm = np.empty(ctrl.state_dim, dtype=int)
    for name, sl in cslices.items():
        perm[sl] = np.arange(states[name].start, states[name].stop)

    def lift(rows: np.ndarray) -> np.ndarray:
        out = np.zeros((rows.shape[0], N))
        out[:, perm] = rows
        return out

    ins = _Layout()
    s_r = ins.add("r", p)
    s_d = ins.add("d", m)
    nw = ins.size

    Bx_c = ctrl.B[:, :n]
    Br_c = ctrl.B[:, n:]
    Dux = ctrl.D[:, :n]
    Dur = ctrl.D[:, n:]

    A = np.zeros((N, N))
    Bw = np.zeros((N, nw))

    # controller states
    A[perm[:, None], perm[None, :]] = ctrl.A
    A[perm, s_x] = Bx_c
    Bw[perm, s_r] = Br_c

    # plant: x' = A x + B (u + d), u = C_c z + Dux x + Dur r
    u_state = lift(ctrl.C)
    u_state[:, s_x] += Dux
    u_in = np.zeros((m, nw))
    u_in[:, s_r] = Dur
    A[s_x] = plant.B @ u_state
    A[s_x, s_x] += plant.A
    Bw[s_x] = plant.B @ u_in
    Bw[s_x, s_d] += plant.B

    # taps
    taps = _Layout()
    rows_C: list[np.ndarray] = []
    rows_D: list[np.ndarray] = []

    def tap(name: str, Cz: np.ndarray, Dw: np.ndarray | None = None):
        taps.add(name, Cz.shape[0])
        rows_C.append(Cz)
        rows_D.append(np.zeros((Cz.shape[0], nw)) if Dw is None else Dw)

    def sel(sl: slice) -> np.ndarray:
        return np.eye(N)[sl]

    tap("x", sel(s_x))
    tap("x_n", sel(s_xn))
    tap("e", sel(s_x) - sel(s_xn))
    un_C = np.zeros((m, N))
    un_C[:, s_x] = -gains.K1
    un_D = np.zeros((m, nw))
    un_D[:, s_r] = gains.K2
    tap("u_n", un_C, un_D)
    uf_C = lift(Cf)
    uf_C[:, s_x] += Df_x
    tap("u_f", uf_C)
    tap("u_a", -sel(states["d_hat"]))
    tap("u", u_state, u_in)
    if cfg.filtered:
        tap("u_fl", sel(states["u_fl"]))
    else:
        tap("u_fl", np.zeros((m, N)))
    tap("d_hat", sel(states["d_hat"]))

    system = LtiSystem(A, Bw, np.vstack(rows_C), np.vstack(rows_D))
    return ClosedLoopModel(
        system=system,
        states=dict(states),
        taps=dict(taps.slices),
        inputs=dict(ins.slices),
        x0=plant.x0.copy(),
        variant=cfg.variant,
        P=P,
        cfg=cfg,
    )


def open_loop_at_plant_input(plant: PlantModel, gains: NominalGains, cfg: SymbioticConfig) -> LtiSystem:
    """Return ratio L(s) with the loop broken at the plant input and r = 0.

    Sign convention: L = -(controller o plant), so a static nominal
    controller gives ``L(s) = K1 (sI - A)^-1 B``. The reference-model state
    is left out, since it cannot be reached from the break point when r = 0.
    """
    if plant.m != 1:
        raise ModelError("margin analysis requires single-input loop")
    A_n, B_n, P = _check(plant, gains, cfg)
    ctrl, _, _, _ = _controller_blocks(plant, gains, cfg, A_n, B_n, P, with_reference_model=False)
    n = plant.n
    ctrl_x = LtiSystem(ctrl.A, ctrl.B[:, :n], ctrl.C, ctrl.D[:, :n])
    plant_sys = LtiSystem(plant.A, plant.B, np.eye(n), np.zeros((n, plant.m)))
    return -plant_sys.then(ctrl_x)
