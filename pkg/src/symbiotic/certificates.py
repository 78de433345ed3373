"""Lyapunov certificates for the filtered symbiotic loop.

The composite function checked along trajectories is

    V = beta1 e'Pe + beta2 u_f'u_f + beta3 d~'d~ + beta4 u_fl'u_fl,   d~ = d_hat - d

With positive leakage (mu1 > 0) and a bounded, slowly varying
disturbance, V stays under ``V0 exp(-b t) + l/b``. With zero leakage and
a constant disturbance, V is nonincreasing and e, u_f go to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import is_positive_definite, sym_eigs
from .model import SymbioticConfig
from .simulate import Trajectory

BOUND_SLACK = 1e-8

THEOREM1 = "bounded (exponential envelope)"
THEOREM2 = "convergent (V nonincreasing)"
NO_CERTIFICATE = "none"


class InfeasibleCertificate(ValueError):
    pass


@dataclass(frozen=True)
class CertificateMatrices:
    M1: np.ndarray
    M2: np.ndarray
    M3: np.ndarray
    M4: np.ndarray

    @property
    def pd_flags(self) -> dict[str, bool]:
        return {name: is_positive_definite(getattr(self, name)) for name in ("M1", "M2", "M3", "M4")}


@dataclass(frozen=True)
class CertificateParams:
    beta4: float
    d1: float
    d2: float
    dbar: float
    ddotbar: float

    @classmethod
    def from_config(
        cls,
        cfg: SymbioticConfig,
        dbar: float,
        ddotbar: float,
        d1: float | None = None,
        d2: float | None = None,
        beta4: float | None = None,
    ) -> CertificateParams:
        """Defaults: ``d1 = min(1, mu1)``, ``d2 = mu1 / 2`` and beta4 from its definition."""
        if d1 is None:
            d1 = min(1.0, cfg.mu1)
        if d2 is None:
            d2 = 0.5 * cfg.mu1
        return cls(
            beta4=cfg.beta4 if beta4 is None else beta4,
            d1=d1,
            d2=d2,
            dbar=dbar,
            ddotbar=ddotbar,
        )


@dataclass(frozen=True)
class CertificateConstants:
    l1: float
    l2: float
    l3: float
    bstar: float
    lstar: float

    @property
    def ultimate_bound(self) -> float:
        return self.lstar / self.bstar

    def envelope(self, t: np.ndarray, V0: float) -> np.ndarray:
        return V0 * np.exp(-self.bstar * np.asarray(t)) + self.ultimate_bound


def build_certificate_matrices(
    cfg: SymbioticConfig, P, B, beta4: float | None = None
) -> CertificateMatrices:
    P = np.asarray(P, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n, m = B.shape
    if P.shape != (n, n):
        raise ValueError(f"P must be {n}x{n}, got {P.shape}")
    b4 = cfg.beta4 if beta4 is None else beta4
    a, b1, b2 = cfg.alpha, cfg.beta1, cfg.beta2
    R = cfg.weight(n)
    I = np.eye(m)

    M1 = np.block([[b1 * P, np.zeros((n, m))], [np.zeros((m, n)), b2 * I]])
    M2 = np.kron(
        np.array(
            [
                [2 * a * b2 * cfg.eps1_eff, -2 * b4 * cfg.eps2],
                [-2 * b4 * cfg.eps2, 2 * b4 * cfg.eps2 + 2 * b4 * cfg.mu2],
            ]
        ),
        I,
    )
    lam_M2 = sym_eigs(M2)[0]
    PB = P @ B
    M3 = np.block([[b1 * R, -b1 * PB], [-b1 * PB.T, (2 * b2 * a + lam_M2) * I]])
    M4 = np.block([[b1 * R, -b1 * PB], [-b1 * PB.T, 2 * b2 * a * I]])
    return CertificateMatrices(M1, M2, M3, M4)


def certificate_constants(
    params: CertificateParams, cfg: SymbioticConfig, mats: CertificateMatrices
) -> CertificateConstants:
    mu1, b3 = cfg.mu1, cfg.beta3
    if not (params.d1 > 0 and params.d2 > 0):
        raise InfeasibleCertificate("Young constants infeasible for given mu1")
    l2 = 2 * mu1 - mu1 * params.d1 - params.d2
    if not l2 > 0:
        raise InfeasibleCertificate("Young constants infeasible for given mu1")
    if not params.beta4 > 0:
        raise InfeasibleCertificate("beta4 must be positive")
    for name in ("M1", "M2", "M3"):
        if not is_positive_definite(getattr(mats, name)):
            raise InfeasibleCertificate(f"{name} is not positive definite")
    l1 = sym_eigs(mats.M3)[0] / sym_eigs(mats.M1)[-1]
    l3 = sym_eigs(mats.M2)[0] / params.beta4
    lstar = b3 * mu1 * params.dbar**2 / params.d1 + b3 * params.ddotbar**2 / params.d2
    l1, l3 = float(l1), float(l3)
    return CertificateConstants(l1=l1, l2=float(l2), l3=l3, bstar=min(l1, l2, l3), lstar=float(lstar))


def tune_young_constants(
    cfg: SymbioticConfig, mats: CertificateMatrices, dbar: float, ddotbar: float, steps: int = 40
) -> CertificateParams:
    """Grid-search (d1, d2) in (0, 2 mu1)^2 for the smallest ultimate bound l*/b*."""
    if not cfg.mu1 > 0:
        raise InfeasibleCertificate("Young constants infeasible for given mu1")
    grid = np.linspace(0.0, 2.0 * cfg.mu1, steps + 2)[1:-1]
    best, best_val = None, math.inf
    for d1 in grid:
        for d2 in grid:
            params = CertificateParams(cfg.beta4, float(d1), float(d2), dbar, ddotbar)
            try:
                c = certificate_constants(params, cfg, mats)
            except InfeasibleCertificate:
                continue
            if c.ultimate_bound < best_val:
                best, best_val = params, c.ultimate_bound
    if best is None:
        raise InfeasibleCertificate("no feasible Young constants on the search grid")
    return best


def evaluate_V(traj: Trajectory, cfg: SymbioticConfig, P, beta4: float | None = None) -> np.ndarray:
    """Lyapunov function along a trajectory, using its ground-truth disturbance."""
    b4 = cfg.beta4 if beta4 is None else beta4
    P = np.asarray(P, dtype=float)
    d_tilde = traj.d_hat - traj.d
    return (
        cfg.beta1 * np.einsum("ti,ij,tj->t", traj.e, P, traj.e)
        + cfg.beta2 * np.sum(traj.u_f**2, axis=1)
        + cfg.beta3 * np.sum(d_tilde**2, axis=1)
        + b4 * np.sum(traj.u_fl**2, axis=1)
    )


def check_envelope_bound(
    t: np.ndarray, V: np.ndarray, constants: CertificateConstants
) -> tuple[bool, float]:
    """Whether ``V <= V0 exp(-b t) + l/b`` (+1e-8) everywhere; also the worst excess."""
    env = constants.envelope(t, float(V[0]))
    excess = float(np.max(V - env))
    return excess <= BOUND_SLACK, excess


def v_dot_model(traj: Trajectory, cfg: SymbioticConfig, mats: CertificateMatrices) -> np.ndarray:
    """Exact V' with zero leakage and constant disturbance.

    ``-delta' M4 delta - 2 alpha beta2 eps1 |u_fl - u_f|^2`` with ``delta = [e; u_f]``.
    """
    delta = np.hstack([traj.e, traj.u_f])
    gap = traj.u_fl - traj.u_f
    return -np.einsum("ti,ij,tj->t", delta, mats.M4, delta) - 2 * cfg.alpha * cfg.beta2 * cfg.eps1_eff * np.sum(
        gap**2, axis=1
    )


def v_dot_central(t: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Central differences of V at interior samples."""
    return (V[2:] - V[:-2]) / (t[2:] - t[:-2])


def is_nonincreasing(V: np.ndarray, rel_slack: float = 1e-8) -> tuple[bool, float]:
    rise = float(np.max(np.diff(V), initial=0.0))
    return rise <= rel_slack * float(np.max(V)), rise


@dataclass
class CertificateReport:
    regime: str
    matrices: CertificateMatrices
    constants: CertificateConstants | None
    t: np.ndarray
    V: np.ndarray
    envelope: np.ndarray
    holds: bool
    max_violation: float
    notes: list[str] = field(default_factory=list)

    def to_csv(self, path: str | Path | None = None) -> str:
        lines = ["t,V,envelope"]
        for row in zip(self.t, self.V, self.envelope):
            lines.append(",".join(repr(float(v)) for v in row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def summary(self) -> str:
        items: list[tuple[str, object]] = [("regime", self.regime)]
        items += [(f"{k}_pd", v) for k, v in self.matrices.pd_flags.items()]
        if self.constants is not None:
            c = self.constants
            items += [("l1", c.l1), ("l2", c.l2), ("l3", c.l3), ("bstar", c.bstar), ("lstar", c.lstar)]
        items += [("holds", self.holds), ("max_violation", self.max_violation)]
        items += [("note", n) for n in self.notes]
        return "\n".join(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in items) + "\n"


def classify_regime(
    cfg: SymbioticConfig,
    mats: CertificateMatrices,
    dbar: float,
    ddotbar: float,
    d1: float | None = None,
    d2: float | None = None,
) -> tuple[str, CertificateConstants | None, list[str]]:
    """Pick the certificate that applies to this configuration."""
    notes: list[str] = []
    try:
        params = CertificateParams.from_config(cfg, dbar, ddotbar, d1=d1, d2=d2)
        return THEOREM1, certificate_constants(params, cfg, mats), notes
    except InfeasibleCertificate as exc:
        notes.append(f"Theorem 1 constants infeasible: {exc}")
    if cfg.mu1 == 0 and cfg.mu2 == 0 and ddotbar == 0 and is_positive_definite(mats.M4):
        notes.append("Theorem 2 regime active")
        return THEOREM2, None, notes
    return NO_CERTIFICATE, None, notes


def certificate_report(
    traj: Trajectory,
    cfg: SymbioticConfig,
    P,
    B,
    dbar: float,
    ddotbar: float,
    d1: float | None = None,
    d2: float | None = None,
) -> CertificateReport:
    mats = build_certificate_matrices(cfg, P, B)
    regime, constants, notes = classify_regime(cfg, mats, dbar, ddotbar, d1, d2)
    V = evaluate_V(traj, cfg, P)
    if regime == THEOREM1:
        holds, viol = check_envelope_bound(traj.t, V, constants)
        env = constants.envelope(traj.t, float(V[0]))
    elif regime == THEOREM2:
        holds, viol = is_nonincreasing(V)
        env = np.full_like(V, V[0])
    else:
        holds, viol = False, math.nan
        env = np.full_like(V, math.inf)
    return CertificateReport(regime, mats, constants, traj.t, V, env, holds, viol, notes)
