"""Independent reference constructions used only by the tests."""

import numpy as np
from scipy.interpolate import pade
from scipy.linalg import matrix_balance, null_space
from scipy.signal import tf2ss

from symbiotic.linalg import hurwitz_check, solve_lyapunov
from symbiotic.model import LtiSystem, NominalGains, PlantModel, SymbioticConfig


def analysis_form_loop(plant: PlantModel, gains: NominalGains, cfg: SymbioticConfig) -> LtiSystem:
    """Closed loop with the fixed-gain law in its derivative form.

    State ``[x, x_n, u_f, u_fl, d_hat]``, inputs ``[r, d]``, output ``u_f``.
    This form needs the true disturbance, so it only serves as an oracle.
    """
    A, B = plant.A, plant.B
    n, m, p = plant.n, plant.m, gains.p
    A_n = A - B @ gains.K1
    B_n = B @ gains.K2
    P = solve_lyapunov(A_n, cfg.weight(n))
    a, e1, e2 = cfg.alpha, cfg.eps1_eff, cfg.eps2
    I = np.eye(m)
    ix, ixn, iuf, iufl, idh = (
        slice(0, n),
        slice(n, 2 * n),
        slice(2 * n, 2 * n + m),
        slice(2 * n + m, 2 * n + 2 * m),
        slice(2 * n + 2 * m, 2 * n + 3 * m),
    )
    N = 2 * n + 3 * m
    F = np.zeros((N, N))
    G = np.zeros((N, p + m))
    r, d = slice(0, p), slice(p, p + m)

    F[ix, ix] = A_n
    F[ix, iuf] = B
    F[ix, idh] = -B
    G[ix, r] = B_n
    G[ix, d] = B
    F[ixn, ixn] = A_n
    G[ixn, r] = B_n
    # u_f' = -a (u_f - (d_hat - d)) - a e1 (u_f - u_fl)
    F[iuf, iuf] = -(a + a * e1) * I
    F[iuf, idh] = a * I
    F[iuf, iufl] = a * e1 * I
    G[iuf, d] = -a * I
    F[iufl, iufl] = -(e2 + cfg.mu2) * I
    F[iufl, iuf] = e2 * I
    g = (cfg.beta1 / cfg.beta3) * B.T @ P
    F[idh, ix] = g
    F[idh, ixn] = -g
    F[idh, iuf] = -(a * cfg.beta2 / cfg.beta3) * I
    F[idh, idh] = -cfg.mu1 * I

    C = np.zeros((m, N))
    C[:, iuf] = I
    return LtiSystem(F, G, C, np.zeros((m, p + m)))


def pade_delay(T: float, order: int = 5) -> LtiSystem:
    """(order, order) Pade approximant of exp(-s T) as a state-space system."""
    taylor = [(-1.0) ** k / np.prod(np.arange(1, k + 1)) for k in range(2 * order + 1)]
    num, den = pade(taylor, order)
    scale = T ** np.arange(order, -1, -1)
    A, B, C, D = tf2ss(num.coeffs * scale, den.coeffs * scale)
    return LtiSystem(A, B, C, D)


def unity_feedback_A(L: LtiSystem) -> np.ndarray:
    """State matrix of the loop closed with u = -y (strictly proper L)."""
    assert np.allclose(L.D, 0.0)
    return L.A - L.B @ L.C


def delayed_loop_stable(L: LtiSystem, T: float, order: int = 5) -> bool:
    """Lyapunov Hurwitz test of the unity-feedback loop ``pade(T) * L``.

    The integral-state realization carries hidden modes at exactly zero
    (directions with ``A v = 0`` and ``C v = 0``). They are invariant under
    output feedback, so they are quotiented out before the test. The quotient
    is balanced because the Pade companion form is badly scaled.
    """
    hidden = null_space(np.vstack([L.A, L.C]))
    Ld = L.then(pade_delay(T, order))
    V = np.vstack([hidden, np.zeros((Ld.state_dim - L.state_dim, hidden.shape[1]))])
    U = null_space(V.T)
    Q, _ = matrix_balance(U.T @ unity_feedback_A(Ld) @ U)
    return hurwitz_check(Q)
