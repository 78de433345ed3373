"""Small dense linear algebra used across the package.

Everything here works on plain numpy arrays and is sized for the
systems this package deals with (state dimensions in the tens at most).
"""

from __future__ import annotations

import numpy as np

SYMMETRY_RTOL = 1e-12
PIVOT_TOL = 1e-14


class LinalgError(ValueError):
    pass


class NotHurwitzError(LinalgError):
    pass


class NearPoleError(LinalgError):
    pass


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return `M` as a 2-D float array, rejecting non-finite entries."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise LinalgError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise LinalgError(f"{name} has non-finite entries")
    return M


def _require_square(M: np.ndarray, name: str) -> None:
    if M.shape[0] != M.shape[1]:
        raise LinalgError(f"{name} must be square, got shape {M.shape}")


def _require_symmetric(M: np.ndarray, name: str) -> None:
    _require_square(M, name)
    scale = max(np.max(np.abs(M)), np.finfo(float).tiny)
    if np.max(np.abs(M - M.T)) > SYMMETRY_RTOL * scale:
        raise LinalgError(f"{name} is not symmetric")


def solve_lyapunov(A_n, R) -> np.ndarray:
    """Solve ``A_n.T @ P + P @ A_n + R = 0`` for `P`.

    The equation is vectorized with Kronecker products and solved as a
    dense ``n**2`` system, which is perfectly adequate for small `n`.

    Parameters
    ----------
    A_n : (n, n) array_like
        Hurwitz system matrix.
    R : (n, n) array_like
        Symmetric weight.

    Returns
    -------
    P : (n, n) ndarray
        Symmetric solution.

    Raises
    ------
    NotHurwitzError
        If the Kronecker system is singular.
    """
    A_n = as_matrix(A_n, "A_n")
    R = as_matrix(R, "R")
    _require_square(A_n, "A_n")
    _require_symmetric(R, "R")
    n = A_n.shape[0]
    if R.shape != (n, n):
        raise LinalgError(f"R must be {n}x{n}, got {R.shape}")

    eye = np.eye(n)
    # column-major vec: vec(A^T P) = (I kron A^T) vec(P), vec(P A) = (A^T kron I) vec(P)
    K = np.kron(eye, A_n.T) + np.kron(A_n.T, eye)
    rhs = -R.reshape(-1, order="F")
    try:
        vecP = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise NotHurwitzError("not Hurwitz / solve failed") from exc
    if not np.all(np.isfinite(vecP)):
        raise NotHurwitzError("not Hurwitz / solve failed")
    # near-singular systems slip through LAPACK; a bad residual gives them away
    P = vecP.reshape(n, n, order="F")
    P = 0.5 * (P + P.T)
    resid = np.max(np.abs(A_n.T @ P + P @ A_n + R))
    if resid > 1e-6 * max(np.max(np.abs(R)), 1.0):
        raise NotHurwitzError("not Hurwitz / solve failed")
    return P


def sym_eigs(M) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending."""
    A = as_matrix(M, "M").copy()
    _require_symmetric(A, "M")
    n = A.shape[0]
    A = 0.5 * (A + A.T)
    if n == 1:
        return A.diagonal().copy()

    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n)
    for _sweep in range(100):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= 1e-16 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/cols p and q
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
    else:
        raise LinalgError("Jacobi iteration did not converge")
    return np.sort(A.diagonal())


def is_positive_definite(M) -> bool:
    """Strict definiteness test, ``min(eig) > 0`` with no slack."""
    return bool(sym_eigs(M)[0] > 0.0)


def hurwitz_check(A) -> bool:
    """True when ``A.T P + P A + I = 0`` has a symmetric positive-definite solution."""
    A = as_matrix(A, "A")
    _require_square(A, "A")
    try:
        P = solve_lyapunov(A, np.eye(A.shape[0]))
    except NotHurwitzError:
        return False
    return is_positive_definite(P)


def complex_solve_masked(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian elimination with partial pivoting, batched over leading axes.

    Returns the solution and a boolean mask marking systems whose pivots
    all cleared the tolerance. Failed systems hold NaN.
    """
    A = np.array(A, dtype=complex)
    b = np.array(b, dtype=complex)
    q = A.shape[-1]
    batch = A.shape[:-2]
    A = A.reshape(-1, q, q)
    nb = A.shape[0]
    rhs = b.reshape(nb, q, -1)
    idx = np.arange(nb)
    ok = np.ones(nb, dtype=bool)

    for k in range(q):
        piv = k + np.argmax(np.abs(A[:, k:, k]), axis=1)
        for M in (A, rhs):
            row_k = M[idx, k].copy()
            M[idx, k] = M[idx, piv]
            M[idx, piv] = row_k
        pivot = A[:, k, k]
        ok &= np.abs(pivot) >= PIVOT_TOL
        safe = np.where(ok, pivot, 1.0)
        factors = A[:, k + 1 :, k] / safe[:, None]
        A[:, k + 1 :, :] -= factors[:, :, None] * A[:, None, k, :]
        rhs[:, k + 1 :, :] -= factors[:, :, None] * rhs[:, None, k, :]

    x = np.zeros_like(rhs)
    for k in range(q - 1, -1, -1):
        acc = rhs[:, k, :] - np.einsum("bj,bjr->br", A[:, k, k + 1 :], x[:, k + 1 :, :])
        diag = np.where(ok, A[:, k, k], 1.0)
        x[:, k, :] = acc / diag[:, None]
    x[~ok] = np.nan
    return x.reshape(b.shape), ok.reshape(batch)


def complex_solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` for complex square `A` by partially pivoted elimination.

    `A` may carry leading batch axes; `b` then has matching leading axes
    followed by ``(q,)`` or ``(q, k)``.

    Raises
    ------
    NearPoleError
        If a pivot falls below ``1e-14`` in magnitude.
    """
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise LinalgError(f"A must be square, got shape {A.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise LinalgError("non-finite entries in complex system")
    x, ok = complex_solve_masked(A, b)
    if not np.all(ok):
        raise NearPoleError("frequency at/near system pole")
    return x


def pseudo_left_inverse(B) -> np.ndarray:
    """``(B.T B)^-1 B.T`` for a full-column-rank `B`."""
    B = as_matrix(B, "B")
    n, m = B.shape
    if m > n or np.linalg.matrix_rank(B) < m:
        raise LinalgError("control matrix not full column rank")
    return np.linalg.solve(B.T @ B, B.T)
