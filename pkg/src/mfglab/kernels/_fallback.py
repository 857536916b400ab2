"""Pure NumPy/SciPy reference implementation of the hot kernels.

Semantics must match ``_core`` (the Cython extension) to rounding error;
the compiled/fallback equivalence is covered by tests and the benchmark.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


def _tridiag_solve(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray,
                   rhs: np.ndarray) -> np.ndarray:
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1, :] = diag
    ab[2, :-1] = sub[1:]
    # check_finite off: overflow must propagate as NaN like the compiled
    # backend so the callers' stability guards see it, not a ValueError
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def cyclic_tridiag_solve(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray,
                         rhs: np.ndarray) -> np.ndarray:
    """Solve the periodic tridiagonal system A x = rhs.

    ``sub[j]`` multiplies x[j-1] and ``sup[j]`` multiplies x[j+1], indices
    modulo n, so the wrap-around corners are A[0, n-1] = sub[0] and
    A[n-1, 0] = sup[n-1].  Thomas elimination plus a Sherman-Morrison
    rank-one correction.
    """
    sub = np.asarray(sub, dtype=np.float64)
    diag = np.asarray(diag, dtype=np.float64)
    sup = np.asarray(sup, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    n = diag.shape[0]
    beta = sub[0]      # top-right corner
    alpha = sup[n - 1]  # bottom-left corner
    gamma = -diag[0]
    d2 = diag.copy()
    d2[0] = diag[0] - gamma
    d2[n - 1] = diag[n - 1] - alpha * beta / gamma
    y = _tridiag_solve(sub, d2, sup, rhs)
    u = np.zeros(n)
    u[0] = gamma
    u[n - 1] = alpha
    z = _tridiag_solve(sub, d2, sup, u)
    fact = (y[0] + beta * y[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma)
    return y - fact * z


def fp_sweep(m0: np.ndarray, alpha: np.ndarray, nu: float, dt: float,
             h: float) -> np.ndarray:
    """Forward sweep of d_t m = nu m'' + (m alpha)'.

    Backward-Euler step with a conservative centered advection flux,
    ``alpha`` has shape (n_steps, n); returns the mass path (n_steps+1, n).
    Mass is conserved exactly (matrix columns sum to one) and positivity
    holds whenever the mesh Peclet number max|alpha| h / (2 nu) <= 1.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    n_steps, n = alpha.shape
    out = np.empty((n_steps + 1, n))
    out[0] = m0
    total = float(np.asarray(m0).sum())
    sig = nu * dt / h**2
    for k in range(n_steps):
        a_face = 0.5 * (alpha[k] + np.roll(alpha[k], -1))  # face j+1/2
        a_prev = np.roll(a_face, 1)                        # face j-1/2
        sub = -dt * (nu / h**2 - a_prev / (2 * h))
        sup = -dt * (nu / h**2 + a_face / (2 * h))
        diag = 1.0 + 2 * sig - dt * (a_face - a_prev) / (2 * h)
        step = cyclic_tridiag_solve(sub, diag, sup, out[k])
        # conservation is exact up to solver roundoff; rescale so the
        # drift cannot accumulate over very long horizons
        out[k + 1] = step * (total / step.sum())
    return out


def hjb_sweep(u_terminal: np.ndarray, f_path: np.ndarray, v_pot: np.ndarray,
              a_kin: np.ndarray, nu: float, dt: float, h: float,
              delta: float) -> np.ndarray:
    """Backward sweep of -d_t u - nu u'' + delta u + H(x, u') = F(t, x).

    H(x, p) = a(x) p^2 / 2 - V(x) discretized by the Godunov upwind flux,
    explicit in time; diffusion and discount are implicit.  ``f_path`` has
    shape (n_steps, n) with row k the source at time slice k; returns the
    value path (n_steps+1, n) with the last row equal to ``u_terminal``.
    """
    f_path = np.asarray(f_path, dtype=np.float64)
    n_steps, n = f_path.shape
    out = np.empty((n_steps + 1, n))
    out[n_steps] = u_terminal
    sig = nu * dt / h**2
    sub = np.full(n, -sig)
    sup = np.full(n, -sig)
    diag = np.full(n, 1.0 + delta * dt + 2 * sig)
    for k in range(n_steps - 1, -1, -1):
        u = out[k + 1]
        d_minus = (u - np.roll(u, 1)) / h
        d_plus = (np.roll(u, -1) - u) / h
        ham = 0.5 * a_kin * (np.maximum(d_minus, 0.0) ** 2
                             + np.minimum(d_plus, 0.0) ** 2) - v_pot
        rhs = u + dt * (f_path[k] - ham)
        out[k] = cyclic_tridiag_solve(sub, diag, sup, rhs)
    return out
