# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled time-stepping kernels: periodic tridiagonal solves, the
forward advection-diffusion sweep and the backward discounted HJB sweep.

Must stay semantically identical to ``_fallback``; only the inner loops
differ (plain C loops instead of vectorized NumPy).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef void _thomas(const double* sub, const double* diag, const double* sup,
                  const double* rhs, double* x, double* cp, double* dp,
                  Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double den
    cp[0] = sup[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - sub[i] * cp[i - 1]
        cp[i] = sup[i] / den
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / den
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]


cdef void _cyclic(const double* sub, const double* diag, const double* sup,
                  const double* rhs, double* x, double* work,
                  Py_ssize_t n) noexcept nogil:
    # Sherman-Morrison correction of the wrap-around corners
    # A[0, n-1] = sub[0], A[n-1, 0] = sup[n-1].
    # work must hold 6 n doubles: d2, u, z, y, cp, dp.
    cdef double* d2 = work
    cdef double* u = work + n
    cdef double* z = work + 2 * n
    cdef double* y = work + 3 * n
    cdef double* cp = work + 4 * n
    cdef double* dp = work + 5 * n
    cdef Py_ssize_t i
    cdef double beta = sub[0]
    cdef double alpha = sup[n - 1]
    cdef double gamma = -diag[0]
    cdef double fact
    for i in range(n):
        d2[i] = diag[i]
        u[i] = 0.0
    d2[0] = diag[0] - gamma
    d2[n - 1] = diag[n - 1] - alpha * beta / gamma
    u[0] = gamma
    u[n - 1] = alpha
    _thomas(sub, d2, sup, rhs, y, cp, dp, n)
    _thomas(sub, d2, sup, u, z, cp, dp, n)
    fact = (y[0] + beta * y[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma)
    for i in range(n):
        x[i] = y[i] - fact * z[i]


def cyclic_tridiag_solve(sub, diag, sup, rhs):
    """Solve the periodic tridiagonal system; see the fallback docstring."""
    cdef const double[::1] a = np.ascontiguousarray(sub, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[::1] c = np.ascontiguousarray(sup, dtype=np.float64)
    cdef const double[::1] d = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n = b.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] x = out
    work_arr = np.empty(6 * n, dtype=np.float64)
    cdef double[::1] work = work_arr
    _cyclic(&a[0], &b[0], &c[0], &d[0], &x[0], &work[0], n)
    return out


def fp_sweep(m0, alpha, double nu, double dt, double h):
    """Forward sweep of d_t m = nu m'' + (m alpha)'; see the fallback."""
    cdef const double[::1] m_init = np.ascontiguousarray(m0, dtype=np.float64)
    cdef const double[:, ::1] al = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef Py_ssize_t n_steps = al.shape[0]
    cdef Py_ssize_t n = al.shape[1]
    out_arr = np.empty((n_steps + 1, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    scratch = np.empty(10 * n, dtype=np.float64)
    cdef double[::1] w = scratch
    cdef double* sub = &w[6 * n]
    cdef double* diag = &w[7 * n]
    cdef double* sup = &w[8 * n]
    cdef double* a_face = &w[9 * n]
    cdef Py_ssize_t k, j, jm, jp
    cdef double sig = nu * dt / (h * h)
    cdef double half_dt_h = dt / (2.0 * h)
    cdef double a_prev, total, step_sum
    total = 0.0
    for j in range(n):
        out[0, j] = m_init[j]
        total += m_init[j]
    with nogil:
        for k in range(n_steps):
            for j in range(n):
                jp = j + 1 if j < n - 1 else 0
                a_face[j] = 0.5 * (al[k, j] + al[k, jp])
            for j in range(n):
                jm = j - 1 if j > 0 else n - 1
                a_prev = a_face[jm]
                sub[j] = -dt * nu / (h * h) + a_prev * half_dt_h
                sup[j] = -dt * nu / (h * h) - a_face[j] * half_dt_h
                diag[j] = 1.0 + 2.0 * sig - (a_face[j] - a_prev) * half_dt_h
            _cyclic(sub, diag, sup, &out[k, 0], &out[k + 1, 0], &w[0], n)
            # conservation is exact up to solver roundoff; rescale so the
            # drift cannot accumulate over very long horizons
            step_sum = 0.0
            for j in range(n):
                step_sum += out[k + 1, j]
            for j in range(n):
                out[k + 1, j] *= total / step_sum
    return out_arr


def hjb_sweep(u_terminal, f_path, v_pot, a_kin, double nu, double dt,
              double h, double delta):
    """Backward sweep of the discounted HJB equation; see the fallback."""
    cdef const double[::1] uT = np.ascontiguousarray(u_terminal, dtype=np.float64)
    cdef const double[:, ::1] f = np.ascontiguousarray(f_path, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(v_pot, dtype=np.float64)
    cdef const double[::1] a = np.ascontiguousarray(a_kin, dtype=np.float64)
    cdef Py_ssize_t n_steps = f.shape[0]
    cdef Py_ssize_t n = f.shape[1]
    out_arr = np.empty((n_steps + 1, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    scratch = np.empty(10 * n, dtype=np.float64)
    cdef double[::1] w = scratch
    cdef double* sub = &w[6 * n]
    cdef double* diag = &w[7 * n]
    cdef double* sup = &w[8 * n]
    cdef double* rhs = &w[9 * n]
    cdef Py_ssize_t k, j, jm, jp
    cdef double sig = nu * dt / (h * h)
    cdef double d_minus, d_plus, ham
    for j in range(n):
        out[n_steps, j] = uT[j]
        sub[j] = -sig
        sup[j] = -sig
        diag[j] = 1.0 + delta * dt + 2.0 * sig
    with nogil:
        for k in range(n_steps - 1, -1, -1):
            for j in range(n):
                jm = j - 1 if j > 0 else n - 1
                jp = j + 1 if j < n - 1 else 0
                d_minus = (out[k + 1, j] - out[k + 1, jm]) / h
                d_plus = (out[k + 1, jp] - out[k + 1, j]) / h
                if d_minus < 0.0:
                    d_minus = 0.0
                if d_plus > 0.0:
                    d_plus = 0.0
                ham = 0.5 * a[j] * (d_minus * d_minus + d_plus * d_plus) - v[j]
                rhs[j] = out[k + 1, j] + dt * (f[k, j] - ham)
            _cyclic(sub, diag, sup, rhs, &out[k, 0], &w[0], n)
    return out_arr
