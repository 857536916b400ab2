"""Independent oracles used by the tests.

These deliberately avoid the package's own algorithms: the transport
distance is computed by linear programming, and the discounted value by
direct transcription (adjoint-gradient minimization over the full drift
path with dense linear algebra).  Only model constants and grid
conventions are shared with the package.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog, minimize


def w1_lp(a: np.ndarray, b: np.ndarray) -> float:
    """Circular 1-Wasserstein distance via the transport LP.

    Ground cost between cell centers i, j is the circle distance
    min(|i - j|, n - |i - j|) / n.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = a.shape[0]
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    cost = np.minimum(d, n - d) / n
    a_eq = np.zeros((2 * n - 1, n * n))
    b_eq = np.zeros(2 * n - 1)
    for i in range(n):
        a_eq[i, i * n:(i + 1) * n] = 1.0
        b_eq[i] = a[i]
    for j in range(n - 1):  # last column constraint is redundant
        a_eq[n + j, j::n] = 1.0
        b_eq[n + j] = b[j]
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def fp_spectral_error(n: int, dt: float, horizon: float, nu: float = 0.05,
                      drift: float = 0.8, mode: int = 1,
                      semi_discrete: bool = False) -> float:
    """Fourier-mode error of the transport scheme under constant drift.

    The equation d_t m = nu m'' + (drift m)' acts on the mode exp(i w x) by
    the factor exp((-nu w^2 + i drift w) T).  With ``semi_discrete`` the
    exact spatial symbol is replaced by the centered-difference one, which
    isolates the time-stepping error.
    """
    from mfglab.kernels import fp_sweep

    h = 1.0 / n
    x = (np.arange(n) + 0.5) * h
    dens = 1.0 + 0.5 * np.cos(2 * np.pi * x)
    m0 = dens / dens.sum()
    steps = int(round(horizon / dt))
    out = fp_sweep(m0, np.full((steps, n), drift), nu, dt, h)
    w = 2 * np.pi * mode
    basis = np.exp(-1j * w * x)
    if semi_discrete:
        lam = (-nu * (2 - 2 * np.cos(w * h)) / h**2
               + 1j * drift * np.sin(w * h) / h)
    else:
        lam = -nu * w**2 + 1j * drift * w
    return float(abs(basis @ out[-1] - (basis @ m0) * np.exp(lam * horizon)))


class DirectTranscription:
    """Discounted value by direct minimization over the drift path.

    The transport step is rebuilt here with dense linear algebra (batched
    matrix inverses), the coupling with its own Fourier sums, and the
    gradient by the discrete adjoint.  The discrete objective is

        J(alpha) = sum_k w_k [sum_j (alpha_kj^2 / (2 a_j) + V_j) m_kj + F(m_k)]

    with w_k = exp(-delta t_k) / (delta sum_l exp(-delta t_l)) and
    m_{k+1} = M(alpha_k)^{-1} m_k.
    """

    def __init__(self, model, n_cells: int, m0: np.ndarray, delta: float,
                 dt: float, n_steps: int):
        self.n = n_cells
        self.h = 1.0 / n_cells
        self.x = (np.arange(n_cells) + 0.5) * self.h
        self.m0 = np.asarray(m0, dtype=np.float64)
        self.delta = delta
        self.dt = dt
        self.n_steps = n_steps
        self.nu = model.nu
        self.a = model.a_of_x(self.x)
        self.v = model.potential(self.x)
        self.f = model.f_coupling(self.x)
        self.theta = model.theta
        self.const = model.coupling_constant
        self.kernel_terms = list(model.kernel.terms)
        q = np.exp(-delta * dt * np.arange(n_steps))
        self.w = q / (delta * q.sum())

    # -- coupling, vectorized over rows of m ---------------------------------

    def _coupling_many(self, m: np.ndarray) -> np.ndarray:
        val = m @ self.f + self.const
        for k, c, s in self.kernel_terms:
            wx = 2 * np.pi * k * self.x
            ck = m @ np.cos(wx)
            sk = m @ np.sin(wx)
            ak = c * ck - s * sk
            bk = c * sk + s * ck
            if k == 0:
                val = val + 0.5 * self.theta * ak**2
            else:
                val = val + 0.25 * self.theta * (ak**2 + bk**2)
        return val

    def _coupling_grad_many(self, m: np.ndarray) -> np.ndarray:
        g = np.broadcast_to(self.f, m.shape).copy()
        for k, c, s in self.kernel_terms:
            # d/dm_j of the quadratic term is theta (rho * rho * m)(x_j)
            if k == 0:
                cc, ss = c * c, 0.0
            else:
                cc, ss = 0.5 * (c * c - s * s), c * s
            wx = 2 * np.pi * k * self.x
            ck = m @ np.cos(wx)
            sk = m @ np.sin(wx)
            g += self.theta * ((cc * ck - ss * sk)[:, None] * np.cos(wx)
                               + (cc * sk + ss * ck)[:, None] * np.sin(wx))
        return g

    # -- transport steps, batched over time -----------------------------------

    def _matrices(self, alpha: np.ndarray) -> np.ndarray:
        n, h, dt, nu = self.n, self.h, self.dt, self.nu
        a_face = 0.5 * (alpha + np.roll(alpha, -1, axis=1))
        a_prev = np.roll(a_face, 1, axis=1)
        mats = np.zeros((alpha.shape[0], n, n))
        j = np.arange(n)
        mats[:, j, (j - 1) % n] = -dt * (nu / h**2 - a_prev / (2 * h))
        mats[:, j, (j + 1) % n] = -dt * (nu / h**2 + a_face / (2 * h))
        mats[:, j, j] += (1.0 + 2 * nu * dt / h**2
                          - dt * (a_face - a_prev) / (2 * h))
        return mats

    def simulate(self, alpha: np.ndarray) -> np.ndarray:
        invs = np.linalg.inv(self._matrices(alpha))
        m = np.empty((self.n_steps + 1, self.n))
        m[0] = self.m0
        for k in range(self.n_steps):
            m[k + 1] = invs[k] @ m[k]
        return m

    def objective(self, alpha: np.ndarray) -> float:
        m = self.simulate(alpha)
        run = np.einsum("kn,kn->k", alpha**2 / (2 * self.a) + self.v, m[:-1])
        return float(self.w @ (run + self._coupling_many(m[:-1])))

    def objective_and_grad(self, flat: np.ndarray) -> tuple[float, np.ndarray]:
        alpha = flat.reshape(self.n_steps, self.n)
        invs = np.linalg.inv(self._matrices(alpha))
        m = np.empty((self.n_steps + 1, self.n))
        m[0] = self.m0
        for k in range(self.n_steps):
            m[k + 1] = invs[k] @ m[k]
        run = np.einsum("kn,kn->k", alpha**2 / (2 * self.a) + self.v, m[:-1])
        value = float(self.w @ (run + self._coupling_many(m[:-1])))

        # adjoint p_k = dJ/dm_k with p_{k} = w_k g_k + M_k^{-T} p_{k+1};
        # collect y_k = M_k^{-T} p_{k+1} for the batched alpha-derivative
        g = ((alpha**2 / (2 * self.a) + self.v)
             + self._coupling_grad_many(m[:-1])) * self.w[:, None]
        inv_t = np.ascontiguousarray(invs.transpose(0, 2, 1))
        y = np.empty((self.n_steps, self.n))
        p = np.zeros(self.n)
        for k in range(self.n_steps - 1, -1, -1):
            y[k] = inv_t[k] @ p
            p = g[k] + y[k]

        grad = self.w[:, None] * (alpha / self.a) * m[:-1]
        # d/d a_face[i] of y . (M m_next) = dt/(2h) (m_i + m_{i+1})(y_{i+1} - y_i)
        # and alpha_j feeds faces j and j-1 with weight 1/2 each
        c = self.dt / (2 * self.h)
        m_next = m[1:]
        d_face = c * (m_next + np.roll(m_next, -1, axis=1)) \
            * (np.roll(y, -1, axis=1) - y)
        grad -= 0.5 * (d_face + np.roll(d_face, 1, axis=1))
        return value, grad.ravel()

    def minimize(self, x0: np.ndarray | None = None, maxiter: int = 400,
                 gtol: float = 1e-9):
        if x0 is None:
            x0 = np.zeros(self.n_steps * self.n)
        res = minimize(self.objective_and_grad, x0, jac=True,
                       method="L-BFGS-B",
                       options={"maxiter": maxiter, "gtol": gtol,
                                "ftol": 1e-14, "maxcor": 20})
        return float(res.fun), res.x.reshape(self.n_steps, self.n), res
