"""Grid-level PDE operations wrapping the time-stepping kernels.

Forward Fokker-Planck transport with a given drift and the backward
discounted HJB equation with a given measure flow.  Diffusion and discount
are implicit (periodic tridiagonal solves); the advection flux is implicit
as well, while the Hamiltonian is explicit Godunov upwind.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mfglab import kernels
from mfglab.errors import StepSizeError
from mfglab.measures import GridMeasure, TorusGrid
from mfglab.model import ModelSpec, flat_derivative_path


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t_k = k dt, k = 0 .. n_steps."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def horizon(self) -> float:
        return self.dt * self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


def check_advective_step(dt: float, h: float, max_alpha: float, nu: float) -> None:
    """Validate the step against the advection CFL bound and, for the
    implicit centered flux, the mesh Peclet condition that guarantees
    positivity (an M-matrix)."""
    if max_alpha > 0 and dt > h / (2 * max_alpha) * (1 + 1e-12):
        raise StepSizeError(
            f"dt={dt} violates the advection CFL bound h/(2 max|alpha|)="
            f"{h / (2 * max_alpha):.3e}"
        )
    if max_alpha * h > 2 * nu * (1 + 1e-12):
        raise StepSizeError(
            f"mesh Peclet number {max_alpha * h / (2 * nu):.3f} > 1: "
            "positivity of the transport step is not guaranteed"
        )


def fp_step(m: GridMeasure, alpha: np.ndarray, dt: float, nu: float = 1.0) -> GridMeasure:
    """One step of d_t m = nu Laplace m + div(m alpha)."""
    path = fp_path(m, np.asarray(alpha, dtype=np.float64)[None, :], dt, nu)
    return GridMeasure(m.grid, path[1], name=m.name)


def fp_path(m0: GridMeasure, alpha_path: np.ndarray, dt: float,
            nu: float = 1.0) -> np.ndarray:
    """Mass path (n_steps+1, n) of the transport equation under ``alpha_path``.

    ``alpha_path`` has shape (n_steps, n): drift at the left endpoint of
    each step.
    """
    alpha_path = np.ascontiguousarray(alpha_path, dtype=np.float64)
    if alpha_path.ndim != 2 or alpha_path.shape[1] != m0.grid.n_cells:
        raise ValueError(f"alpha_path has shape {alpha_path.shape}, expected "
                         f"(n_steps, {m0.grid.n_cells})")
    h = m0.grid.h
    check_advective_step(dt, h, float(np.abs(alpha_path).max()), nu)
    if np.any(m0.mass < 0):
        raise ValueError("negative input mass")
    return kernels.fp_sweep(m0.mass, alpha_path, nu, dt, h)


def central_gradient(u: np.ndarray, h: float) -> np.ndarray:
    """Periodic central difference along the last axis."""
    return (np.roll(u, -1, axis=-1) - np.roll(u, 1, axis=-1)) / (2 * h)


def second_difference(u: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(u, -1, axis=-1) - 2 * u + np.roll(u, 1, axis=-1)) / h**2


@dataclass(frozen=True)
class ValueField:
    """Per-cell values of u at one time slice, with discrete norms."""

    grid: TorusGrid
    values: np.ndarray

    @property
    def gradient(self) -> np.ndarray:
        return central_gradient(self.values, self.grid.h)

    def du_sup(self) -> float:
        return float(np.abs(self.gradient).max())

    def d2u_sup(self) -> float:
        return float(np.abs(second_difference(self.values, self.grid.h)).max())


def hjb_backward_solve(model: ModelSpec, grid: TorusGrid, m_path: np.ndarray,
                       delta: float, dt: float,
                       terminal_u: np.ndarray | None = None) -> np.ndarray:
    """Backward solve of -d_t u - nu Laplace u + delta u + H(x, Du) = F(x, m(t)).

    ``m_path`` holds the mass vectors at slices 0 .. n_steps; the source is
    the flat derivative of the coupling along the path.  Returns u at every
    slice, (n_steps+1, n).  Raises :class:`StepSizeError` if the explicit
    Godunov term breaks the monotonicity bound along the sweep.
    """
    m_path = np.asarray(m_path, dtype=np.float64)
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    n_steps = m_path.shape[0] - 1
    if n_steps < 1:
        raise ValueError("m_path must cover at least one step")
    x = grid.x
    h = grid.h
    f_path = flat_derivative_path(model, grid, m_path[:n_steps])
    v_pot = model.potential(x)
    a_kin = model.a_of_x(x)
    if terminal_u is None:
        terminal_u = np.zeros(grid.n_cells)
    u_path = kernels.hjb_sweep(terminal_u, f_path, v_pot, a_kin,
                               model.nu, dt, h, delta)
    _check_hjb_monotonicity(u_path, a_kin, dt, h)
    return u_path


def _check_hjb_monotonicity(u_path: np.ndarray, a_kin: np.ndarray,
                            dt: float, h: float) -> None:
    with np.errstate(invalid="ignore", over="ignore"):
        d_plus = (np.roll(u_path, -1, axis=-1) - u_path) / h
        d_minus = np.roll(d_plus, 1, axis=-1)
        slope = np.maximum(d_minus, 0.0) - np.minimum(d_plus, 0.0)
        bound = float((a_kin * slope).max()) * dt / h
    if not np.isfinite(bound) or bound > 1.0:
        raise StepSizeError(
            f"explicit Hamiltonian term breaks monotonicity: dt a |Du| / h = "
            f"{bound:.3f} > 1; reduce dt"
        )
