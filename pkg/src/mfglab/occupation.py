"""Discounted occupation measures and their Mather-measure certification.

An occupation measure is the discounted time-average of a solved arc's
(measure, drift) slices: atoms (w_i, m_i, alpha_i) with w_i proportional
to exp(-delta t_i), renormalized to total weight one.  Certification
checks closedness against a battery of cylindrical functionals, the
averaged-cost (Mather) value, and uniform smoothness of the atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mfglab.measures import GridMeasure, TorusGrid
from mfglab.mfg import TrajectoryArc, running_cost_path
from mfglab.model import ModelSpec, TestFunctional


@dataclass
class OccupationMeasure:
    """Weighted atoms (w_i, m_i, alpha_i) sampled at arc time slices."""

    model: ModelSpec
    grid: TorusGrid
    delta: float
    dt: float
    weights: np.ndarray   # (n_atoms,), positive, sums to 1
    masses: np.ndarray    # (n_atoms, n)
    drifts: np.ndarray    # (n_atoms, n)
    provenance: dict = field(default_factory=dict)

    @property
    def n_atoms(self) -> int:
        return self.weights.shape[0]

    @property
    def drift_bound(self) -> float:
        """max over atoms of ||alpha||_inf + ||D alpha||_inf (set E membership)."""
        d1 = (np.roll(self.drifts, -1, axis=1) - np.roll(self.drifts, 1, axis=1))
        d1 /= 2 * self.grid.h
        return float(np.max(np.abs(self.drifts) + np.abs(d1)))

    def atom_measure(self, i: int) -> GridMeasure:
        return GridMeasure(self.grid, self.masses[i])


def build_occupation(arc: TrajectoryArc, force: bool = False) -> OccupationMeasure:
    """Occupation measure of a solved arc, one atom per time slice.

    Weights are the arc's discounted quadrature weights renormalized to
    sum to one, so every averaged quantity shares the arc's quadrature.
    """
    q = arc.quadrature_weights()
    w = q / q.sum()
    return OccupationMeasure(
        model=arc.model,
        grid=arc.grid,
        delta=arc.delta,
        dt=arc.dt,
        weights=w,
        masses=arc.masses[:-1],
        drifts=arc.drifts[:-1],
        provenance={"delta": arc.delta, "horizon": arc.horizon,
                    "forced": force},
    )


def closedness_residual(occ: OccupationMeasure, phi: TestFunctional) -> float:
    """|{- int D_m Phi . alpha dm} + nu int div_y D_m Phi dm| averaged over atoms.

    Zero for exactly closed measures; for occupation measures the value
    telescopes along the arc and scales linearly in delta.
    """
    transport, generator = phi.closedness_terms(occ.grid.x, occ.masses, occ.drifts)
    return float(abs(occ.weights @ (occ.model.nu * generator - transport)))


def battery_residuals(occ: OccupationMeasure,
                      battery: list[TestFunctional]) -> dict[str, float]:
    return {phi.label: closedness_residual(occ, phi) for phi in battery}


def mather_value(occ: OccupationMeasure) -> float:
    """Averaged cost sum_i w_i [int H*(x, alpha_i) dm_i + F(m_i)].

    Equals delta * V_delta(m_0) under the shared quadrature, and tends to
    -lambda as delta goes to zero.
    """
    costs = running_cost_path(occ.model, occ.grid, occ.masses, occ.drifts)
    return float(occ.weights @ costs)


@dataclass
class SmoothnessReport:
    max_c2_mass: float
    max_c1_drift: float
    bound: float
    passed: bool


def smoothness_certificate(occ: OccupationMeasure,
                           c_smooth: float = 1e6) -> SmoothnessReport:
    """Uniform discrete C2 norm of atom densities and C1 norm of drifts."""
    h = occ.grid.h
    dens = occ.masses / h
    d1 = (np.roll(dens, -1, axis=1) - np.roll(dens, 1, axis=1)) / (2 * h)
    d2 = (np.roll(dens, -1, axis=1) - 2 * dens + np.roll(dens, 1, axis=1)) / h**2
    c2 = float(np.max(np.abs(dens) + np.abs(d1) + np.abs(d2)))
    a1 = (np.roll(occ.drifts, -1, axis=1) - np.roll(occ.drifts, 1, axis=1)) / (2 * h)
    c1 = float(np.max(np.abs(occ.drifts) + np.abs(a1)))
    return SmoothnessReport(max_c2_mass=c2, max_c1_drift=c1, bound=c_smooth,
                            passed=c2 <= c_smooth and c1 <= c_smooth)


def fp_generator_path(occ: OccupationMeasure) -> np.ndarray:
    """Per-atom discrete Fokker-Planck generator nu D2 m + div(m alpha).

    Uses the same centered conservative stencils as the transport kernel,
    acting on cell masses; rows are mass rates per cell.
    """
    h = occ.grid.h
    m = occ.masses
    al = occ.drifts
    lap = (np.roll(m, -1, axis=1) - 2 * m + np.roll(m, 1, axis=1)) / h**2
    a_face = 0.5 * (al + np.roll(al, -1, axis=1))
    flux = a_face * 0.5 * (m + np.roll(m, -1, axis=1))
    div = (flux - np.roll(flux, 1, axis=1)) / h
    return occ.model.nu * lap + div


def generator_identity_residual(occ: OccupationMeasure,
                                phi: TestFunctional) -> float:
    """sup over cells of |sum_i w_i Phi(m_i) (FP generator of m_i)_j|.

    For a smooth closed measure the weighted generator field vanishes; for
    occupation measures it telescopes to O(delta) + O(dt).  The cell-summed
    version is exactly zero by mass conservation for any Phi.
    """
    gen = fp_generator_path(occ)
    vals = phi.value_many(occ.grid.x, occ.masses)
    field_x = (occ.weights * vals) @ gen
    return float(np.abs(field_x).max())


@dataclass
class MatherCertificate:
    delta: float
    closedness: dict[str, float]
    max_closedness: float
    mather_value: float
    value_gap: float
    smoothness: SmoothnessReport
    drift_bound: float
    tolerances: dict = field(default_factory=dict)
    passed: bool = True

    def to_text(self) -> str:
        lines = [
            f"delta: {self.delta}",
            f"mather_value: {self.mather_value!r}",
            f"value_gap_vs_minus_lambda: {self.value_gap!r}",
            f"max_closedness_residual: {self.max_closedness!r}",
            f"smoothness_c2_mass: {self.smoothness.max_c2_mass!r}",
            f"smoothness_c1_drift: {self.smoothness.max_c1_drift!r}",
            f"drift_bound: {self.drift_bound!r}",
            f"passed: {self.passed}",
            "closedness_residuals:",
        ]
        for label in sorted(self.closedness):
            lines.append(f"  {label}: {self.closedness[label]!r}")
        return "\n".join(lines) + "\n"


def certify(occ: OccupationMeasure, battery: list[TestFunctional],
            lambda_hat: float, closedness_tol: float,
            c_smooth: float = 1e6) -> MatherCertificate:
    """Run the full certification battery against one occupation measure."""
    residuals = battery_residuals(occ, battery)
    worst = max(residuals.values())
    mval = mather_value(occ)
    smooth = smoothness_certificate(occ, c_smooth)
    ok = worst <= closedness_tol and smooth.passed
    return MatherCertificate(
        delta=occ.delta,
        closedness=residuals,
        max_closedness=worst,
        mather_value=mval,
        value_gap=abs(mval - (-lambda_hat)),
        smoothness=smooth,
        drift_bound=occ.drift_bound,
        tolerances={"closedness": closedness_tol, "c_smooth": c_smooth},
        passed=ok,
    )


def occupation_to_csv(occ: OccupationMeasure, path: str) -> None:
    """One row per atom: weight, then cell masses, then cell drifts."""
    data = np.hstack([occ.weights[:, None], occ.masses, occ.drifts])
    np.savetxt(path, data, delimiter=",", fmt="%.17g")


def occupation_from_csv(path: str, model: ModelSpec, grid: TorusGrid,
                        delta: float, dt: float) -> OccupationMeasure:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    n = grid.n_cells
    return OccupationMeasure(
        model=model, grid=grid, delta=delta, dt=dt,
        weights=data[:, 0], masses=data[:, 1:1 + n], drifts=data[:, 1 + n:],
    )
