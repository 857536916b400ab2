"""The vanishing-discount experiment: lambda estimation, normalized values,
Cauchy convergence of the ladder, and the subsolution/corrector inequality
suite.

The corrector candidate chi_0 is represented by its values on the probe
panel plus a W1-Lipschitz lower-envelope extension
``chi(m) = max_p [chi(p) - K W1(m, p)]``; every check below evaluates chi
only at finitely many measures (panel points and occupation atoms), so the
per-atom W1 distances to the panel are all that needs to be retained from
a solved cell.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from mfglab.measures import (
    GridMeasure,
    w1_between_paths,
    w1_distance,
    w1_to_reference,
)
from mfglab.mfg import (
    SolverOptions,
    finite_horizon_value,
    running_cost_path,
    solve_discounted_mfg,
)
from mfglab.model import ModelSpec, TestFunctional, TrigPoly, functional_battery
from mfglab.occupation import (
    build_occupation,
    mather_value,
    battery_residuals,
    smoothness_certificate,
)
from mfglab.pde import central_gradient, fp_path, second_difference

DEFAULT_LADDER = (0.4, 0.2, 0.1, 0.05, 0.025)
CORRECTOR_WINDOWS = (0.25, 0.5)


# ---------------------------------------------------------------------------
# Per-(delta, probe) solve summary: everything the ladder checks need,
# without retaining the full arc.
# ---------------------------------------------------------------------------

@dataclass
class CellSummary:
    delta: float
    probe: str
    value: float
    converged: bool
    iterations: int
    last_residual: float
    du_sup: float
    d2u_sup: float
    drift_bound: float
    holder_constant: float
    mather_value: float
    closedness: dict
    smooth_c2: float
    smooth_c1: float
    occ_weights: np.ndarray
    occ_w1_to_panel: np.ndarray   # (n_atoms, n_panel)
    corrector_data: dict          # h -> (head cost, W1(m(h), panel) (n_panel,))

    @property
    def dvalue(self) -> float:
        return self.delta * self.value


def _holder_constant(masses: np.ndarray, dt: float) -> float:
    """Fitted C with W1(m(s), m(l)) <= C |l - s|^(1/2) on sampled lags."""
    n_slices = masses.shape[0]
    best = 0.0
    for lag in (1, 4, 16, 64, 256):
        if lag >= n_slices:
            break
        starts = np.linspace(0, n_slices - 1 - lag, num=min(64, n_slices - lag),
                             dtype=int)
        d = w1_between_paths(masses[starts + lag], masses[starts])
        best = max(best, float(d.max()) / math.sqrt(lag * dt))
    return best


def solve_cell(model: ModelSpec, probe_name: str, m0: GridMeasure,
               delta: float, panel: dict[str, GridMeasure],
               opts: SolverOptions, battery: list[TestFunctional],
               windows: tuple = CORRECTOR_WINDOWS) -> CellSummary:
    """Solve one (delta, probe) cell and reduce it to a summary."""
    arc, report = solve_discounted_mfg(model, m0, delta, opts)
    occ = build_occupation(arc, force=not report.converged)
    smooth = smoothness_certificate(occ)
    panel_names = sorted(panel)
    w1_cols = [w1_to_reference(occ.masses, panel[p].mass) for p in panel_names]
    h_grid = arc.grid.h
    corrector_data = {}
    costs = arc.running_cost()
    for h in windows:
        k = min(int(round(h / arc.dt)), arc.n_steps)
        head = float(costs[:k].sum() * arc.dt)
        mh = arc.masses[k]
        dists = np.array([w1_distance(GridMeasure(arc.grid, mh), panel[p])
                          for p in panel_names])
        corrector_data[h] = (head, dists)
    return CellSummary(
        delta=delta,
        probe=probe_name,
        value=arc.value,
        converged=report.converged,
        iterations=report.iterations,
        last_residual=report.residuals[-1] if report.residuals else math.nan,
        du_sup=float(np.abs(central_gradient(arc.u_path, h_grid)).max()),
        d2u_sup=float(np.abs(second_difference(arc.u_path, h_grid)).max()),
        drift_bound=occ.drift_bound,
        holder_constant=_holder_constant(arc.masses, arc.dt),
        mather_value=mather_value(occ),
        closedness=battery_residuals(occ, battery),
        smooth_c2=smooth.max_c2_mass,
        smooth_c1=smooth.max_c1_drift,
        occ_weights=occ.weights,
        occ_w1_to_panel=np.stack(w1_cols, axis=1),
        corrector_data=corrector_data,
    )


def _cell_job(args):
    return solve_cell(*args)


def solve_all_cells(model: ModelSpec, panel: dict[str, GridMeasure],
                    deltas, opts: SolverOptions,
                    battery: list[TestFunctional] | None = None,
                    jobs: int = 1) -> dict:
    """Solve the whole (delta, probe) grid, optionally in parallel."""
    if battery is None:
        battery = functional_battery()
    tasks = [(model, name, panel[name], delta, panel, opts, battery)
             for delta in sorted(deltas, reverse=True)
             for name in sorted(panel)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_job, tasks))
    else:
        results = [_cell_job(t) for t in tasks]
    return {(c.delta, c.probe): c for c in results}


# ---------------------------------------------------------------------------
# Ergodic constant, normalized values and the Lipschitz extension of chi.
# ---------------------------------------------------------------------------

def estimate_lambda(dvalues: dict[float, dict[str, float]],
                    spread_tol: float = 0.1) -> tuple[float, dict]:
    """Richardson-extrapolated ergodic constant from delta * V_delta.

    ``dvalues`` maps delta -> probe -> delta * V_delta.  Assuming a
    first-order error in delta, the two smallest rungs give
    -lambda ~= 2 a(delta_min) - a(2 delta_min).
    """
    deltas = sorted(dvalues)
    if len(deltas) < 2:
        raise ValueError("lambda extrapolation needs at least two rungs")
    a1 = float(np.mean(list(dvalues[deltas[0]].values())))
    a2 = float(np.mean(list(dvalues[deltas[1]].values())))
    lam = -(2 * a1 - a2)
    spreads = {d: max(v.values()) - min(v.values()) for d, v in dvalues.items()}
    diag = {
        "rungs_used": (deltas[0], deltas[1]),
        "probe_spread": spreads,
        "spread_ok": spreads[deltas[0]] <= spread_tol,
    }
    return lam, diag


def vbar(value: float, delta: float, lambda_hat: float) -> float:
    """Normalized value V_delta + lambda / delta."""
    return value + lambda_hat / delta


@dataclass
class ChiEstimate:
    """chi_0 candidate: panel values plus the Lipschitz extension constant."""

    panel_names: list
    values: np.ndarray          # chi at panel points, panel order
    extrapolated: np.ndarray    # Richardson-extrapolated panel values
    lipschitz: float
    lambda_hat: float

    def at_panel(self, name: str) -> float:
        return float(self.values[self.panel_names.index(name)])

    def eval_from_w1(self, w1_vec: np.ndarray) -> np.ndarray:
        """Lower-envelope extension from W1 distances to the panel.

        ``w1_vec`` has shape (..., n_panel); returns
        max_p [chi(p) - K W1(., p)].
        """
        return np.max(self.values - self.lipschitz * np.asarray(w1_vec), axis=-1)


# ---------------------------------------------------------------------------
# Inequality suite
# ---------------------------------------------------------------------------

def subsolution_check(model: ModelSpec, chi: ChiEstimate, m0: GridMeasure,
                      panel: dict[str, GridMeasure], horizon: float,
                      n_samples: int = 16, seed: int = 0,
                      base_dt: float = 5e-3) -> float:
    """Worst signed slack of the subsolution inequality over random drifts.

    For each sampled drift: run the transport flow on [0, horizon], then
    slack = cost + chi(m(h)) + lambda h - chi(m0); a subsolution has
    slack >= -tol for every drift.
    """
    rng = np.random.default_rng(seed)
    panel_names = sorted(panel)
    x = m0.grid.x
    worst = math.inf
    chi_m0 = chi.eval_from_w1(np.array(
        [w1_distance(m0, panel[p]) for p in panel_names]))
    for _ in range(n_samples):
        coeffs = rng.uniform(-2.0, 2.0, size=4)
        drift = TrigPoly(((1, coeffs[0], coeffs[1]), (2, coeffs[2], coeffs[3])))(x)
        max_a = float(np.abs(drift).max())
        dt = min(base_dt, m0.grid.h / (2 * max_a) / 1.05) if max_a > 0 else base_dt
        n_steps = max(1, math.ceil(horizon / dt))
        dt = horizon / n_steps
        masses = fp_path(m0, np.broadcast_to(drift, (n_steps, x.size)), dt, model.nu)
        drifts = np.broadcast_to(drift, (n_steps + 1, x.size))
        cost = float(running_cost_path(model, m0.grid, masses[:-1],
                                       drifts[:-1]).sum() * dt)
        mh = masses[-1]
        chi_mh = chi.eval_from_w1(np.array(
            [w1_distance(GridMeasure(m0.grid, mh), panel[p]) for p in panel_names]))
        slack = cost + float(chi_mh) + chi.lambda_hat * horizon - float(chi_m0)
        worst = min(worst, slack)
    return worst


def corrector_check(chi: ChiEstimate, cell: CellSummary, horizon: float) -> float:
    """Near-attainment residual of the corrector DPP along the optimal arc."""
    head, dists = cell.corrector_data[horizon]
    chi_m0 = chi.at_panel(cell.probe)
    chi_mh = float(chi.eval_from_w1(dists))
    return abs(chi_m0 - (head + chi_mh + chi.lambda_hat * horizon))


def lower_bound_check(chi: ChiEstimate, cell: CellSummary,
                      vbar_value: float) -> float:
    """Signed gap of vbar(m0) >= chi(m0) - int chi d nu; passes if >= -tol.

    Invariant under constant shifts of chi since the occupation weights sum
    to one.
    """
    chi_m0 = chi.at_panel(cell.probe)
    chi_atoms = chi.eval_from_w1(cell.occ_w1_to_panel)
    return vbar_value - chi_m0 + float(cell.occ_weights @ chi_atoms)


def vbar_integral_check(vbar_panel: dict[str, float], lipschitz: float,
                        cell: CellSummary, panel_names: list) -> float:
    """int vbar_delta d mu over the occupation atoms of a smaller-delta cell."""
    vals = np.array([vbar_panel[p] for p in panel_names])
    ext = np.max(vals - lipschitz * cell.occ_w1_to_panel, axis=-1)
    return float(cell.occ_weights @ ext)


def s_minus_membership(chi: ChiEstimate, slack: float,
                       cells: list, tol: float) -> tuple[bool, dict]:
    """Both membership conditions for the candidate corrector.

    Subsolution slack >= -tol and int chi d mu <= tol for every smooth
    occupation measure in ``cells``.
    """
    integrals = {}
    for cell in cells:
        chi_atoms = chi.eval_from_w1(cell.occ_w1_to_panel)
        integrals[(cell.delta, cell.probe)] = float(cell.occ_weights @ chi_atoms)
    ok = slack >= -tol and all(v <= tol for v in integrals.values())
    return ok, {"slack": slack, "integrals": integrals}


# ---------------------------------------------------------------------------
# Full ladder report
# ---------------------------------------------------------------------------

@dataclass
class LadderReport:
    model: ModelSpec
    deltas: list
    panel_names: list
    cells: dict                      # (delta, probe) -> CellSummary
    lambda_hat: float = math.nan
    lambda_diag: dict = field(default_factory=dict)
    vbars: dict = field(default_factory=dict)   # (delta, probe) -> float
    cauchy_gaps: list = field(default_factory=list)
    uniform_bound: float = math.nan
    bound_ratio: float = math.nan
    lipschitz: float = math.nan
    closedness_max: dict = field(default_factory=dict)  # delta -> max residual
    closedness_ratios: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)  # name -> (passed, detail)
    chi: ChiEstimate | None = None
    tol_conv: float = 2e-2

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())


def _panel_w1_matrix(panel: dict[str, GridMeasure]) -> tuple[list, np.ndarray]:
    names = sorted(panel)
    n = len(names)
    mat = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            mat[i, j] = mat[j, i] = w1_distance(panel[names[i]], panel[names[j]])
    return names, mat


def convergence_report(model: ModelSpec, panel: dict[str, GridMeasure],
                       deltas=DEFAULT_LADDER, opts: SolverOptions = SolverOptions(),
                       jobs: int = 1, tol_conv: float = 2e-2,
                       check_tol: float = 1e-2, seed: int = 0,
                       cells: dict | None = None) -> LadderReport:
    """Run the ladder over the probe panel and assemble every check.

    ``cells`` may carry presolved summaries (used by the CLI to avoid
    re-solving); otherwise the full grid is solved here.
    """
    deltas = sorted(deltas, reverse=True)
    if cells is None:
        cells = solve_all_cells(model, panel, deltas, opts, jobs=jobs)
    report = LadderReport(model=model, deltas=list(deltas),
                          panel_names=sorted(panel), cells=cells,
                          tol_conv=tol_conv)
    names = report.panel_names

    # -- ergodic constant ---------------------------------------------------
    dvalues = {d: {p: cells[(d, p)].dvalue for p in names} for d in deltas}
    lam, diag = estimate_lambda(dvalues)
    report.lambda_hat, report.lambda_diag = lam, diag
    report.checks["lambda_probe_spread"] = (
        diag["spread_ok"], diag["probe_spread"])

    # -- normalized values, Cauchy gaps, uniform bound ----------------------
    report.vbars = {(d, p): vbar(cells[(d, p)].value, d, lam)
                    for d in deltas for p in names}
    gaps = []
    for hi, lo in zip(deltas[:-1], deltas[1:]):
        gaps.append(max(abs(report.vbars[(hi, p)] - report.vbars[(lo, p)])
                        for p in names))
    report.cauchy_gaps = gaps
    inversions = sum(
        1 for g0, g1 in zip(gaps[:-1], gaps[1:]) if g1 > g0 * 1.10)
    monotone_ok = inversions <= 1 and gaps[-1] <= tol_conv
    report.checks["cauchy_gaps"] = (monotone_ok, gaps)
    rung_bounds = [max(abs(report.vbars[(d, p)]) for p in names) for d in deltas]
    report.uniform_bound = max(rung_bounds)
    report.bound_ratio = (max(rung_bounds) / min(rung_bounds)
                          if min(rung_bounds) > 0 else math.inf)
    report.checks["uniform_bound"] = (report.bound_ratio <= 1.2, rung_bounds)

    # -- Lipschitz constant in m --------------------------------------------
    _, w1_mat = _panel_w1_matrix(panel)
    ratios = []
    for d in deltas:
        for i, pi in enumerate(names):
            for j in range(i + 1, len(names)):
                dist = w1_mat[i, j]
                if dist > 1e-12:
                    ratios.append(abs(report.vbars[(d, pi)]
                                      - report.vbars[(d, names[j])]) / dist)
    report.lipschitz = float(max(ratios)) if ratios else 0.0

    # -- closedness rate -----------------------------------------------------
    report.closedness_max = {
        d: max(max(cells[(d, p)].closedness.values()) for p in names)
        for d in deltas}
    ratio_list = [report.closedness_max[hi] / report.closedness_max[lo]
                  for hi, lo in zip(deltas[:-1], deltas[1:])]
    report.closedness_ratios = ratio_list
    report.checks["closedness_rate"] = (
        all(1.4 <= r <= 2.6 for r in ratio_list), ratio_list)

    # -- value/occupation identity -------------------------------------------
    identity_err = max(abs(cells[(d, p)].mather_value - cells[(d, p)].dvalue)
                       for d in deltas for p in names)
    report.checks["value_occupation_identity"] = (identity_err <= 1e-12,
                                                  identity_err)

    # -- smoothness / drift-bound stability ----------------------------------
    c2 = [max(cells[(d, p)].smooth_c2 for p in names) for d in deltas]
    drift_bounds = [max(cells[(d, p)].drift_bound for p in names) for d in deltas]
    report.checks["smoothness_stable"] = (
        max(c2) <= 1.5 * min(c2), c2)
    report.checks["drift_bound_stable"] = (
        max(drift_bounds) <= 1.5 * max(min(drift_bounds), 1e-12) or
        max(drift_bounds) <= 1e-9, drift_bounds)

    # -- corrector candidate and inequality suite ----------------------------
    d_min, d_next = deltas[-1], deltas[-2]
    chi_vals = np.array([report.vbars[(d_min, p)] for p in names])
    chi_next = np.array([report.vbars[(d_next, p)] for p in names])
    chi = ChiEstimate(panel_names=names, values=chi_vals,
                      extrapolated=2 * chi_vals - chi_next,
                      lipschitz=max(report.lipschitz, 1e-6), lambda_hat=lam)
    report.chi = chi

    slacks = {}
    for h in CORRECTOR_WINDOWS:
        for p in names:
            slacks[(h, p)] = subsolution_check(
                model, chi, panel[p], panel, h, seed=seed, base_dt=opts.dt)
    worst_slack = min(slacks.values())
    report.checks["subsolution_slack"] = (worst_slack >= -check_tol, slacks)

    corr = {(h, p): corrector_check(chi, cells[(d_min, p)], h)
            for h in CORRECTOR_WINDOWS for p in names}
    corr_tol = 3 * (tol_conv + opts.dt)
    report.checks["corrector_residual"] = (
        max(corr.values()) <= corr_tol, corr)

    chi_shift = ChiEstimate(panel_names=names,
                            values=chi_vals - chi_vals.max(),
                            extrapolated=chi.extrapolated - chi_vals.max(),
                            lipschitz=chi.lipschitz, lambda_hat=lam)
    lb = {(d, p): lower_bound_check(chi_shift, cells[(d, p)],
                                    report.vbars[(d, p)])
          for d in deltas for p in names}
    report.checks["lower_bound_gap"] = (min(lb.values()) >= -check_tol, lb)

    k_closed = report.closedness_max[deltas[0]] / deltas[0]
    vint = {}
    for d in deltas:
        for p in names:
            vbar_panel = {q: report.vbars[(d, q)] for q in names}
            vint[(d, p)] = vbar_integral_check(
                vbar_panel, chi.lipschitz, cells[(d_min, p)], names)
    vint_tol = max(k_closed, 1.0) * d_min + check_tol
    report.checks["vbar_integral"] = (
        max(vint.values()) <= vint_tol, vint)

    smooth_cells = [cells[(d_min, p)] for p in names]
    member_ok, member_diag = s_minus_membership(
        chi_shift, worst_slack, smooth_cells, check_tol)
    report.checks["s_minus_membership"] = (member_ok, member_diag)

    return report


def cross_method_check(model: ModelSpec, panel: dict[str, GridMeasure],
                       lambda_hat: float, chi: ChiEstimate,
                       horizons=(10.0, 20.0, 40.0),
                       opts: SolverOptions = SolverOptions(),
                       tol: float = 5e-2) -> tuple[bool, dict]:
    """Long-time check: U^T(0, .) + lambda T is Cauchy in T and matches the
    corrector candidate up to an additive constant."""
    names = sorted(panel)
    table = {}
    for T in horizons:
        vals = np.array([finite_horizon_value(model, panel[p], T, opts)
                         for p in names])
        table[T] = vals + lambda_hat * T
    hs = sorted(horizons)
    # gaps per unit time: the residual lambda error contributes
    # |lambda_hat - lambda| * (b - a) to the raw gap, so normalize by the
    # span before asking for smallness
    cauchy = [float(np.max(np.abs(table[b] - table[a]))) / (b - a)
              for a, b in zip(hs[:-1], hs[1:])]
    final = table[hs[-1]]
    centered = final - final.mean()
    chi_centered = chi.values - chi.values.mean()
    agree = float(np.max(np.abs(centered - chi_centered)))
    ok = all(g <= tol for g in cauchy) and agree <= tol
    return ok, {"cauchy": cauchy, "agreement": agree,
                "table": {T: v.tolist() for T, v in table.items()}}
