"""Acceptance suite: the scientific claims of the package at desk scale.

Each test prints one PASS/FAIL line (run with ``pytest -v -s`` to see them
all).  The expensive default-configuration ladder is solved once per
session and shared across criteria.
"""

import time

import numpy as np
import pytest

from mfglab.cli import main
from mfglab.ladder import (
    DEFAULT_LADDER,
    convergence_report,
    cross_method_check,
)
from mfglab.measures import GridMeasure, TorusGrid, make_probe, probe_panel, w1_distance
from mfglab.mfg import SolverOptions, solve_discounted_mfg
from mfglab.model import ModelSpec, TrigPoly
from oracles import DirectTranscription, fp_spectral_error, w1_lp

GRID = TorusGrid(64)
PANEL = probe_panel(GRID)
MODEL = ModelSpec()
OPTS = SolverOptions()
TOL_CONV = 2e-2
CHECK_TOL = 1e-2


def _line(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"acceptance criterion {num:02d} {name}: {status}"
          + (f"  ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def default_report():
    t0 = time.monotonic()
    report = convergence_report(MODEL, PANEL, deltas=DEFAULT_LADDER,
                                opts=OPTS, tol_conv=TOL_CONV,
                                check_tol=CHECK_TOL, seed=0)
    report.elapsed = time.monotonic() - t0
    return report


@pytest.fixture(scope="session")
def shifted_report():
    shifted = ModelSpec(coupling_constant=1.0)
    return convergence_report(shifted, PANEL, deltas=DEFAULT_LADDER,
                              opts=OPTS, tol_conv=TOL_CONV,
                              check_tol=CHECK_TOL, seed=0)


def test_criterion_01_gauge_baselines():
    t0 = time.monotonic()
    zero = ModelSpec(f_coupling=TrigPoly(), theta=0.0)
    const = ModelSpec(f_coupling=TrigPoly(), theta=0.0, coupling_constant=0.7)
    probes = {k: PANEL[k] for k in ("uniform", "bump")}
    zero_dv, const_dv = {}, {}
    ok = True
    for delta in (0.8, 0.4):
        zero_dv[delta], const_dv[delta] = {}, {}
        for name, m0 in probes.items():
            arc, _ = solve_discounted_mfg(zero, m0, delta, OPTS)
            ok = ok and abs(arc.value) <= 1e-12
            zero_dv[delta][name] = delta * arc.value
            arc, _ = solve_discounted_mfg(const, m0, delta, OPTS)
            ok = ok and abs(arc.value - 0.7 / delta) <= 1e-10 * (0.7 / delta)
            const_dv[delta][name] = delta * arc.value
    from mfglab.ladder import estimate_lambda
    lam_zero, _ = estimate_lambda(zero_dv)
    lam_const, _ = estimate_lambda(const_dv)
    ok = ok and abs(lam_zero) <= 1e-12 and abs(lam_const + 0.7) <= 1e-10
    elapsed = time.monotonic() - t0
    ok = ok and elapsed <= 10.0
    _line(1, "gauge_baselines", ok,
          f"lam_zero={lam_zero:.2e} lam_const={lam_const!r} t={elapsed:.1f}s")
    assert ok


def test_criterion_02_w1_lp_oracle():
    t0 = time.monotonic()
    rng = np.random.default_rng(2024)
    worst = 0.0
    count = 0
    for n in (4, 8, 16):
        g = TorusGrid(n)
        for _ in range(67 if n < 16 else 66):
            a = rng.random(n)
            b = rng.random(n)
            a /= a.sum()
            b /= b.sum()
            d_pkg = w1_distance(GridMeasure(g, a), GridMeasure(g, b))
            worst = max(worst, abs(d_pkg - w1_lp(a, b)))
            count += 1
    elapsed = time.monotonic() - t0
    ok = worst <= 1e-9 and count == 200 and elapsed <= 5.0
    _line(2, "w1_lp_oracle", ok,
          f"pairs={count} worst={worst:.2e} t={elapsed:.1f}s")
    assert ok


def test_criterion_03_direct_transcription():
    t0 = time.monotonic()
    grid = TorusGrid(8)
    m0 = make_probe(grid, "cosine", a=0.3)
    arc, rep = solve_discounted_mfg(MODEL, m0, 0.5, OPTS)
    oracle = DirectTranscription(MODEL, 8, m0.mass, 0.5, arc.dt, arc.n_steps)
    j_min, _, _ = oracle.minimize(maxiter=300)
    rel = abs(j_min - arc.value) / abs(arc.value)
    elapsed = time.monotonic() - t0
    ok = rep.converged and rel <= 1e-4 and elapsed <= 120.0
    _line(3, "direct_transcription", ok,
          f"solver={arc.value!r} oracle={j_min!r} rel={rel:.2e} t={elapsed:.0f}s")
    assert ok


def test_criterion_04_fp_spectral_orders():
    t0 = time.monotonic()
    errs_dt = [fp_spectral_error(64, dt, 0.5, semi_discrete=True)
               for dt in (4e-3, 2e-3, 1e-3)]
    orders_dt = [np.log2(a / b) for a, b in zip(errs_dt, errs_dt[1:])]
    errs_h = [fp_spectral_error(n, 2e-5, 0.1) for n in (8, 16, 32)]
    orders_h = [np.log2(a / b) for a, b in zip(errs_h, errs_h[1:])]
    elapsed = time.monotonic() - t0
    ok = min(orders_dt) >= 1.0 - 0.1 and min(orders_h) >= 2.0 - 0.1 \
        and elapsed <= 30.0
    _line(4, "fp_spectral_orders", ok,
          f"dt_orders={[round(float(o), 2) for o in orders_dt]} "
          f"h_orders={[round(float(o), 2) for o in orders_h]} t={elapsed:.1f}s")
    assert ok


def test_criterion_05_value_occupation_identity(default_report):
    err = max(abs(c.mather_value - c.dvalue)
              for c in default_report.cells.values())
    ok = err <= 1e-12
    _line(5, "value_occupation_identity", ok, f"max_err={err:.2e}")
    assert ok


def test_criterion_06_closedness_halving(default_report):
    ratios = default_report.closedness_ratios
    ok = all(1.4 <= r <= 2.6 for r in ratios) \
        and default_report.elapsed <= 1200.0
    _line(6, "closedness_halving", ok,
          f"ratios={[round(r, 3) for r in ratios]} "
          f"ladder_t={default_report.elapsed:.0f}s")
    assert ok


def test_criterion_07_vbar_cauchy(default_report):
    gaps = default_report.cauchy_gaps
    inversions = sum(1 for a, b in zip(gaps, gaps[1:]) if b > a * 1.10)
    bound_ok = default_report.bound_ratio <= 1.2
    ok = inversions <= 1 and gaps[-1] <= TOL_CONV and bound_ok
    _line(7, "vbar_cauchy", ok,
          f"gaps={[format(g, '.2e') for g in gaps]} "
          f"bound_ratio={default_report.bound_ratio:.3f}")
    assert ok


def test_criterion_08_inequality_suite(default_report):
    checks = default_report.checks
    lb_ok, lb = checks["lower_bound_gap"]
    vi_ok, vi = checks["vbar_integral"]
    ss_ok, ss = checks["subsolution_slack"]
    cr_ok, cr = checks["corrector_residual"]
    sm_ok, _ = checks["s_minus_membership"]
    ok = lb_ok and vi_ok and ss_ok and cr_ok and sm_ok
    _line(8, "inequality_suite", ok,
          f"lower_bound_min={min(lb.values()):.2e} "
          f"vbar_integral_max={max(vi.values()):.2e} "
          f"slack_min={min(ss.values()):.2e} "
          f"corrector_max={max(cr.values()):.2e}")
    assert ok


def test_criterion_09_cross_method(default_report):
    ok, diag = cross_method_check(MODEL, PANEL, default_report.lambda_hat,
                                  default_report.chi, opts=OPTS)
    _line(9, "cross_method", ok,
          f"cauchy={[format(g, '.1e') for g in diag['cauchy']]} "
          f"agreement={diag['agreement']:.2e}")
    assert ok


def test_criterion_10_gauge_invariance(default_report, shifted_report):
    lam_shift = shifted_report.lambda_hat - default_report.lambda_hat
    vbar_dev = max(abs(shifted_report.vbars[k] - default_report.vbars[k])
                   for k in default_report.vbars)
    chi_dev = float(np.abs(shifted_report.chi.values
                           - default_report.chi.values).max())
    ok = abs(lam_shift + 1.0) <= 1e-8 and vbar_dev <= 1e-8 and chi_dev <= 1e-8
    _line(10, "gauge_invariance", ok,
          f"lambda_shift={lam_shift!r} vbar_dev={vbar_dev:.2e} "
          f"chi_dev={chi_dev:.2e}")
    assert ok


def test_criterion_11_determinism(tmp_path):
    import json
    import os

    cfg = {"n_cells": 32, "deltas": [0.8, 0.4, 0.2], "dt": 0.01,
           "tol_tail": 1e-4}
    cfg_path = str(tmp_path / "config.json")
    with open(cfg_path, "w") as fh:
        json.dump(cfg, fh)
    outs = [str(tmp_path / "run1"), str(tmp_path / "run2")]
    codes = [main(["ladder", "--config", cfg_path, "--out", out, "--quiet"])
             for out in outs]
    identical = all(
        open(os.path.join(outs[0], name), "rb").read()
        == open(os.path.join(outs[1], name), "rb").read()
        for name in ("lambda.csv", "ladder.csv", "config.json"))
    ok = codes == [0, 0] and identical
    _line(11, "determinism", ok, f"exit_codes={codes} identical={identical}")
    assert ok
