"""Command-line entry point.

Subcommands:

- ``solve``: one discounted solve per probe at the largest configured delta,
  arcs saved under ``out/arcs/``.
- ``ladder``: the vanishing-discount ladder with all convergence checks.
- ``certify``: Mather certificates for the occupation measures.
- ``dpp``: dynamic-programming-principle residuals along solved arcs.
- ``full``: ladder + certificates + the long-time cross check + summary plot.

Exit codes: 0 on success, 2 when a scientific check fails, 1 on errors.
All CSV output uses repr formatting, so repeated runs with the same config
and seed are bit-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from mfglab import __version__
from mfglab.config import RunConfig
from mfglab.errors import MfgLabError
from mfglab.ladder import convergence_report, cross_method_check, solve_all_cells
from mfglab.mfg import arc_save, dpp_residual, solve_discounted_mfg
from mfglab.model import functional_battery
from mfglab.occupation import build_occupation, certify

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SCIENCE_FAIL = 2


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _prepare(args) -> tuple[RunConfig, str]:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = RunConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    out = args.out
    os.makedirs(out, exist_ok=True)
    cfg.save(os.path.join(out, "config.json"))
    return cfg, out


def _write_lambda_csv(path: str, report) -> None:
    with open(path, "w") as fh:
        fh.write("delta,probe,value,dvalue,vbar\n")
        for d in report.deltas:
            for p in report.panel_names:
                c = report.cells[(d, p)]
                fh.write(f"{d!r},{p},{c.value!r},{c.dvalue!r},"
                         f"{report.vbars[(d, p)]!r}\n")


def _write_ladder_csv(path: str, report) -> None:
    with open(path, "w") as fh:
        fh.write("delta_high,delta_low,cauchy_gap,closedness_high,"
                 "closedness_ratio\n")
        for i, (hi, lo) in enumerate(zip(report.deltas[:-1], report.deltas[1:])):
            fh.write(f"{hi!r},{lo!r},{report.cauchy_gaps[i]!r},"
                     f"{report.closedness_max[hi]!r},"
                     f"{report.closedness_ratios[i]!r}\n")


def _write_report_txt(path: str, cfg: RunConfig, report,
                      extra_checks: dict | None = None) -> None:
    lines = [
        f"mfglab {__version__}",
        f"config_hash: {cfg.canonical_hash()}",
        f"lambda_hat: {report.lambda_hat!r}",
        f"uniform_bound: {report.uniform_bound!r}",
        f"bound_ratio: {report.bound_ratio!r}",
        f"lipschitz: {report.lipschitz!r}",
        "checks:",
    ]
    checks = dict(report.checks)
    if extra_checks:
        checks.update(extra_checks)
    for name in sorted(checks):
        ok, _ = checks[name]
        lines.append(f"  {name}: {'PASS' if ok else 'FAIL'}")
    lines.append(f"overall: {'PASS' if all(ok for ok, _ in checks.values()) else 'FAIL'}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_summary_svg(path: str, report) -> None:
    """Normalized values per rung as polylines, no plotting dependency."""
    width, height, pad = 480, 320, 40
    vals = [report.vbars[(d, p)] for d in report.deltas
            for p in report.panel_names]
    lo, hi = min(vals), max(vals)
    span = (hi - lo) or 1.0
    n_r = len(report.deltas)

    def sx(i):
        return pad + i * (width - 2 * pad) / max(n_r - 1, 1)

    def sy(v):
        return height - pad - (v - lo) / span * (height - 2 * pad)

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    for ci, p in enumerate(report.panel_names):
        pts = " ".join(f"{sx(i):.1f},{sy(report.vbars[(d, p)]):.1f}"
                       for i, d in enumerate(report.deltas))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{colors[ci % len(colors)]}" stroke-width="2"/>')
        parts.append(f'<text x="{pad}" y="{pad + 14 * ci}" font-size="12" '
                     f'fill="{colors[ci % len(colors)]}">{p}</text>')
    for i, d in enumerate(report.deltas):
        parts.append(f'<text x="{sx(i) - 10:.1f}" y="{height - pad + 16}" '
                     f'font-size="11">{d}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def _write_certificates(out: str, cfg: RunConfig, cells_delta: float,
                        model, panel, opts, lambda_hat: float,
                        k_fit: float, args) -> bool:
    cert_dir = os.path.join(out, "certificates")
    os.makedirs(cert_dir, exist_ok=True)
    battery = functional_battery()
    all_ok = True
    for name in sorted(panel):
        arc, rep = solve_discounted_mfg(model, panel[name], cells_delta, opts)
        occ = build_occupation(arc, force=not rep.converged)
        cert = certify(occ, battery, lambda_hat,
                       closedness_tol=2.0 * k_fit * cells_delta)
        all_ok = all_ok and cert.passed
        with open(os.path.join(cert_dir, f"{name}.txt"), "w") as fh:
            fh.write(f"probe: {name}\nconfig_hash: {cfg.canonical_hash()}\n")
            fh.write(cert.to_text())
        _say(args, f"certificate[{name}]: {'PASS' if cert.passed else 'FAIL'}")
    return all_ok


def cmd_solve(args) -> int:
    cfg, out = _prepare(args)
    model, panel, opts = cfg.build_model(), cfg.build_panel(), cfg.solver_options()
    delta = cfg.deltas[0]
    arcs_dir = os.path.join(out, "arcs")
    rows = []
    ok = True
    for name in sorted(panel):
        arc, rep = solve_discounted_mfg(model, panel[name], delta, opts)
        ok = ok and rep.converged
        arc_save(arc, os.path.join(arcs_dir, f"delta{delta!r}_{name}"))
        rows.append((name, arc.value, rep.iterations, rep.converged))
        _say(args, f"solve[{name}]: value={arc.value!r} "
                   f"iters={rep.iterations} converged={rep.converged}")
    with open(os.path.join(out, "lambda.csv"), "w") as fh:
        fh.write("delta,probe,value,dvalue,vbar\n")
        for name, value, _, _ in rows:
            fh.write(f"{delta!r},{name},{value!r},{delta * value!r},\n")
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(f"mfglab {__version__}\nconfig_hash: {cfg.canonical_hash()}\n")
        for name, value, iters, conv in rows:
            fh.write(f"{name}: value={value!r} iterations={iters} "
                     f"converged={conv}\n")
    return EXIT_OK if ok else EXIT_SCIENCE_FAIL


def cmd_ladder(args) -> int:
    cfg, out = _prepare(args)
    report = convergence_report(
        cfg.build_model(), cfg.build_panel(), deltas=cfg.deltas,
        opts=cfg.solver_options(), jobs=args.jobs, tol_conv=cfg.tol_conv,
        check_tol=cfg.check_tol, seed=cfg.seed)
    _write_lambda_csv(os.path.join(out, "lambda.csv"), report)
    _write_ladder_csv(os.path.join(out, "ladder.csv"), report)
    _write_report_txt(os.path.join(out, "report.txt"), cfg, report)
    for name, (okc, _) in sorted(report.checks.items()):
        _say(args, f"{name}: {'PASS' if okc else 'FAIL'}")
    _say(args, f"lambda_hat = {report.lambda_hat!r}")
    return EXIT_OK if report.passed else EXIT_SCIENCE_FAIL


def cmd_certify(args) -> int:
    cfg, out = _prepare(args)
    model, panel, opts = cfg.build_model(), cfg.build_panel(), cfg.solver_options()
    d_hi, d_lo = cfg.deltas[0], cfg.deltas[1]
    battery = functional_battery()
    cells = solve_all_cells(model, panel, (d_hi, d_lo), opts,
                            battery=battery, jobs=args.jobs)
    dvals = {d: {p: cells[(d, p)].dvalue for p in sorted(panel)}
             for d in (d_hi, d_lo)}
    a1 = sum(dvals[d_lo].values()) / len(panel)
    a2 = sum(dvals[d_hi].values()) / len(panel)
    lambda_hat = -(2 * a1 - a2)
    k_fit = max(max(cells[(d_hi, p)].closedness.values())
                for p in panel) / d_hi
    ok = _write_certificates(out, cfg, d_lo, model, panel, opts,
                             lambda_hat, k_fit, args)
    return EXIT_OK if ok else EXIT_SCIENCE_FAIL


def cmd_dpp(args) -> int:
    cfg, out = _prepare(args)
    model, panel, opts = cfg.build_model(), cfg.build_panel(), cfg.solver_options()
    delta = cfg.deltas[0]
    rows = []
    worst = 0.0
    for name in sorted(panel):
        arc, _ = solve_discounted_mfg(model, panel[name], delta, opts)
        t = min(0.5, arc.horizon / 2)
        res = dpp_residual(arc, t, opts)
        worst = max(worst, res)
        rows.append((name, t, res))
        _say(args, f"dpp[{name}]: t={t!r} residual={res!r}")
    tol = 10 * (cfg.tol_fp + cfg.tol_tail)
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(f"mfglab {__version__}\nconfig_hash: {cfg.canonical_hash()}\n")
        for name, t, res in rows:
            fh.write(f"{name}: t={t!r} dpp_residual={res!r}\n")
        fh.write(f"tolerance: {tol!r}\n")
        fh.write(f"overall: {'PASS' if worst <= tol else 'FAIL'}\n")
    return EXIT_OK if worst <= tol else EXIT_SCIENCE_FAIL


def cmd_full(args) -> int:
    cfg, out = _prepare(args)
    model, panel, opts = cfg.build_model(), cfg.build_panel(), cfg.solver_options()
    report = convergence_report(
        model, panel, deltas=cfg.deltas, opts=opts, jobs=args.jobs,
        tol_conv=cfg.tol_conv, check_tol=cfg.check_tol, seed=cfg.seed)
    cross_ok, cross = cross_method_check(model, panel, report.lambda_hat,
                                         report.chi, opts=opts)
    k_fit = report.closedness_max[report.deltas[0]] / report.deltas[0]
    cert_ok = _write_certificates(out, cfg, report.deltas[-1], model, panel,
                                  opts, report.lambda_hat, k_fit, args)
    extra = {"cross_method": (cross_ok, cross),
             "certificates": (cert_ok, None)}
    _write_lambda_csv(os.path.join(out, "lambda.csv"), report)
    _write_ladder_csv(os.path.join(out, "ladder.csv"), report)
    _write_report_txt(os.path.join(out, "report.txt"), cfg, report, extra)
    _write_summary_svg(os.path.join(out, "summary.svg"), report)
    with open(os.path.join(out, "cross_method.json"), "w") as fh:
        json.dump({"passed": cross_ok, **cross}, fh, indent=2, sort_keys=True)
    for name, (okc, _) in sorted({**report.checks, **extra}.items()):
        _say(args, f"{name}: {'PASS' if okc else 'FAIL'}")
    _say(args, f"lambda_hat = {report.lambda_hat!r}")
    return EXIT_OK if report.passed and cross_ok and cert_ok else EXIT_SCIENCE_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfglab",
        description="Discounted mean field games on the circle: solves, "
                    "vanishing-discount ladders and Mather certificates.")
    parser.add_argument("--version", action="version",
                        version=f"mfglab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_text in (
            ("solve", cmd_solve, "one discounted solve per probe"),
            ("ladder", cmd_ladder, "vanishing-discount ladder with checks"),
            ("certify", cmd_certify, "Mather certificates"),
            ("dpp", cmd_dpp, "dynamic programming residuals"),
            ("full", cmd_full, "ladder + certificates + cross check")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--quiet", action="store_true")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (MfgLabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
