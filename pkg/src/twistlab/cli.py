"""Command-line driver: ``twistlab --config run.yaml --out out --command sweep``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io
from .config import parse_config
from .convergence import FAIL, PASS, Verdict, run_sweep
from .exceptions import ConfigError, TwistLabError
from .full_operator import MixedBasis, assemble_full, assemble_intermediate, upper_modes_ritz
from .krein import birman_schwinger, expansion_residuals, local_green_expansion, trace_limits
from .operators import lowest_eigenpairs, write_triplets
from .oscillator import (Line1DGrid, assemble_h0, assemble_h0_dirichlet, assemble_h_eps,
                         direct_green, extrapolated_eigenvalues, required_points)
from .transverse import (build_cross_section, coupling_matrices, rectangle_energies,
                         solve_dirichlet_modes, write_modes_csv)
from .twist import scaled_twist, write_scaled_csv

log = logging.getLogger("twistlab")
COMMANDS = ("transverse", "spectrum1d", "krein", "assemble", "sweep", "report")


def _window(name, value, lo, hi, detail):
    ok = lo <= value <= hi
    return Verdict(name, PASS if ok else FAIL, float(min(value - lo, hi - value)), detail)


def _at_most(name, value, bound, detail):
    return Verdict(name, PASS if value <= bound else FAIL, float(bound - value), detail)


def cmd_transverse(cfg, out):
    grid = build_cross_section(cfg.cross_section)
    modes = solve_dirichlet_modes(grid, cfg.modes, tol=cfg.solver_tol)
    coupling = coupling_matrices(modes, grid, quad_tol=cfg.quadrature_tol)
    write_modes_csv(out / "modes.csv", modes, grid)
    io.write_csv(out / "coupling_D.csv", [f"m{j + 1}" for j in range(cfg.modes)], coupling.D)
    io.write_csv(out / "coupling_G.csv", [f"m{j + 1}" for j in range(cfg.modes)], coupling.G)
    energies = coupling.energies
    results = {"n_interior": grid.n_interior, "spacing": grid.spacing, "centroid": grid.centroid,
               "energies": energies, "E1": energies[0], "E2": energies[1],
               "C_omega": coupling.C_omega, "skew_defect": coupling.skew_defect,
               "residuals": [m.residual for m in modes]}
    verdicts = [
        Verdict("spectral_gap", PASS if energies[1] > energies[0] else FAIL,
                float(energies[1] - energies[0]), "E2 > E1"),
        Verdict("C_omega_positive", PASS if coupling.C_omega > 0 else FAIL,
                coupling.C_omega, "C_omega > 0"),
        _at_most("D_skew", coupling.skew_defect, 10 * cfg.quadrature_tol,
                 "max |D + D^T| before symmetrization"),
    ]
    spec = cfg.cross_section
    if spec.kind == "rectangle":
        exact = rectangle_energies(spec.a, spec.b, cfg.modes)
        results["exact_energies"] = exact
        results["relative_errors"] = (energies - exact) / exact
    return verdicts, results


def cmd_spectrum1d(cfg, out):
    grid = Line1DGrid(cfg.half_width, cfg.n_points)
    count = 11
    raw = lowest_eigenpairs(assemble_h0(grid), count).values
    raw_d = lowest_eigenpairs(assemble_h0_dirichlet(grid), count).values
    exact = 0.5 * np.arange(count) + 0.25
    exact_d = 0.75 + np.floor(np.arange(count) / 2)
    try:
        _, ext = extrapolated_eigenvalues(grid, count)
        _, ext_d = extrapolated_eigenvalues(grid, count, dirichlet=True)
    except ValueError:
        log.warning("n_points - 1 is not divisible by 4; no extrapolation")
        ext, ext_d = raw, raw_d
    io.write_csv(out / "spectrum1d.csv",
                 ["n", "lambda_h0", "lambda_h0D", "lambda_h0_extrapolated",
                  "lambda_h0D_extrapolated", "exact_h0", "exact_h0D"],
                 [[n, raw[n], raw_d[n], ext[n], ext_d[n], exact[n], exact_d[n]]
                  for n in range(count)])
    ratio = ext_d[0] / ext[0]
    verdicts = [
        _at_most("dirichlet_ratio", abs(ratio - 3.0), 1e-5, f"lambda0(h0D)/lambda0(h0) = {ratio:.10f}"),
        _at_most("lambda0_h0", abs(ext[0] - 0.25), 1e-6, "lambda0(h0) = 1/4"),
        _at_most("lambda0_h0D", abs(ext_d[0] - 0.75), 1e-6, "lambda0(h0D) = 3/4"),
    ]
    results = {"grid": asdict(grid), "raw_h0": raw, "raw_h0D": raw_d, "extrapolated_h0": ext,
               "extrapolated_h0D": ext_d, "ratio": ratio}
    return verdicts, results


def _coupling(cfg):
    cs = build_cross_section(cfg.cross_section)
    modes = solve_dirichlet_modes(cs, cfg.modes, tol=cfg.solver_tol)
    return coupling_matrices(modes, cs, quad_tol=cfg.quadrature_tol)


def cmd_krein(cfg, out):
    coupling = _coupling(cfg)
    profile = cfg.profile()
    data = [birman_schwinger(profile, coupling.C_omega, e, cfg.k2, cfg.quadrature_nodes)
            for e in cfg.epsilons]
    table = expansion_residuals(data)
    io.write_csv(out / "krein_residuals.csv", ["epsilon", "residual0", "residual1"],
                 zip(table.epsilons, table.residual0, table.residual1))
    grid = Line1DGrid(cfg.half_width, cfg.n_points)
    local = local_green_expansion(direct_green(assemble_h0(grid), cfg.k2))
    limits = trace_limits(profile, coupling.C_omega, cfg.epsilons, cfg.k2, grid,
                          cfg.quadrature_nodes)
    io.write_csv(out / "trace_limits.csv", ["epsilon", "rank_one", "weighted", "transverse"],
                 [[r.epsilon, r.rank_one, r.weighted, r.transverse] for r in limits.rows])
    verdicts = [
        _window("expansion_order0", table.slope0, 0.8, 1.2, f"slope {table.slope0:.4f}"),
        _window("expansion_order1", table.slope1, 1.6, 2.4, f"slope {table.slope1:.4f}"),
    ]
    results = {"C_omega": coupling.C_omega, "a": data[0].a, "b": data[0].b,
               "c": data[0].c, "local_expansion": asdict(local),
               "slope0": table.slope0, "slope1": table.slope1,
               "condition": [d.condition for d in data],
               "trace_limit_orders": limits.orders}
    return verdicts, results


def cmd_assemble(cfg, out):
    coupling = _coupling(cfg)
    profile = cfg.profile()
    eps = cfg.epsilons[0]
    n = cfg.n_points
    if not profile.is_zero:
        n = max(n, required_points(cfg.half_width, eps * profile.half_width))
    grid = Line1DGrid(cfg.half_width, n)
    basis = MixedBasis.from_coupling(grid, coupling)
    twist = scaled_twist(profile, eps)
    A = assemble_full(basis, twist)
    A0 = assemble_intermediate(basis, twist)
    h = assemble_h_eps(grid, coupling.C_omega, twist)
    write_triplets(out / "full.txt", A)
    write_triplets(out / "intermediate.txt", A0)
    write_triplets(out / "h_eps.txt", h)
    write_scaled_csv(out / "sigma.csv", twist)
    lam = lowest_eigenpairs(A, 3, tol=cfg.solver_tol)
    ritz = upper_modes_ritz(A)
    bound = (basis.energies[1] - basis.energies[0]) / eps**2
    verdicts = [
        _at_most("symmetry", A.symmetry_defect(), 0.0, "full matrix symmetric"),
        Verdict("positivity", PASS if lam.values[0] >= -10 * cfg.solver_tol else FAIL,
                float(lam.values[0]), "lambda0(H - E1/eps^2) >= 0"),
        Verdict("upper_modes_bound", PASS if ritz >= bound - 10 * cfg.solver_tol * bound else FAIL,
                float(ritz - bound), "Ritz value on modes >= 2"),
    ]
    results = {"epsilon": eps, "n_points": n, "dimension": A.dimension,
               "shift_removed": A.shift, "lowest": lam.values, "residuals": lam.residuals,
               "ritz_upper": ritz, "ritz_bound": bound}
    return verdicts, results


def _sweep_files(report, out):
    rows = report.rows
    fields = list(asdict(rows[0]).keys())
    io.write_csv(out / "sweep.csv", fields, [list(asdict(r).values()) for r in rows])
    eps = [r.epsilon for r in rows]
    for name in ("gap1", "gap2", "gap3", "total_gap", "lambda0_full", "lambda0_h_eps"):
        io.write_columns(out / f"{name}.dat", eps, [getattr(r, name) for r in rows],
                         ("epsilon", name))


def cmd_sweep(cfg, out, threads=None):
    report = run_sweep(cfg.sweep_config(threads))
    _sweep_files(report, out)
    io.write_json(out / "sweep_report.json", report.to_dict())
    return report.verdicts, {"C_omega": report.C_omega, "n_points": report.n_points,
                             "lambda_limit": report.lambda_limit,
                             "fits": {k: asdict(v) for k, v in report.fits.items()},
                             "failed_rows": [r.epsilon for r in report.rows if not r.ok]}


def cmd_report(cfg, out):
    """Plain-text table from an existing ``sweep_report.json`` in the output directory."""
    src = out / "sweep_report.json"
    if not src.exists():
        raise FileNotFoundError(f"{src} not found; run the sweep command first")
    doc = json.loads(src.read_text())
    cols = ("epsilon", "lambda0_full", "lambda0_h_eps", "gap1", "gap2", "gap3", "total_gap")
    lines = ["  ".join(f"{c:>14s}" for c in cols)]
    for row in doc["rows"]:
        lines.append("  ".join(f"{row[c]:14.6e}" if row[c] is not None else f"{'nan':>14s}"
                               for c in cols))
    lines.append("")
    for name, fit in doc["fits"].items():
        lines.append(f"rate {name}: exponent {fit['exponent']:.4f} (rms {fit['residual']:.2e})")
    lines.append(f"extrapolated lambda0 limit: {doc['lambda_limit']}")
    for v in doc["verdicts"]:
        lines.append(f"[{v['status']:>12s}] {v['name']}: {v['detail']} (margin {v['margin']})")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    verdicts = [Verdict(v["name"], v["status"], v["margin"] if v["margin"] is not None else math.nan,
                        v["detail"]) for v in doc["verdicts"]]
    return verdicts, {"source": src.name}


HANDLERS = {"transverse": cmd_transverse, "spectrum1d": cmd_spectrum1d, "krein": cmd_krein,
            "assemble": cmd_assemble, "sweep": cmd_sweep, "report": cmd_report}


def dispatch(command, cfg, out, threads=None):
    """Run one command; returns the process exit status."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if command == "sweep":
            verdicts, results = cmd_sweep(cfg, out, threads)
        else:
            verdicts, results = HANDLERS[command](cfg, out)
    except (TwistLabError, ValueError, FileNotFoundError) as exc:
        log.error("%s failed: %s", command, exc)
        io.write_summary(out / "summary.json", command, [], {}, error=f"{type(exc).__name__}: {exc}")
        return 2
    vd = [asdict(v) for v in verdicts]
    io.write_summary(out / "summary.json", command, vd, results)
    for v in verdicts:
        log.info("[%s] %s: %s (margin %.3g)", v.status, v.name, v.detail, v.margin)
    return 0 if all(v.passed for v in verdicts) else 1


def build_parser():
    p = argparse.ArgumentParser(prog="twistlab", description=__doc__)
    p.add_argument("--config", type=Path, help="YAML run configuration (defaults if omitted)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--command", choices=COMMANDS, required=True)
    p.add_argument("--threads", type=int, default=None, help="worker threads for the sweep")
    p.add_argument("--override-square", action="store_true",
                   help="accept a square cross-section")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    text = args.config.read_text() if args.config else ""
    try:
        cfg = parse_config(text, override_square=args.override_square)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    if args.threads is not None and args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return 2
    out = Path(args.out if args.out else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(text)
    return dispatch(args.command, cfg, out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
