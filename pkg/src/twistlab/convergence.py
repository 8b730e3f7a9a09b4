"""Epsilon sweeps, rate fits and verdicts on the three-step resolvent comparison.

For every eps the sweep measures

* gap1 = ||R(H) - R(H0_eps)||        (full vs intermediate operator),
* gap2 = ||R(H0_eps) - R(h_eps) (+) 0|| (intermediate vs its first-mode block),
* gap3 = ||R(h_eps) - R(h0D)||         (1D: concentrated twist vs Dirichlet point),
* total = ||R(H) - R(h0D) (+) 0||,

all with ``R(A) = (A + 1)^-1``, together with the ground levels and the
structural bounds the comparison relies on.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import SolverError, TwistLabError
from .full_operator import (MixedBasis, assemble_full, assemble_intermediate,
                            form_difference_m, probe_states, upper_modes_ritz)
from .operators import Resolvent, lowest_eigenpairs, resolvent_difference_norm
from .oscillator import (Line1DGrid, assemble_h_eps,
                         embedded_dirichlet_resolvent, required_points)
from .rates import RateFit, fit_rate
from .transverse import (CrossSectionSpec, build_cross_section, coupling_matrices,
                         rectangle_energies, solve_dirichlet_modes)
from .twist import make_profile, scaled_twist

log = logging.getLogger(__name__)

DEFAULT_EPSILONS = (0.4, 0.3, 0.2, 0.15, 0.1, 0.07, 0.05)
PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass(frozen=True)
class SweepConfig:
    epsilons: tuple = DEFAULT_EPSILONS
    cross_section: CrossSectionSpec = field(
        default_factory=lambda: CrossSectionSpec.rectangle(1.0, 0.5, resolution=240))
    profile_kind: str = "bump"
    profile_params: dict = field(default_factory=lambda: {"amplitude": 1.0})
    half_width: float = 12.0
    n_points: int = 1201
    n_modes: int = 6
    k2: float = -1.0
    solver_tol: float = 1e-9
    threads: int = 1
    truncation_check: bool = True
    control: bool = True

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        problems = validate_epsilons(eps)
        if problems:
            raise ValueError("; ".join(problems))
        if self.n_modes < 2:
            raise ValueError("n_modes must be at least 2")
        if self.k2 >= 0.25:
            raise ValueError("k2 must lie below the spectrum (k2 < 1/4)")


def validate_epsilons(eps):
    problems = []
    if len(eps) < 4:
        problems.append(f"need at least 4 epsilons for rate fitting, got {len(eps)}")
    if any(not (0 < e <= 1) or not math.isfinite(e) for e in eps):
        problems.append("epsilons must lie in (0, 1]")
    if len(set(eps)) != len(eps):
        problems.append("epsilons must be distinct")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        problems.append("epsilons must be strictly decreasing")
    return problems


@dataclass
class SweepRow:
    epsilon: float
    lambda0_full: float = math.nan
    lambda0_h_eps: float = math.nan
    gap1: float = math.nan
    gap2: float = math.nan
    gap3: float = math.nan
    total_gap: float = math.nan
    step_two_bound: float = math.nan
    step_two_bound_discrete: float = math.nan
    ritz_upper: float = math.nan
    ritz_bound: float = math.nan
    m_ratio: float = math.nan
    origin_amplitude: float = math.nan
    lambda0_truncation_delta: float = math.nan
    eig_residual: float = math.nan
    norm_residual: float = math.nan
    control_lambda0: float = math.nan
    control_total_gap: float = math.nan
    seconds: float = math.nan
    error: str = ""

    @property
    def ok(self):
        return not self.error


@dataclass(frozen=True)
class Verdict:
    name: str
    status: str
    margin: float
    detail: str = ""

    @property
    def passed(self):
        return self.status == PASS


@dataclass
class ConvergenceReport:
    config: SweepConfig
    rows: list
    C_omega: float
    energies: list
    n_points: int
    fits: dict = field(default_factory=dict)
    lambda_limit: float = math.nan
    verdicts: list = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def verdict(self, name):
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def all_passed(self):
        return all(v.passed for v in self.verdicts)

    def to_dict(self):
        cfg = asdict(self.config)
        cfg["cross_section"] = asdict(self.config.cross_section)
        return {
            "config": cfg,
            "C_omega": self.C_omega,
            "transverse_energies": list(self.energies),
            "n_points": self.n_points,
            "rows": [asdict(r) for r in self.rows],
            "fits": {k: asdict(v) for k, v in self.fits.items()},
            "lambda_limit": self.lambda_limit,
            "verdicts": [asdict(v) for v in self.verdicts],
        }


@dataclass(frozen=True, eq=False)
class _Setup:
    grid: Line1DGrid
    basis: MixedBasis
    basis_wide: MixedBasis | None
    profile: object
    delta_e_exact: float | None


def prepare(config):
    """Transverse modes, coupling data and the common 1D grid for a sweep."""
    cs = build_cross_section(config.cross_section)
    extra = 2 if config.truncation_check else 0
    modes = solve_dirichlet_modes(cs, config.n_modes + extra, tol=config.solver_tol)
    coupling = coupling_matrices(modes, cs)
    profile = make_profile(config.profile_kind, config.profile_params)
    n = config.n_points
    if not profile.is_zero:
        n = max(n, required_points(config.half_width, min(config.epsilons) * profile.half_width))
    grid = Line1DGrid(config.half_width, n)
    basis = MixedBasis.from_coupling(grid, coupling, config.n_modes)
    wide = MixedBasis.from_coupling(grid, coupling) if extra else None
    spec = config.cross_section
    exact = None
    if spec.kind == "rectangle":
        e = rectangle_energies(spec.a, spec.b, 2)
        exact = float(e[1] - e[0])
    return _Setup(grid, basis, wide, profile, exact)


def _compute_row(setup, config, eps):
    t_start = time.perf_counter()
    row = SweepRow(epsilon=eps)
    basis, grid = setup.basis, setup.grid
    N, dim = basis.N, basis.dimension
    k2 = config.k2
    twist = scaled_twist(setup.profile, eps)

    A = assemble_full(basis, twist)
    A0 = assemble_intermediate(basis, twist)
    h_eps = assemble_h_eps(grid, basis.C_omega, twist)

    ground = lowest_eigenpairs(A, 1, tol=config.solver_tol)
    row.lambda0_full = float(ground.values[0])
    row.lambda0_h_eps = float(lowest_eigenpairs(h_eps, 1).values[0])
    u = ground.vectors[:, 0] / math.sqrt(grid.spacing)
    row.origin_amplitude = float(abs(u[grid.zero_index]))

    RA = Resolvent(A, k2)
    RA0 = Resolvent(A0, k2)
    Rh_emb = Resolvent(h_eps, k2, support=np.arange(N), dim=dim)
    RD_emb = embedded_dirichlet_resolvent(grid, k2, offset=0, dim=dim)
    norms = [
        resolvent_difference_norm(RA, RA0, k2),
        resolvent_difference_norm(RA0, Rh_emb, k2),
        resolvent_difference_norm(Resolvent(h_eps, k2), embedded_dirichlet_resolvent(grid, k2), k2),
        resolvent_difference_norm(RA, RD_emb, k2),
    ]
    row.gap1, row.gap2, row.gap3, row.total_gap = (r.value for r in norms)
    row.norm_residual = max(r.residual for r in norms)

    de_h = float(basis.energies[1] - basis.energies[0])
    row.step_two_bound_discrete = eps**2 / de_h
    row.step_two_bound = eps**2 / (setup.delta_e_exact or de_h)
    row.ritz_upper = upper_modes_ritz(A)
    row.ritz_bound = de_h / eps**2

    F, G = probe_states(basis)
    phi, psi = RA0.apply(F), RA.apply(G)
    m = form_difference_m(basis, twist, phi, psi, check=False).value
    row.m_ratio = abs(m) / (basis.norm(F) * basis.norm(G))

    row.eig_residual = float(ground.residuals[0])
    if setup.basis_wide is not None:
        wide = lowest_eigenpairs(assemble_full(setup.basis_wide, twist), 1, tol=config.solver_tol)
        row.lambda0_truncation_delta = float(wide.values[0] - row.lambda0_full)

    if config.control:
        zero = scaled_twist(make_profile("zero"), eps)
        Az = assemble_full(basis, zero)
        row.control_lambda0 = float(lowest_eigenpairs(Az, 1, tol=config.solver_tol).values[0])
        row.control_total_gap = resolvent_difference_norm(Resolvent(Az, k2), RD_emb, k2).value
    row.seconds = time.perf_counter() - t_start
    return row


def _safe_row(setup, config, eps):
    try:
        return _compute_row(setup, config, eps)
    except (TwistLabError, ArithmeticError, ValueError, RuntimeError, MemoryError) as exc:
        log.warning("row eps=%g failed: %s", eps, exc)
        return SweepRow(epsilon=eps, error=f"{type(exc).__name__}: {exc}")


def run_sweep(config, progress=None):
    """Run every eps of the config; rows come back in config order.

    A failing row is recorded with its error message and does not stop the
    sweep. If every row fails, the first diagnostic is raised.
    """
    setup = prepare(config)
    eps_list = list(config.epsilons)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(lambda e: _safe_row(setup, config, e), eps_list))
    else:
        rows = []
        for e in eps_list:
            rows.append(_safe_row(setup, config, e))
            if progress:
                progress(rows[-1])
    if all(not r.ok for r in rows):
        raise SolverError(f"every sweep row failed; first: {rows[0].error}")
    report = ConvergenceReport(config, rows, setup.basis.C_omega,
                               [float(e) for e in setup.basis.energies], setup.grid.n_points)
    _fit(report)
    report.verdicts = bound_checks(report)
    return report


def extrapolate_limit(eps, values):
    """Value at eps = 0 of the least-squares quadratic through (eps, value)."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if eps.size < 3:
        return math.nan
    return float(np.polyfit(eps, values, 2)[-1])


def _fit(report):
    good = [r for r in report.rows if r.ok]
    eps = [r.epsilon for r in good]
    for name in ("gap1", "gap2", "gap3", "total_gap", "m_ratio", "origin_amplitude"):
        pts = [(e, getattr(r, name)) for e, r in zip(eps, good)]
        try:
            report.fits[name] = fit_rate(pts)
        except ValueError as exc:
            log.warning("no rate fit for %s: %s", name, exc)
    report.lambda_limit = extrapolate_limit(eps, [r.lambda0_full for r in good])


def _status(margin, noise):
    if not math.isfinite(margin):
        return INCONCLUSIVE
    if abs(margin) < noise:
        return INCONCLUSIVE if margin < 0 else PASS
    return PASS if margin >= 0 else FAIL


def _gap_ratio_pair(rows):
    by_eps = {r.epsilon: r for r in rows if r.ok}
    for e in sorted(by_eps):
        partner = next((p for p in by_eps if math.isclose(p, 2 * e, rel_tol=1e-9)), None)
        if partner is not None:
            return by_eps[e], by_eps[partner]
    return None


def bound_checks(report, rate_window=(0.7, 1.3), lambda_floor=0.6, limit_window=(0.70, 0.80),
                 ratio_ceiling=0.7):
    """Per-eps inequalities plus the sweep-level trend checks, each with its margin.

    Per-eps checks pass when the worst margin is at least ``-10 * solver_tol``
    and are inconclusive when solver residuals are larger than the margin.
    """
    tol = report.config.solver_tol
    slack = 10 * tol
    good = [r for r in report.rows if r.ok]
    out = []

    def per_eps(name, margins, noises, detail):
        if not margins:
            out.append(Verdict(name, INCONCLUSIVE, math.nan, "no completed rows"))
            return
        j = int(np.argmin(margins))
        m = margins[j] + slack
        status = _status(m, noises[j])
        if status == INCONCLUSIVE and m >= 0:
            status = PASS
        out.append(Verdict(name, status, float(margins[j]), detail))

    per_eps("step_two_bound",
            [r.step_two_bound - r.gap2 for r in good], [r.norm_residual for r in good],
            "gap2 <= eps^2 / (E2 - E1)")
    per_eps("positivity",
            [r.lambda0_full for r in good], [r.eig_residual for r in good],
            "smallest eigenvalue of H - E1/eps^2 + 1 is at least 1")
    per_eps("upper_modes_bound",
            [r.ritz_upper - r.ritz_bound for r in good],
            [tol * max(1.0, r.ritz_bound) for r in good],
            "Ritz value on modes n >= 2 is at least (E2 - E1)/eps^2")
    per_eps("triangle",
            [r.gap1 + r.gap2 + r.gap3 - r.total_gap for r in good],
            [r.norm_residual for r in good],
            "total gap <= gap1 + gap2 + gap3")

    lam = np.array([r.lambda0_full for r in good])
    if lam.size >= 2:
        steps = np.diff(lam)
        out.append(Verdict("lambda0_monotone", PASS if np.all(steps > 0) else FAIL,
                           float(steps.min()), "lambda0(H) increases as eps decreases"))
        final = good[-1]
        out.append(Verdict("lambda0_final", PASS if final.lambda0_full > lambda_floor else FAIL,
                           float(final.lambda0_full - lambda_floor),
                           f"lambda0 at eps={final.epsilon:g} exceeds {lambda_floor}"))
    lim = report.lambda_limit
    lo, hi = limit_window
    out.append(Verdict("lambda0_limit", PASS if lo <= lim <= hi else FAIL,
                       float(min(lim - lo, hi - lim)) if math.isfinite(lim) else math.nan,
                       f"quadratic-fit limit {lim:.6g} in [{lo}, {hi}]"))

    fit = report.fits.get("gap1")
    if fit is None:
        out.append(Verdict("gap1_rate", INCONCLUSIVE, math.nan, "no fit"))
    else:
        lo, hi = rate_window
        out.append(Verdict("gap1_rate", PASS if lo <= fit.exponent <= hi else FAIL,
                           float(min(fit.exponent - lo, hi - fit.exponent)),
                           f"fitted exponent {fit.exponent:.4f} in [{lo}, {hi}]"))

    pair = _gap_ratio_pair(report.rows)
    if pair is None:
        out.append(Verdict("gap3_ratio", INCONCLUSIVE, math.nan, "no (eps, 2 eps) pair"))
    else:
        small, big = pair
        ratio = small.gap3 / big.gap3
        out.append(Verdict("gap3_ratio", PASS if ratio <= ratio_ceiling else FAIL,
                           float(ratio_ceiling - ratio),
                           f"gap3({small.epsilon:g}) / gap3({big.epsilon:g}) = {ratio:.4f}"))
    return out


def control_contrast(report):
    """Untwisted control rows: lambda0 stays at 1/4 while the twisted branch rises."""
    good = [r for r in report.rows if r.ok and math.isfinite(r.control_lambda0)]
    return [(r.epsilon, r.control_lambda0, r.lambda0_full, r.control_total_gap, r.total_gap)
            for r in good]


__all__ = [
    "SweepConfig", "SweepRow", "Verdict", "ConvergenceReport", "RateFit", "run_sweep",
    "fit_rate", "bound_checks", "extrapolate_limit", "control_contrast", "prepare",
    "DEFAULT_EPSILONS", "PASS", "FAIL", "INCONCLUSIVE",
]
