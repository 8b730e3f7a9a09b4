"""Run configuration: a YAML document validated into a :class:`RunConfig`.

Schema (every key optional; defaults shown)::

    cross_section:
      kind: rectangle          # or polygon
      a: 1.0
      b: 0.5
      vertices: [[x, y], ...]  # polygon only
      resolution: 240          # lattice points per unit length
      axis_offset: [0.0, 0.0]  # rotation axis relative to the centroid
      allow_square: false
    twist:
      kind: bump               # bump | spline | zero
      params: {amplitude: 1.0, half_width: 1.0}
    grid:
      half_width: 12.0
      n_points: 1201
    modes: 6
    epsilons: [0.4, 0.3, 0.2, 0.15, 0.1, 0.07, 0.05]
    shift: -1.0                # k^2
    tolerances:
      solver: 1.0e-9
      quadrature: 1.0e-8
    krein:
      quadrature_nodes: 400
    threads: 1
    truncation_check: true
    control: true
    output: out
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field

import yaml

from .convergence import DEFAULT_EPSILONS, SweepConfig, validate_epsilons
from .exceptions import ConfigError, GeometryError
from .transverse import CrossSectionSpec
from .twist import make_profile

_TOP_KEYS = {"cross_section", "twist", "grid", "modes", "epsilons", "shift", "tolerances",
             "krein", "threads", "truncation_check", "control", "output"}
_CS_KEYS = {"kind", "a", "b", "vertices", "resolution", "axis_offset", "allow_square"}
_TWIST_KEYS = {"kind", "params"}
_GRID_KEYS = {"half_width", "n_points"}
_TOL_KEYS = {"solver", "quadrature"}
_KREIN_KEYS = {"quadrature_nodes"}


@dataclass(frozen=True)
class RunConfig:
    cross_section: CrossSectionSpec = field(
        default_factory=lambda: CrossSectionSpec.rectangle(1.0, 0.5, resolution=240))
    twist_kind: str = "bump"
    twist_params: dict = field(default_factory=lambda: {"amplitude": 1.0})
    half_width: float = 12.0
    n_points: int = 1201
    modes: int = 6
    epsilons: tuple = DEFAULT_EPSILONS
    k2: float = -1.0
    solver_tol: float = 1e-9
    quadrature_tol: float = 1e-8
    quadrature_nodes: int = 400
    threads: int = 1
    truncation_check: bool = True
    control: bool = True
    output: str = "out"

    def sweep_config(self, threads=None):
        return SweepConfig(epsilons=self.epsilons, cross_section=self.cross_section,
                           profile_kind=self.twist_kind, profile_params=dict(self.twist_params),
                           half_width=self.half_width, n_points=self.n_points,
                           n_modes=self.modes, k2=self.k2, solver_tol=self.solver_tol,
                           threads=self.threads if threads is None else threads,
                           truncation_check=self.truncation_check, control=self.control)

    def profile(self):
        return make_profile(self.twist_kind, self.twist_params)


class _Collector:
    def __init__(self):
        self.problems = []

    def section(self, data, name, allowed):
        if data is None:
            return {}
        if not isinstance(data, dict):
            self.problems.append(f"{name}: expected a mapping, got {type(data).__name__}")
            return {}
        for key in sorted(set(data) - allowed, key=str):
            self.problems.append(f"{name}: unknown key {key!r}")
        return data

    def number(self, data, key, default, where, *, integer=False, positive=False, nonneg=False):
        if key not in data:
            return default
        raw = data[key]
        value = raw
        if isinstance(raw, str):
            # YAML 1.1 reads '1e-9' as a string.
            try:
                value = float(raw)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, numbers.Real):
            self.problems.append(f"{where}.{key}: expected a number, got {raw!r}")
            return default
        if not math.isfinite(value):
            self.problems.append(f"{where}.{key}: must be finite")
            return default
        if integer:
            if float(value) != int(value):
                self.problems.append(f"{where}.{key}: expected an integer, got {raw!r}")
                return default
            value = int(value)
        if positive and value <= 0:
            self.problems.append(f"{where}.{key}: must be > 0, got {value}")
        if nonneg and value < 0:
            self.problems.append(f"{where}.{key}: must be >= 0, got {value}")
        return value

    def boolean(self, data, key, default, where):
        if key not in data:
            return default
        if not isinstance(data[key], bool):
            self.problems.append(f"{where}.{key}: expected true/false, got {data[key]!r}")
            return default
        return data[key]


def parse_config(text, override_square=False):
    """Validate a YAML config document; every violation is reported together.

    Raises
    ------
    ConfigError
        With ``violations`` listing each problem found.
    """
    try:
        doc = yaml.safe_load(text) if text and text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError([f"not valid YAML: {exc}"]) from exc
    col = _Collector()
    doc = col.section(doc if doc is not None else {}, "config", _TOP_KEYS)

    cs = col.section(doc.get("cross_section"), "cross_section", _CS_KEYS)
    kind = cs.get("kind", "rectangle")
    res = col.number(cs, "resolution", 240, "cross_section", integer=True, positive=True)
    offset = cs.get("axis_offset", [0.0, 0.0])
    if (not isinstance(offset, (list, tuple)) or len(offset) != 2
            or not all(isinstance(v, numbers.Real) and not isinstance(v, bool) for v in offset)):
        col.problems.append(f"cross_section.axis_offset: expected two numbers, got {offset!r}")
        offset = [0.0, 0.0]
    allow_square = col.boolean(cs, "allow_square", False, "cross_section") or override_square
    spec = None
    try:
        if kind == "rectangle":
            if "vertices" in cs:
                col.problems.append("cross_section.vertices: only valid for kind 'polygon'")
            a = col.number(cs, "a", 1.0, "cross_section", positive=True)
            b = col.number(cs, "b", 0.5, "cross_section", positive=True)
            if a > 0 and b > 0:
                spec = CrossSectionSpec.rectangle(a, b, resolution=res, allow_square=allow_square,
                                                  axis_offset=tuple(map(float, offset)))
        elif kind == "polygon":
            verts = cs.get("vertices")
            if not isinstance(verts, list) or not all(
                    isinstance(v, (list, tuple)) and len(v) == 2 for v in verts):
                col.problems.append("cross_section.vertices: expected a list of [x, y] pairs")
            else:
                spec = CrossSectionSpec.polygon(verts, resolution=res,
                                                axis_offset=tuple(map(float, offset)))
        else:
            col.problems.append(f"cross_section.kind: expected 'rectangle' or 'polygon', got {kind!r}")
    except (GeometryError, ValueError, TypeError) as exc:
        col.problems.append(f"cross_section: {exc}")

    tw = col.section(doc.get("twist"), "twist", _TWIST_KEYS)
    twist_kind = tw.get("kind", "bump")
    twist_params = tw.get("params", {"amplitude": 1.0} if twist_kind == "bump" else {})
    if not isinstance(twist_params, dict):
        col.problems.append("twist.params: expected a mapping")
        twist_params = {}
    try:
        make_profile(twist_kind, twist_params)
    except (ValueError, TypeError) as exc:
        col.problems.append(f"twist: {exc}")

    grid = col.section(doc.get("grid"), "grid", _GRID_KEYS)
    half_width = col.number(grid, "half_width", 12.0, "grid", positive=True)
    n_points = col.number(grid, "n_points", 1201, "grid", integer=True, positive=True)
    if isinstance(n_points, int) and (n_points % 2 == 0 or n_points < 5):
        col.problems.append(f"grid.n_points: must be odd and >= 5 so x = 0 is a node, got {n_points}")

    modes = col.number(doc, "modes", 6, "config", integer=True)
    if modes < 2:
        col.problems.append(f"config.modes: need at least 2 transverse modes, got {modes}")

    eps = doc.get("epsilons", list(DEFAULT_EPSILONS))
    if not isinstance(eps, list) or not all(
            isinstance(e, numbers.Real) and not isinstance(e, bool) for e in eps):
        col.problems.append(f"config.epsilons: expected a list of numbers, got {eps!r}")
        eps = list(DEFAULT_EPSILONS)
    else:
        col.problems.extend(f"config.epsilons: {p}" for p in validate_epsilons(tuple(eps)))

    k2 = col.number(doc, "shift", -1.0, "config")
    if k2 >= 0.25:
        col.problems.append(f"config.shift: k^2 = {k2} must lie below the spectrum (< 0.25)")

    tol = col.section(doc.get("tolerances"), "tolerances", _TOL_KEYS)
    solver_tol = col.number(tol, "solver", 1e-9, "tolerances", positive=True)
    quad_tol = col.number(tol, "quadrature", 1e-8, "tolerances", positive=True)
    kr = col.section(doc.get("krein"), "krein", _KREIN_KEYS)
    quad_nodes = col.number(kr, "quadrature_nodes", 400, "krein", integer=True)
    if quad_nodes < 3:
        col.problems.append("krein.quadrature_nodes: need at least 3")
    threads = col.number(doc, "threads", 1, "config", integer=True, positive=True)
    trunc = col.boolean(doc, "truncation_check", True, "config")
    control = col.boolean(doc, "control", True, "config")
    output = doc.get("output", "out")
    if not isinstance(output, str) or not output:
        col.problems.append("config.output: expected a directory path")

    if col.problems:
        raise ConfigError(col.problems)
    return RunConfig(cross_section=spec, twist_kind=twist_kind, twist_params=dict(twist_params),
                     half_width=float(half_width), n_points=n_points, modes=modes,
                     epsilons=tuple(float(e) for e in eps), k2=float(k2),
                     solver_tol=float(solver_tol), quadrature_tol=float(quad_tol),
                     quadrature_nodes=quad_nodes, threads=threads, truncation_check=trunc,
                     control=control, output=output)
