"""Compactly supported twist velocities and their singular rescalings."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from ._validation import check_positive

KINDS = ("bump", "spline", "zero")


@dataclass(frozen=True, eq=False)
class TwistProfile:
    """Twist velocity theta'(x) supported on [-s, s].

    ``dtheta`` and ``ddtheta`` accept scalars or arrays and vanish outside the
    support. ``total_twist`` is the integral of ``dtheta`` over the line.
    """

    kind: str
    params: dict
    half_width: float
    dtheta: Callable = field(repr=False)
    ddtheta: Callable = field(repr=False)
    total_twist: float = 0.0
    l2_norm_sq: float = 0.0
    breakpoints: tuple = ()

    @property
    def support(self):
        return (-self.half_width, self.half_width)

    @property
    def is_zero(self):
        return self.kind == "zero"


@dataclass(frozen=True, eq=False)
class ScaledTwist:
    """sigma_eps(x) = theta'(x / eps) / eps."""

    profile: TwistProfile
    epsilon: float

    def values(self, x):
        e = self.epsilon
        return self.profile.dtheta(np.asarray(x, dtype=float) / e) / e

    def derivative(self, x):
        e = self.epsilon
        return self.profile.ddtheta(np.asarray(x, dtype=float) / e) / e**2

    @property
    def support(self):
        s = self.epsilon * self.profile.half_width
        return (-s, s)

    @property
    def integral(self):
        return self.profile.total_twist

    @property
    def l2_norm_sq(self):
        return self.profile.l2_norm_sq / self.epsilon


def _bump(amplitude, s):
    def dtheta(x):
        u = np.asarray(x, dtype=float) / s
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        out[inside] = amplitude * np.exp(-1.0 / (1.0 - u[inside] ** 2))
        return out if out.ndim else float(out)

    def ddtheta(x):
        u = np.asarray(x, dtype=float) / s
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        ui = u[inside]
        q = 1.0 - ui**2
        out[inside] = amplitude * np.exp(-1.0 / q) * (-2.0 * ui / q**2) / s
        return out if out.ndim else float(out)

    return dtheta, ddtheta


def _spline(knots, values):
    knots = np.asarray(knots, dtype=float)
    values = np.asarray(values, dtype=float)
    if knots.ndim != 1 or knots.shape != values.shape or knots.size < 3:
        raise ValueError("spline needs matching 1D knots and values with at least 3 entries")
    if not (np.all(np.isfinite(knots)) and np.all(np.isfinite(values))):
        raise ValueError("spline knots and values must be finite")
    if np.any(np.diff(knots) <= 0):
        raise ValueError("spline knots must be strictly increasing (repeated knots make theta'' unbounded)")
    if not np.isclose(knots[0], -knots[-1], rtol=1e-12, atol=1e-14):
        raise ValueError("spline support must be symmetric, [-s, s]")
    if values[0] != 0.0 or values[-1] != 0.0:
        raise ValueError("spline must vanish at both end knots, otherwise theta' jumps and theta'' is unbounded")
    cs = CubicSpline(knots, values, bc_type="clamped")
    d1 = cs.derivative()
    lo, hi = knots[0], knots[-1]

    def dtheta(x):
        x = np.asarray(x, dtype=float)
        out = np.where((x > lo) & (x < hi), cs(np.clip(x, lo, hi)), 0.0)
        return out if out.ndim else float(out)

    def ddtheta(x):
        x = np.asarray(x, dtype=float)
        out = np.where((x > lo) & (x < hi), d1(np.clip(x, lo, hi)), 0.0)
        return out if out.ndim else float(out)

    # The second derivative of a clamped cubic spline is piecewise linear, so
    # its extreme values sit at the knots.
    d2 = cs.derivative(2)(knots)
    if not np.all(np.isfinite(d2)):
        raise ValueError("spline produces an unbounded theta''")
    return cs, dtheta, ddtheta


def make_profile(kind, params=None):
    """Build a twist profile.

    Parameters
    ----------
    kind : {"bump", "spline", "zero"}
    params : dict
        bump: ``amplitude`` (A, default 1) and ``half_width`` (s, default 1),
        giving ``A * exp(-1 / (1 - (x/s)^2))`` on ``|x| < s``.
        spline: ``knots`` (strictly increasing, symmetric) and ``values``
        (zero at both ends); the spline is clamped so theta' is C^1 on the line.
        zero: ``half_width`` optional.
    """
    params = dict(params or {})
    if kind == "bump":
        unknown = set(params) - {"amplitude", "half_width"}
        if unknown:
            raise ValueError(f"unknown bump parameters: {sorted(unknown)}")
        amp = float(params.get("amplitude", 1.0))
        if not np.isfinite(amp):
            raise ValueError("bump amplitude must be finite")
        s = check_positive("half_width", params.get("half_width", 1.0))
        dtheta, ddtheta = _bump(amp, s)
        total = quad(dtheta, -s, s, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        l2 = quad(lambda x: dtheta(x) ** 2, -s, s, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        return TwistProfile("bump", {"amplitude": amp, "half_width": s}, s, dtheta, ddtheta,
                            total, l2, (-s, s))
    if kind == "spline":
        unknown = set(params) - {"knots", "values"}
        if unknown:
            raise ValueError(f"unknown spline parameters: {sorted(unknown)}")
        if "knots" not in params or "values" not in params:
            raise ValueError("spline profile needs 'knots' and 'values'")
        cs, dtheta, ddtheta = _spline(params["knots"], params["values"])
        knots = cs.x
        total = float(cs.integrate(knots[0], knots[-1]))
        l2 = sum(quad(lambda x: float(cs(x)) ** 2, a, b, epsabs=1e-15, epsrel=1e-13)[0]
                 for a, b in zip(knots[:-1], knots[1:]))
        return TwistProfile("spline", {"knots": list(map(float, knots)),
                                       "values": list(map(float, cs(knots)))},
                            float(knots[-1]), dtheta, ddtheta, total, l2, tuple(knots))
    if kind == "zero":
        unknown = set(params) - {"half_width"}
        if unknown:
            raise ValueError(f"unknown zero-profile parameters: {sorted(unknown)}")
        s = check_positive("half_width", params.get("half_width", 1.0))

        def nil(x):
            out = np.zeros_like(np.asarray(x, dtype=float))
            return out if out.ndim else 0.0

        return TwistProfile("zero", {"half_width": s}, s, nil, nil, 0.0, 0.0, (-s, s))
    raise ValueError(f"unknown profile kind {kind!r}; expected one of {KINDS}")


def scaled_twist(profile, epsilon):
    epsilon = check_positive("epsilon", epsilon)
    return ScaledTwist(profile, epsilon)


def write_scaled_csv(path, scaled, n_samples=401):
    lo, hi = scaled.support
    pad = 0.1 * (hi - lo)
    x = np.linspace(lo - pad, hi + pad, n_samples)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "sigma"])
        for xi, vi in zip(x, scaled.values(x)):
            writer.writerow([f"{xi:.17g}", f"{vi:.17g}"])
