"""Birman-Schwinger kernel of the concentrated twist potential and its small-eps expansion.

Writing ``C_omega sigma_eps^2 = eps^-2 V(x / eps)`` with ``V = C_omega theta'^2``,
the perturbation lives on ``eps * supp(theta')``. On the unscaled support we
use a uniform trapezoid rule with nodes ``y_j`` and weights ``w_j`` and the
symmetric weights ``s_j = sqrt(w_j V(y_j))``. The kernel matrix

    K_jk = s_j R0(eps y_j, eps y_k) s_k

tends to ``a * s s^T`` as eps -> 0 with ``a = R0(0, 0)``, and its next term is
``eps * M1`` with ``M1_jk = b s_j |y_j - y_k| s_k`` where ``b = -1/2`` is the
one-sided slope of ``R0(x, 0)`` at the origin (the unit jump of its derivative).
Hence ``T = (1 + K)^-1 = t0 + eps t1 + O(eps^2)`` with

    t0 = (1 + c P)^-1 = Q + P / (1 + c),     t1 = -t0 M1 t0,

``P = s s^T / |s|^2``, ``Q = 1 - P`` and ``c = a |s|^2 = a ||V||_1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_positive
from .exceptions import SolverError
from .oscillator import Line1DGrid, oscillator_green
from .rates import fit_rate

# Slope of x -> R0(x, 0) at 0+: half the unit jump of the derivative.
SLOPE_B = -0.5
DEFAULT_QUAD_NODES = 400


@dataclass(frozen=True)
class LocalExpansion:
    """``R0(x, y) = a + b |x - y| + O(x^2 + y^2)`` near the origin."""

    a: float
    b: float
    b_left: float
    slope_samples: tuple[float, float, float]
    patch: float
    model_residual: float


def local_green_expansion(g, patch=0.1, tol=1e-3):
    """Extract ``a`` and ``b`` from a grid Green kernel of h0.

    ``b`` comes from one-sided difference quotients on x > 0 at spacings
    h, 2h and 4h, combined by two Richardson steps (the quotient error is a
    power series in the spacing). ``b_left`` is the derivative at 0- obtained
    the same way from x < 0; evenness of the kernel makes it ``-b``.

    Raises
    ------
    SolverError
        If the three quotients do not approach a limit (successive differences
        fail to shrink, or the extrapolation moves more than ``tol``).
    """
    if g.tag != "h0":
        raise ValueError("local_green_expansion needs an h0 kernel")
    x = g.nodes
    h = x[1] - x[0]
    z = int(np.argmin(np.abs(x)))
    R = g.values
    a = float(R[z, z])

    def quotients(direction):
        return np.array([(R[z + direction * m, z] - a) / (direction * m * h) for m in (1, 2, 4)])

    right = quotients(1)
    left = quotients(-1)

    def extrapolate(q):
        r1 = 2 * q[0] - q[1]
        r2 = 2 * q[1] - q[2]
        return (4 * r1 - r2) / 3, r1

    b, r1 = extrapolate(right)
    b_left, _ = extrapolate(left)
    d1, d2 = abs(right[0] - right[1]), abs(right[1] - right[2])
    if not np.isfinite(b) or (d1 > d2 and d1 > 1e-12) or abs(b - r1) > tol:
        raise SolverError("slope extrapolation did not converge", residuals=tuple(right))

    near = np.nonzero(np.abs(x) <= patch * (1 + 1e-12))[0]
    xx, yy = np.meshgrid(x[near], x[near], indexing="ij")
    model = a + b * np.abs(xx - yy)
    residual = float(np.max(np.abs(R[np.ix_(near, near)] - model)))
    return LocalExpansion(a, float(b), float(b_left), tuple(map(float, right)), patch, residual)


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray


def support_quadrature(profile, n_nodes=DEFAULT_QUAD_NODES):
    """Uniform trapezoid rule on the support of the profile."""
    n_nodes = check_int("n_nodes", n_nodes, minimum=3)
    lo, hi = profile.support
    y = np.linspace(lo, hi, n_nodes)
    w = np.full(n_nodes, y[1] - y[0])
    w[[0, -1]] *= 0.5
    return Quadrature(y, w)


@dataclass(frozen=True, eq=False)
class BSKernelData:
    """Birman-Schwinger data at one eps, all in the symmetric ``s``-weighted basis."""

    epsilon: float
    k2: float
    nodes: np.ndarray
    weights: np.ndarray
    V: np.ndarray
    sqrtV: np.ndarray
    s: np.ndarray
    K: np.ndarray
    T: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    a: float
    b: float
    c: float
    M1: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    condition: float

    def t0_as_printed(self):
        """``Q + P / c``: the variant that drops the identity inside ``(1 + cP)^-1``."""
        if self.c == 0:
            raise ZeroDivisionError("c = 0 for a vanishing potential")
        return self.Q + self.P / self.c

    def neumann(self, order):
        """``t0 * sum_{j<=order} (-eps M1 t0)^j``, the series form of T."""
        step = -self.epsilon * self.M1 @ self.t0
        term = np.eye(len(self.s))
        total = term.copy()
        for _ in range(order):
            term = term @ step
            total = total + term
        return self.t0 @ total


def birman_schwinger(profile, C_omega, epsilon, k2=-1.0, n_nodes=DEFAULT_QUAD_NODES, a=None,
                     b=SLOPE_B):
    """Assemble ``T = (1 + K)^-1`` and the expansion terms ``t0``, ``t1``.

    ``a`` defaults to the exact ``R0(0, 0, k2)``.
    """
    epsilon = check_positive("epsilon", epsilon)
    C_omega = check_positive("C_omega", C_omega, allow_zero=True)
    quad = support_quadrature(profile, n_nodes)
    y, w = quad.nodes, quad.weights
    V = C_omega * profile.dtheta(y) ** 2
    s = np.sqrt(w * V)
    a = float(oscillator_green(0.0, 0.0, k2)) if a is None else float(a)
    n = y.size
    eye = np.eye(n)
    K = np.outer(s, s) * oscillator_green(epsilon * y[:, None], epsilon * y[None, :], k2)
    K = 0.5 * (K + K.T)
    A = eye + K
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > 1e12:
        raise SolverError(f"1 + K is singular (condition {cond:.3e})")
    T = np.linalg.solve(A, eye)
    T = 0.5 * (T + T.T)
    norm_sq = float(s @ s)
    if norm_sq == 0.0:
        P = np.zeros((n, n))
    else:
        P = np.outer(s, s) / norm_sq
    Q = eye - P
    c = a * norm_sq
    M1 = b * np.outer(s, s) * np.abs(y[:, None] - y[None, :])
    t0 = Q + P / (1.0 + c)
    t1 = -t0 @ M1 @ t0
    return BSKernelData(epsilon, float(k2), y, w, V, np.sqrt(V), s, K, T, P, Q, a, float(b),
                        float(c), M1, t0, t1, cond)


@dataclass(frozen=True)
class ExpansionTable:
    epsilons: np.ndarray
    residual0: np.ndarray
    residual1: np.ndarray
    slope0: float
    slope1: float


def expansion_residuals(data):
    """Spectral-norm residuals ``||T - t0||`` and ``||T - t0 - eps t1||`` with fitted slopes."""
    data = list(data)
    if len(data) < 3:
        raise ValueError("need at least three eps values")
    eps = np.array([d.epsilon for d in data])
    r0 = np.array([np.linalg.norm(d.T - d.t0, 2) for d in data])
    r1 = np.array([np.linalg.norm(d.T - d.t0 - d.epsilon * d.t1, 2) for d in data])
    return ExpansionTable(eps, r0, r1, fit_rate(zip(eps, r0)).exponent,
                          fit_rate(zip(eps, r1)).exponent)


def dilated_kernel(x, y, epsilon, k2=-1.0):
    """Kernel of ``U_eps R0 U_eps^*`` with ``(U_eps f)(x) = sqrt(eps) f(eps x)``.

    Equal to ``eps * R0(eps x, eps y)``; the factor eps comes from the two
    half-powers of the unitary dilation and the Jacobian of the substitution.
    """
    return epsilon * oscillator_green(epsilon * np.asarray(x), epsilon * np.asarray(y), k2)


def perturbed_green(profile, C_omega, epsilon, x, k2=-1.0, n_nodes=DEFAULT_QUAD_NODES):
    """Green function of ``h_eps - k2`` on points ``x`` via the resolvent identity.

    ``R = R0 - R0 v (1 + v R0 v)^-1 v R0`` with ``v = eps^-1 sqrt(V(./eps))``.
    In the ``s`` basis ``v R0 v`` becomes ``K / eps``, so this route is
    independent of any finite-difference grid and serves as a cross-check.
    """
    bs = birman_schwinger(profile, C_omega, epsilon, k2, n_nodes)
    x = np.asarray(x, dtype=float)
    inner = np.eye(bs.s.size) + bs.K / epsilon
    coupling = oscillator_green(x[:, None], epsilon * bs.nodes[None, :], k2) * (
        bs.s / np.sqrt(epsilon))
    correction = coupling @ np.linalg.solve(inner, coupling.T)
    return oscillator_green(x[:, None], x[None, :], k2) - correction


@dataclass(frozen=True)
class TraceLimitRow:
    epsilon: float
    rank_one: float
    weighted: float
    transverse: float


@dataclass(frozen=True)
class TraceLimits:
    rows: tuple[TraceLimitRow, ...]
    orders: dict


def _signed_lowrank_norm(U, signs, h):
    # ||U diag(signs) U^T|| as an operator on L^2 with node weight h.
    Qm, Rm = np.linalg.qr(U)
    return float(h * np.max(np.abs(np.linalg.eigvalsh(Rm @ (signs[:, None] * Rm.T)))))


def trace_limits(profile, C_omega, epsilons, k2=-1.0, grid=None, n_nodes=DEFAULT_QUAD_NODES):
    """Collapse of the dilated potential onto the trace at x = 0.

    With unit-mass weights ``p_j = w_j V_j / ||V||_1`` and
    ``Phi[i, j] = R0(x_i, eps y_j)``, ``phi0 = R0(x, 0)``, each row reports

    * rank_one: ``||phi_eps phi_eps^T - phi0 phi0^T||`` with ``phi_eps = Phi p``,
    * weighted: ``||Phi diag(p) Phi^T - phi0 phi0^T||``,
    * transverse: ``||Phi diag(sqrt p) (1 - P)||``, the part of the potential
      orthogonal to its own profile.

    All three vanish as eps -> 0; fitted log-log orders are in ``orders``.
    """
    grid = Line1DGrid() if grid is None else grid
    x = grid.interior
    h = grid.spacing
    quad = support_quadrature(profile, n_nodes)
    y, w = quad.nodes, quad.weights
    mass = C_omega * w * profile.dtheta(y) ** 2
    if mass.sum() <= 0:
        raise ValueError("trace_limits needs a nonzero twist profile")
    p = mass / mass.sum()
    sp_ = np.sqrt(p)
    proj = np.eye(y.size) - np.outer(sp_, sp_) / (sp_ @ sp_)
    phi0 = oscillator_green(x, 0.0, k2)
    rows = []
    for eps in epsilons:
        Phi = oscillator_green(x[:, None], eps * y[None, :], k2)
        phi = Phi @ p
        r1 = _signed_lowrank_norm(np.column_stack([phi, phi0]), np.array([1.0, -1.0]), h)
        U = np.column_stack([Phi * sp_, phi0])
        signs = np.ones(U.shape[1])
        signs[-1] = -1.0
        r2 = _signed_lowrank_norm(U, signs, h)
        r3 = float(np.sqrt(h) * np.linalg.norm((Phi * sp_) @ proj, 2))
        rows.append(TraceLimitRow(float(eps), r1, r2, r3))
    orders = {}
    if len(rows) >= 3:
        for key in ("rank_one", "weighted", "transverse"):
            orders[key] = fit_rate((r.epsilon, getattr(r, key)) for r in rows).exponent
    return TraceLimits(tuple(rows), orders)
