"""The one-dimensional oscillator h0 = -d^2/dx^2 + x^2/16 and its relatives.

Three operators live on a uniform grid of [-L, L] with Dirichlet ends:

* ``h0``: second differences plus the harmonic potential,
* ``h0D``: the same with the node at x = 0 removed (u(0) = 0 imposed),
* ``h_eps``: ``h0`` plus the twist potential ``C_omega * sigma_eps(x)^2``.

Substituting x = 2y maps h0 to (-d^2/dy^2 + y^2)/4, hence the exact ladder
``lambda_n = ALPHA * (n + 1/2)`` with level spacing ``ALPHA = 1/2`` and Hermite-function
eigenvectors in the variable x/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.special import pbdv

from ._validation import check_int, check_positive
from .exceptions import ResolutionError
from .operators import (OperatorMatrix, Resolvent, lowest_eigenpairs,
                        resolvent_difference_norm)

ALPHA = 0.5
DEFAULT_HALF_WIDTH = 12.0
DEFAULT_POINTS = 1201
# Nodes required strictly inside the support of sigma_eps.
MIN_SUPPORT_NODES = 20


@dataclass(frozen=True)
class Line1DGrid:
    """Uniform grid on [-L, L] with an odd number of points (so 0 is a node).

    The operators act on the ``n_points - 2`` interior nodes.
    """

    half_width: float = DEFAULT_HALF_WIDTH
    n_points: int = DEFAULT_POINTS

    def __post_init__(self):
        check_positive("half_width", self.half_width)
        check_int("n_points", self.n_points, minimum=5)
        if self.n_points % 2 == 0:
            raise ValueError(f"n_points must be odd so that x = 0 is a node, got {self.n_points}")

    @property
    def spacing(self):
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def nodes(self):
        """All grid points including the Dirichlet ends."""
        return self.spacing * (np.arange(self.n_points) - (self.n_points - 1) // 2)

    @property
    def interior(self):
        return self.nodes[1:-1]

    @property
    def size(self):
        return self.n_points - 2

    @property
    def zero_index(self):
        """Position of x = 0 among the interior nodes."""
        return (self.n_points - 3) // 2

    def coarsened(self):
        """Grid with twice the spacing and the same x = 0 node."""
        if (self.n_points - 1) % 4:
            raise ValueError("coarsening needs n_points - 1 divisible by 4")
        return Line1DGrid(self.half_width, (self.n_points + 1) // 2)

    def nodes_inside(self, a):
        """Number of nodes strictly inside (-a, a)."""
        x = self.interior
        return int(np.count_nonzero(np.abs(x) < a * (1.0 - 1e-12)))


def required_points(half_width, support_half_width, min_inside=MIN_SUPPORT_NODES):
    """Smallest odd n_points with at least ``min_inside`` nodes inside (-a, a)."""
    a = check_positive("support_half_width", support_half_width)
    m = 2 * max(2, int(np.floor(10.0 * half_width / a)))
    while Line1DGrid(half_width, m + 1).nodes_inside(a) < min_inside:
        m += 2
    # Step back while a smaller grid still qualifies (guards the float floor).
    while m > 4 and Line1DGrid(half_width, m - 1).nodes_inside(a) >= min_inside:
        m -= 2
    return m + 1


def _kinetic(n, h):
    main = np.full(n, 2.0 / h**2)
    off = np.full(n - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def assemble_h0(grid):
    x = grid.interior
    mat = _kinetic(grid.size, grid.spacing) + sp.diags(x**2 / 16.0, format="csr")
    return OperatorMatrix(mat.tocsr(), "h0", basis=grid)


def assemble_h0_dirichlet(grid):
    full = assemble_h0(grid).matrix
    keep = np.delete(np.arange(grid.size), grid.zero_index)
    mat = full[keep][:, keep]
    return OperatorMatrix(mat.tocsr(), "h0D", basis=grid, meta={"kept": keep})


def check_resolution(grid, twist):
    lo, hi = twist.support
    a = hi
    count = grid.nodes_inside(a)
    if count < MIN_SUPPORT_NODES:
        need = required_points(grid.half_width, a)
        raise ResolutionError(
            f"{count} nodes inside the twist support (-{a:.4g}, {a:.4g}); need "
            f"{MIN_SUPPORT_NODES}, i.e. n_points >= {need}", min_points=need)


def twist_potential(grid, C_omega, twist):
    """``C_omega * sigma_eps^2`` sampled on the interior nodes."""
    return C_omega * twist.values(grid.interior) ** 2


def assemble_h_eps(grid, C_omega, twist):
    C_omega = check_positive("C_omega", C_omega, allow_zero=True)
    if not twist.profile.is_zero:
        check_resolution(grid, twist)
    base = assemble_h0(grid).matrix
    mat = base + sp.diags(twist_potential(grid, C_omega, twist), format="csr")
    return OperatorMatrix(mat.tocsr(), "h_eps", basis=grid,
                          meta={"epsilon": twist.epsilon, "C_omega": C_omega})


@dataclass(frozen=True, eq=False)
class OscillatorEigensystem:
    """Eigenvalues and grid eigenfunctions normalized by ``h * sum(psi^2) = 1``.

    Eigenfunctions of ``h0D`` are returned on the full interior grid with the
    constrained node set to zero.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    residuals: np.ndarray
    nodes: np.ndarray


def _expand(op, grid, vecs):
    if op.tag != "h0D":
        return vecs
    out = np.zeros((grid.size, vecs.shape[1]))
    out[op.meta["kept"]] = vecs
    return out


def spectrum(op, count=4):
    grid = op.basis
    pairs = lowest_eigenpairs(op, count)
    vecs = _expand(op, grid, pairs.vectors) / np.sqrt(grid.spacing)
    # Sign: positive on the right tail, matching the Hermite functions.
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        big = np.nonzero(np.abs(v) > 1e-3 * np.abs(v).max())[0]
        if v[big[-1]] < 0:
            vecs[:, j] = -v
    return OscillatorEigensystem(pairs.values, vecs, pairs.residuals, grid.interior)


def extrapolated_eigenvalues(grid, count=3, dirichlet=False):
    """Richardson-extrapolated eigenvalues from ``grid`` and its coarsening.

    The three-point stencil has an h^2 leading error, so
    ``(4 * lam_h - lam_2h) / 3`` removes it. Returns ``(raw, extrapolated)``.
    """
    build = assemble_h0_dirichlet if dirichlet else assemble_h0
    fine = lowest_eigenpairs(build(grid), count).values
    coarse = lowest_eigenpairs(build(grid.coarsened()), count).values
    return fine, (4.0 * fine - coarse) / 3.0


def hermite_function(n, x):
    """Normalized eigenfunction of h0: ``psi_n(x) = phi_n(x/2) / sqrt(2)``.

    ``phi_n`` is the n-th Hermite function, evaluated by its stable three-term
    recurrence. Equivalent closed form:
    ``2^{-1/2} pi^{-1/4} (2^n n!)^{-1/2} exp(-x^2/8) H_n(x/2)``.
    """
    n = check_int("n", n, minimum=0)
    y = np.asarray(x, dtype=float) / 2.0
    prev = np.zeros_like(y)
    cur = np.pi**-0.25 * np.exp(-0.5 * y**2)
    for j in range(n):
        prev, cur = cur, math.sqrt(2.0 / (j + 1)) * y * cur - math.sqrt(j / (j + 1)) * prev
    return cur / math.sqrt(2.0)


def oscillator_green(x, y, k2=-1.0):
    """Exact Green function of ``h0 - k2`` on the whole line.

    Built from parabolic cylinder functions: ``u+(x) = D_nu(x / sqrt 2)``
    decays at +inf, ``u-(x) = D_nu(-x / sqrt 2)`` at -inf, ``nu = 2 k2 - 1/2``,
    and ``R = u-(min) u+(max) / W`` with the constant Wronskian
    ``W = -sqrt(2) D_nu(0) D_nu'(0)``.
    """
    nu = 2.0 * float(k2) - 0.5
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    d0, dp0 = pbdv(nu, 0.0)
    w = -math.sqrt(2.0) * d0 * dp0
    if not np.isfinite(w) or w == 0:
        raise ValueError(f"k2 = {k2} lies in the spectrum of h0")
    r2 = math.sqrt(2.0)
    return pbdv(nu, -lo / r2)[0] * pbdv(nu, hi / r2)[0] / w


@dataclass(frozen=True, eq=False)
class GreenKernel:
    """Green function of ``op - k2`` on interior node pairs.

    ``values[i, j]`` approximates ``R(x_i, x_j, k2)`` as an integral kernel
    (matrix inverse divided by h). ``truncation`` is the number of eigenpairs
    summed (None for a direct solve) and ``tail_bound`` the reported bound
    ``1 / (lambda_N - k2)`` on the dropped part.
    """

    tag: str
    k2: float
    truncation: int | None
    nodes: np.ndarray
    values: np.ndarray
    tail_bound: float = 0.0

    def at(self, i, j):
        return self.values[i, j]

    def apply(self, f):
        """``(op - k2)^{-1} f`` on node values (kernel times h)."""
        h = self.nodes[1] - self.nodes[0]
        return h * (self.values @ f)


def green_kernel(op, k2=-1.0, truncation=None, gap_tol=1e-6):
    """Spectral Green function ``sum_n psi_n(x) psi_n(y) / (lambda_n - k2)``.

    With ``truncation=None`` all eigenpairs are used and the result equals the
    direct inverse. Rejects ``k2`` within ``gap_tol`` of an eigenvalue.
    """
    if op.tag != "h0":
        raise ValueError(f"green_kernel expects an h0 matrix, got {op.tag!r}")
    grid = op.basis
    n = grid.size
    N = n if truncation is None else check_int("truncation", truncation, minimum=1)
    if N > n:
        raise ValueError(f"truncation {N} exceeds the {n} available eigenpairs")
    diag = op.matrix.diagonal()
    off = op.matrix.diagonal(1)
    lam, vec = scipy.linalg.eigh_tridiagonal(diag, off)
    if np.min(np.abs(lam - k2)) < gap_tol:
        raise ValueError(f"k2 = {k2} is within {gap_tol} of an eigenvalue")
    lam_n, psi = lam[:N], vec[:, :N] / np.sqrt(grid.spacing)
    values = (psi / (lam_n - k2)) @ psi.T
    tail = 1.0 / (lam[N] - k2) if N < n else 0.0
    return GreenKernel("h0", float(k2), None if truncation is None else N,
                       grid.interior, values, tail)


def direct_green(op, k2=-1.0):
    """Kernel of ``(op - k2)^{-1}`` by a dense solve; h0D rows/cols embedded as zeros."""
    grid = op.basis
    n_op = op.dimension
    inv = np.linalg.solve(op.toarray() - k2 * np.eye(n_op), np.eye(n_op)) / grid.spacing
    if op.tag == "h0D":
        full = np.zeros((grid.size, grid.size))
        kept = op.meta["kept"]
        full[np.ix_(kept, kept)] = inv
        inv = full
    return GreenKernel(op.tag, float(k2), None, grid.interior, 0.5 * (inv + inv.T))


def dirichlet_green_kernel(g, min_denominator=1e-12):
    """Krein rank-one correction ``R - R(., 0) R(0, .) / R(0, 0)``."""
    if g.tag != "h0":
        raise ValueError("dirichlet_green_kernel needs an h0 kernel")
    z = int(np.argmin(np.abs(g.nodes)))
    r00 = g.values[z, z]
    if abs(r00) < min_denominator:
        raise ValueError(f"|R(0, 0)| = {abs(r00):.3e} is below {min_denominator}")
    col = g.values[:, z]
    values = g.values - np.outer(col, col) / r00
    values[z, :] = 0.0
    values[:, z] = 0.0
    return GreenKernel("h0D", g.k2, g.truncation, g.nodes, values, g.tail_bound)


def embedded_dirichlet_resolvent(grid, k2=-1.0, offset=0, dim=None):
    """``(h0D - k2)^{-1}`` acting on a space where the 1D grid sits at ``offset``."""
    op = assemble_h0_dirichlet(grid)
    support = offset + op.meta["kept"]
    return Resolvent(op, k2, support=support, dim=grid.size if dim is None else dim)


def resolvent_gap_1d(grid, C_omega, twist, k2=-1.0, method="auto"):
    """``||(h_eps - k2)^{-1} - (h0D - k2)^{-1} (+) 0||`` on the grid."""
    h_eps = assemble_h_eps(grid, C_omega, twist)
    return resolvent_difference_norm(Resolvent(h_eps, k2),
                                     embedded_dirichlet_resolvent(grid, k2),
                                     shift=k2, method=method)
