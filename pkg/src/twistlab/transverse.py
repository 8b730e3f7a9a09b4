"""Dirichlet modes of the waveguide cross-section and their twist-coupling data.

The cross-section is sampled on a square lattice; nodes strictly inside the
polygon are unknowns and everything else is held at zero (Dirichlet by
omission). The angular derivative is taken about the area centroid, shifted by
an optional axis offset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import shapely

from ._validation import check_int, check_positive
from .exceptions import GeometryError, ResolutionError, SolverError

MIN_INTERIOR_NODES = 100
# Dense eigensolves below this size; shift-invert Lanczos above.
_DENSE_LIMIT = 1500
# Relative energy gap below which two discrete modes are treated as degenerate.
_DEGENERACY_RTOL = 1e-9


@dataclass(frozen=True)
class CrossSectionSpec:
    """Geometry of the cross-section plus its sampling density.

    Use :meth:`rectangle` or :meth:`polygon` rather than the raw constructor.
    ``resolution`` is the number of lattice points per unit length.
    """

    kind: str
    a: float | None = None
    b: float | None = None
    vertices: tuple[tuple[float, float], ...] | None = None
    resolution: int = 40
    allow_square: bool = False
    axis_offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        check_int("resolution", self.resolution, minimum=2)
        if len(self.axis_offset) != 2 or not np.all(np.isfinite(self.axis_offset)):
            raise GeometryError(f"axis_offset must be two finite numbers, got {self.axis_offset!r}")
        if self.kind == "rectangle":
            if self.a is None or self.b is None:
                raise GeometryError("rectangle needs both side lengths a and b")
            check_positive("a", self.a)
            check_positive("b", self.b)
            if np.isclose(self.a, self.b, rtol=1e-12, atol=0.0) and not self.allow_square:
                raise GeometryError(
                    f"square cross-section rejected (a = b = {self.a}); its first mode has no "
                    "unambiguous twist coupling. Pass allow_square=True to override."
                )
        elif self.kind == "polygon":
            if self.vertices is None or len(self.vertices) < 3:
                raise GeometryError("polygon needs at least three vertices")
            pts = np.asarray(self.vertices, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
                raise GeometryError("polygon vertices must be finite 2D points")
        else:
            raise GeometryError(f"unknown cross-section kind {self.kind!r}")

    @classmethod
    def rectangle(cls, a, b, resolution=40, allow_square=False, axis_offset=(0.0, 0.0)):
        return cls("rectangle", a=float(a), b=float(b), resolution=resolution,
                   allow_square=allow_square, axis_offset=tuple(axis_offset))

    @classmethod
    def polygon(cls, vertices, resolution=40, axis_offset=(0.0, 0.0)):
        verts = tuple((float(x), float(y)) for x, y in vertices)
        return cls("polygon", vertices=verts, resolution=resolution, axis_offset=tuple(axis_offset))

    def outline(self):
        if self.kind == "rectangle":
            return ((0.0, 0.0), (self.a, 0.0), (self.a, self.b), (0.0, self.b))
        return self.vertices


@dataclass(frozen=True, eq=False)
class CrossSectionGrid:
    """Lattice sampling of the cross-section.

    ``x2``/``x3`` hold lattice coordinates relative to the rotation axis for
    every lattice point; ``mask`` flags the interior unknowns and ``index``
    maps a lattice point to its unknown number (-1 outside).
    """

    spec: CrossSectionSpec
    spacing: float
    mask: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    index: np.ndarray
    centroid: tuple[float, float]
    area: float

    @property
    def n_interior(self):
        return int(self.mask.sum())

    @property
    def coords(self):
        """(n_interior, 2) array of axis-relative interior coordinates."""
        return np.column_stack([self.x2[self.mask], self.x3[self.mask]])


@dataclass(frozen=True, eq=False)
class TransverseMode:
    index: int
    energy: float
    values: np.ndarray
    tau_values: np.ndarray
    residual: float


@dataclass(frozen=True, eq=False)
class CouplingData:
    """Mode-space matrices of the angular derivative.

    ``D[n, m] = (J_n, d_tau J_m)`` is skew-symmetric, ``G[n, m] =
    (d_tau J_n, d_tau J_m)`` is a Gram matrix and ``C_omega = G[0, 0]``.
    """

    D: np.ndarray
    G: np.ndarray
    C_omega: float
    skew_defect: float
    energies: np.ndarray = field(default=None)


def build_cross_section(spec):
    poly = shapely.Polygon(spec.outline())
    if not poly.is_valid or not poly.exterior.is_simple:
        raise GeometryError("cross-section polygon is self-intersecting or otherwise invalid")
    if poly.area <= 0:
        raise GeometryError("cross-section has zero area")

    h = 1.0 / spec.resolution
    minx, miny, maxx, maxy = poly.bounds
    nx = int(np.ceil((maxx - minx) / h - 1e-9)) + 1
    ny = int(np.ceil((maxy - miny) / h - 1e-9)) + 1
    X, Y = np.meshgrid(minx + h * np.arange(nx), miny + h * np.arange(ny), indexing="ij")
    inside = shapely.contains_xy(poly, X, Y)
    # Rounding can put a boundary lattice point a hair inside the polygon.
    on_edge = shapely.distance(poly.exterior, shapely.points(X[inside], Y[inside])) < 1e-9 * h
    inside[inside] = ~on_edge
    n_inside = int(inside.sum())
    if n_inside < MIN_INTERIOR_NODES:
        raise ResolutionError(
            f"only {n_inside} interior nodes at resolution {spec.resolution}; "
            f"need at least {MIN_INTERIOR_NODES}"
        )

    cx, cy = poly.centroid.x, poly.centroid.y
    ox, oy = spec.axis_offset
    index = np.full(inside.shape, -1, dtype=np.int64)
    index[inside] = np.arange(n_inside)
    return CrossSectionGrid(
        spec=spec,
        spacing=h,
        mask=inside,
        x2=X - (cx + ox),
        x3=Y - (cy + oy),
        index=index,
        centroid=(cx, cy),
        area=float(poly.area),
    )


def _neighbour_pairs(grid, axis):
    """Index pairs (i, j) of interior nodes with j the +axis neighbour of i."""
    m = grid.mask
    if axis == 0:
        both = m[:-1, :] & m[1:, :]
        return grid.index[:-1, :][both], grid.index[1:, :][both]
    both = m[:, :-1] & m[:, 1:]
    return grid.index[:, :-1][both], grid.index[:, 1:][both]


def dirichlet_laplacian(grid):
    """5-point matrix of ``-Laplacian`` on the interior nodes (sparse CSR)."""
    n = grid.n_interior
    h2 = grid.spacing**2
    rows, cols = [np.arange(n)], [np.arange(n)]
    vals = [np.full(n, 4.0 / h2)]
    for axis in (0, 1):
        i, j = _neighbour_pairs(grid, axis)
        rows += [i, j]
        cols += [j, i]
        vals += [np.full(i.size, -1.0 / h2)] * 2
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def angular_derivative_matrix(grid):
    """Centered-difference matrix of ``x3 d/dx2 - x2 d/dx3`` on interior nodes.

    The coefficient of each axis derivative is constant along that axis, so the
    matrix is exactly skew-symmetric.
    """
    n = grid.n_interior
    x2 = grid.x2[grid.mask]
    x3 = grid.x3[grid.mask]
    half = 0.5 / grid.spacing
    rows, cols, vals = [], [], []
    for axis, coef in ((0, x3), (1, -x2)):
        i, j = _neighbour_pairs(grid, axis)
        # d/dx at i picks +f_j; d/dx at j picks -f_i.
        rows += [i, j]
        cols += [j, i]
        vals += [coef[i] * half, -coef[j] * half]
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def _boundary_angular_derivative(grid, fields):
    """d_tau of interior fields evaluated on the lattice points bordering the domain.

    Returns ``(weights, values)`` with one row per boundary point. Fields vanish
    on these points, so the derivative uses second-order one-sided differences
    pointing into the domain. Weights follow the trapezoid rule (h^2 / 2).
    """
    m = grid.mask
    nx, ny = m.shape
    full = np.zeros((nx, ny, fields.shape[1]))
    full[m] = fields

    def shifted(arr, di, dj, fill):
        out = np.full_like(arr, fill)
        src = arr[max(di, 0): nx + min(di, 0), max(dj, 0): ny + min(dj, 0)]
        out[max(-di, 0): nx + min(-di, 0), max(-dj, 0): ny + min(-dj, 0)] = src
        return out

    grad = [np.zeros_like(full), np.zeros_like(full)]
    count = [np.zeros((nx, ny)), np.zeros((nx, ny))]
    for axis, (di, dj) in ((0, (1, 0)), (0, (-1, 0)), (1, (0, 1)), (1, (0, -1))):
        nb_in = shifted(m, di, dj, False) & ~m
        f1 = shifted(full, di, dj, 0.0)
        f2 = shifted(full, 2 * di, 2 * dj, 0.0)
        sign = di + dj
        est = sign * (4.0 * f1 - f2) / (2.0 * grid.spacing)
        grad[axis][nb_in] += est[nb_in]
        count[axis][nb_in] += 1
    boundary = (count[0] + count[1]) > 0
    g2 = grad[0][boundary] / np.maximum(count[0][boundary], 1)[:, None]
    g3 = grad[1][boundary] / np.maximum(count[1][boundary], 1)[:, None]
    tau = grid.x3[boundary][:, None] * g2 - grid.x2[boundary][:, None] * g3
    weights = np.full(tau.shape[0], 0.5 * grid.spacing**2)
    return weights, tau


def _deterministic_start(n):
    return np.random.default_rng(20240607).standard_normal(n)


def _resolve_degenerate(vectors, energies, grid):
    """Fix a reproducible basis inside numerically degenerate eigenspaces."""
    x2 = grid.x2[grid.mask]
    x3 = grid.x3[grid.mask]
    # Generic weight without the symmetries of rectangles or regular polygons.
    weight = x2 + 0.7071 * x3 + 0.313 * x2 * x3 + 0.171 * x2**2 + 0.0917 * x3**3
    out = vectors.copy()
    start = 0
    while start < len(energies):
        stop = start + 1
        while stop < len(energies) and (
            energies[stop] - energies[start] <= _DEGENERACY_RTOL * abs(energies[start])
        ):
            stop += 1
        if stop - start > 1:
            block = out[:, start:stop]
            _, rot = np.linalg.eigh(block.T @ (weight[:, None] * block))
            out[:, start:stop] = block @ rot
        start = stop
    return out


def solve_dirichlet_modes(grid, n_modes, tol=1e-9):
    """Lowest ``n_modes`` Dirichlet eigenpairs of the cross-section.

    Modes are sorted by energy and normalized so that the lattice quadrature
    ``h^2 * sum(J**2)`` equals one. Each mode's largest-magnitude node is made
    positive; inside degenerate eigenspaces a fixed auxiliary weight picks the
    basis, so repeated runs give identical coupling matrices.
    """
    n_modes = check_int("n_modes", n_modes, minimum=2)
    A = dirichlet_laplacian(grid)
    n = A.shape[0]
    # Extra modes so a degenerate cluster straddling the cut is resolved whole.
    k = min(n_modes + 2, n - 2)
    if k < n_modes:
        raise ResolutionError(f"grid has {n} unknowns, cannot return {n_modes} modes")
    if n <= _DENSE_LIMIT:
        energies, vecs = scipy.linalg.eigh(A.toarray(), subset_by_index=[0, k - 1])
    else:
        try:
            energies, vecs = spla.eigsh(A.tocsc(), k=k, sigma=0.0, which="LM",
                                        v0=_deterministic_start(n), tol=0.0)
        except spla.ArpackNoConvergence as exc:
            raise SolverError("transverse eigensolve did not converge",
                              residuals=getattr(exc, "eigenvalues", None)) from exc
        order = np.argsort(energies)
        energies, vecs = energies[order], vecs[:, order]

    vecs = _resolve_degenerate(vecs, energies, grid)
    h = grid.spacing
    vecs = vecs / (h * np.linalg.norm(vecs, axis=0))
    residuals = np.linalg.norm(A @ vecs - vecs * energies, axis=0) * h
    bad = residuals > tol * np.maximum(energies, 1.0) * 1e3
    if np.any(bad):
        raise SolverError("transverse eigenpairs failed the residual check", residuals=residuals)

    T = angular_derivative_matrix(grid)
    modes = []
    for j in range(n_modes):
        v = vecs[:, j]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        modes.append(TransverseMode(index=j + 1, energy=float(energies[j]), values=v,
                                    tau_values=T @ v, residual=float(residuals[j])))
    return modes


def coupling_matrices(modes, grid, quad_tol=1e-8):
    """Skew matrix D, Gram matrix G and the constant C_omega = G[0, 0].

    G includes the boundary strip of the trapezoid rule: d_tau J does not vanish
    on the boundary, and dropping it costs a full order of accuracy. The added
    term is positive semi-definite, so ``G - D.T @ D`` stays PSD.
    """
    if len(modes) < 2:
        raise ValueError("coupling_matrices needs at least two modes")
    h2 = grid.spacing**2
    J = np.column_stack([m.values for m in modes])
    TJ = np.column_stack([m.tau_values for m in modes])
    D_raw = h2 * (J.T @ TJ)
    defect = float(np.max(np.abs(D_raw + D_raw.T)))
    if defect > 10 * quad_tol:
        raise ResolutionError(
            f"skew-defect {defect:.3e} of D exceeds 10x quadrature tolerance {quad_tol:.1e}; "
            "refine the cross-section grid"
        )
    D = 0.5 * (D_raw - D_raw.T)
    weights, tau_b = _boundary_angular_derivative(grid, J)
    G = h2 * (TJ.T @ TJ) + tau_b.T @ (weights[:, None] * tau_b)
    G = 0.5 * (G + G.T)
    return CouplingData(D=D, G=G, C_omega=float(G[0, 0]), skew_defect=defect,
                        energies=np.array([m.energy for m in modes]))


def rectangle_energies(a, b, count):
    """Lowest ``count`` values of pi^2 (m^2/a^2 + n^2/b^2), sorted."""
    top = count + 2
    vals = sorted(
        np.pi**2 * (m * m / a**2 + n * n / b**2)
        for m in range(1, top + 1) for n in range(1, top + 1)
    )
    return np.array(vals[:count])


def write_modes_csv(path, modes, grid):
    """One row per interior node: x2, x3, J_1 ... J_n."""
    coords = grid.coords
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x2", "x3"] + [f"J{m.index}" for m in modes])
        for row in range(coords.shape[0]):
            writer.writerow([f"{coords[row, 0]:.17g}", f"{coords[row, 1]:.17g}"]
                            + [f"{m.values[row]:.17g}" for m in modes])
