"""Full and intermediate operators in the mixed basis (x1-grid) x (transverse modes).

A state is stored mode-major: entry ``n * N + i`` is the coefficient of
mode ``n`` at interior node ``i``. With ``K`` the second-difference matrix,
``C`` the centered first difference and ``S = diag(sigma_eps)``, the full
operator ``H - E_1/eps^2`` is

    I (x) (K + x^2/16) + diag((E_n - E_1)/eps^2) (x) I
      + D (x) (C S + S C) + G (x) S^2,

which is the Galerkin matrix of ``||d1 psi - sigma d_tau psi||^2 +
eps^-2 ||grad' psi||^2 - E_1/eps^2 ||psi||^2 + ||x1 psi||^2 / 16``. The
subtraction of ``E_1/eps^2`` is done on the mode energies, never on an
assembled matrix. ``K - C^T C`` is positive semi-definite and
``G - D^T D`` is too, so the matrix is nonnegative by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .oscillator import assemble_h0, check_resolution
from .operators import OperatorMatrix, lowest_eigenpairs


@dataclass(frozen=True, eq=False)
class MixedBasis:
    grid: object
    energies: np.ndarray
    D: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"the mixed basis needs at least 2 transverse modes, got {self.M}")
        if self.D.shape != (self.M, self.M) or self.G.shape != (self.M, self.M):
            raise ValueError("coupling matrices must be M x M")

    @classmethod
    def from_coupling(cls, grid, coupling, n_modes=None):
        M = len(coupling.energies) if n_modes is None else n_modes
        return cls(grid, np.asarray(coupling.energies[:M]), coupling.D[:M, :M],
                   coupling.G[:M, :M])

    @property
    def M(self):
        return len(self.energies)

    @property
    def N(self):
        return self.grid.size

    @property
    def dimension(self):
        return self.M * self.N

    @property
    def C_omega(self):
        return float(self.G[0, 0])

    def flat_index(self, node, mode):
        return mode * self.N + node

    def split(self, vector):
        """``(M, N)`` view of a flat state."""
        return np.asarray(vector).reshape(self.M, self.N)

    def mode_slice(self, mode):
        return slice(mode * self.N, (mode + 1) * self.N)

    def inner(self, u, v):
        return self.grid.spacing * float(np.dot(u, v))

    def norm(self, u):
        return float(np.sqrt(self.inner(u, u)))


def _centered_difference(N, h):
    off = np.full(N - 1, 0.5 / h)
    return sp.diags([-off, off], [-1, 1], format="csr")


def _ladder(basis, epsilon):
    return (basis.energies - basis.energies[0]) / epsilon**2


def _twist_samples(basis, twist):
    if not twist.profile.is_zero:
        check_resolution(basis.grid, twist)
    return twist.values(basis.grid.interior)


def assemble_full(basis, twist):
    eps = twist.epsilon
    sigma = _twist_samples(basis, twist)
    N = basis.N
    h0 = assemble_h0(basis.grid).matrix
    C = _centered_difference(N, basis.grid.spacing)
    S = sp.diags(sigma, format="csr")
    eye_m = sp.identity(basis.M, format="csr")
    mat = (sp.kron(eye_m, h0)
           + sp.kron(sp.diags(_ladder(basis, eps)), sp.identity(N))
           + sp.kron(sp.csr_matrix(basis.D), C @ S + S @ C)
           + sp.kron(sp.csr_matrix(basis.G), S @ S))
    return OperatorMatrix(mat.tocsr(), "full", basis=basis,
                          shift=float(basis.energies[0] / eps**2),
                          meta={"epsilon": eps, "lower_bound": 0.0})


def assemble_intermediate(basis, twist):
    """Block-diagonal ``h_eps (x) I + ladder``: every mode sees ``C_omega sigma^2``."""
    eps = twist.epsilon
    sigma = _twist_samples(basis, twist)
    h_eps = assemble_h0(basis.grid).matrix + sp.diags(basis.C_omega * sigma**2)
    mat = (sp.kron(sp.identity(basis.M), h_eps)
           + sp.kron(sp.diags(_ladder(basis, eps)), sp.identity(basis.N)))
    return OperatorMatrix(mat.tocsr(), "intermediate", basis=basis,
                          shift=float(basis.energies[0] / eps**2),
                          meta={"epsilon": eps, "lower_bound": 0.0})


def restrict_to_modes(op, first_mode):
    """Submatrix on modes ``first_mode, first_mode + 1, ...`` (0-based)."""
    basis = op.basis
    start = first_mode * basis.N
    sub = op.matrix[start:, start:]
    return OperatorMatrix(sub.tocsr(), op.tag + "_restricted", basis=basis,
                          meta=dict(op.meta, first_mode=first_mode))


def upper_modes_ritz(op):
    """Smallest Ritz value of ``op`` on the span of modes n >= 2."""
    return float(lowest_eigenpairs(restrict_to_modes(op, 1), 1).values[0])


@dataclass(frozen=True)
class FormDifference:
    """``m_eps(phi, psi)`` with its four contributions.

    ``value = potential + cross_left + cross_right - twist_gram``;
    ``matrix_value`` is ``h * phi^T (A0 - A) psi`` from the assembled matrices
    and ``discrepancy`` their difference.
    """

    value: float
    potential: float
    cross_left: float
    cross_right: float
    twist_gram: float
    matrix_value: float
    discrepancy: float


def form_difference_m(basis, twist, phi, psi, check=True):
    """Evaluate ``m_eps(phi, psi) = Q0(phi, psi) - Q(phi, psi)`` term by term."""
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if phi.shape != (basis.dimension,) or psi.shape != (basis.dimension,):
        raise ValueError(f"states must have length {basis.dimension}, got {phi.shape} and {psi.shape}")
    h = basis.grid.spacing
    sigma = _twist_samples(basis, twist)
    C = _centered_difference(basis.N, h)
    F, G_ = basis.split(phi), basis.split(psi)
    s2_gram = h * (F * sigma**2) @ G_.T          # (phi_n, sigma^2 psi_m)
    d_left = h * (C @ F.T).T * sigma @ G_.T       # (phi_n', sigma psi_m)
    d_right = h * (F * sigma) @ (C @ G_.T)        # (sigma phi_n, psi_m')
    potential = basis.C_omega * float(np.trace(s2_gram))
    cross_left = float(np.sum(basis.D * d_left))
    cross_right = float(np.sum(basis.D.T * d_right))
    twist_gram = float(np.sum(basis.G * s2_gram))
    value = potential + cross_left + cross_right - twist_gram
    matrix_value = discrepancy = float("nan")
    if check:
        A = assemble_full(basis, twist).matrix
        A0 = assemble_intermediate(basis, twist).matrix
        matrix_value = h * float(phi @ (A0 @ psi - A @ psi))
        discrepancy = abs(value - matrix_value)
    return FormDifference(value, potential, cross_left, cross_right, twist_gram,
                          matrix_value, discrepancy)


def probe_states(basis, n_probes=2, seed=7):
    """Fixed smooth test functions ``F(x) = sum_n c_n exp(-x^2) (1 + x) e_n``.

    The coefficients come from a seeded generator and do not depend on the
    grid, so probes at different eps describe the same functions.
    """
    rng = np.random.default_rng(seed)
    x = basis.grid.interior
    shape = np.exp(-x**2)
    out = []
    for _ in range(n_probes):
        c = rng.standard_normal(basis.M)
        lin = rng.standard_normal()
        out.append(np.concatenate([cn * shape * (1 + lin * x) for cn in c]))
    return out
