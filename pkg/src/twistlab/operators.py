"""Symmetric operator matrices, their low-lying spectra and resolvent norms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import check_int, symmetry_defect
from .exceptions import SolverError

# Dense linear algebra is used at or below this dimension.
DENSE_LIMIT = 2500
_SEED = 20240607


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Symmetric Galerkin matrix with its basis metadata.

    ``shift`` records any constant that was removed analytically (for the
    full operator, ``E_1 / eps^2``); it is bookkeeping only and has already
    been accounted for in ``matrix``.
    """

    matrix: object
    tag: str
    basis: object = None
    shift: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @property
    def is_sparse(self):
        return sp.issparse(self.matrix)

    def symmetry_defect(self):
        return symmetry_defect(self.matrix)

    def toarray(self):
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)


@dataclass(frozen=True, eq=False)
class Eigenpairs:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    def __iter__(self):
        return iter(zip(self.values, self.vectors.T))

    def __len__(self):
        return len(self.values)


def deterministic_vector(n, seed=_SEED):
    return np.random.default_rng(seed).standard_normal(n)


def _tridiagonal_parts(mat):
    """Return (diag, offdiag) if ``mat`` is symmetric tridiagonal, else None."""
    if not sp.issparse(mat):
        return None
    coo = mat.tocoo()
    if coo.nnz and np.max(np.abs(coo.row - coo.col)) > 1:
        return None
    csr = mat.tocsr()
    return csr.diagonal(0).copy(), csr.diagonal(1).copy()


def lowest_eigenpairs(op, k, tol=1e-9):
    """The ``k`` smallest eigenpairs of a symmetric operator matrix.

    Tridiagonal matrices go through LAPACK's tridiagonal solver, small ones
    through a dense solve, and large sparse ones through shift-invert Lanczos
    anchored below the spectrum. Vectors have unit Euclidean norm and a fixed
    sign (largest-magnitude entry positive), so the output is deterministic.

    Raises
    ------
    SolverError
        If the Lanczos iteration fails or a residual ``||Av - lv||`` exceeds
        ``tol * max(1, ||A||)``.
    """
    mat = op.matrix if isinstance(op, OperatorMatrix) else op
    n = mat.shape[0]
    k = check_int("k", k, minimum=1)
    if k >= n:
        raise ValueError(f"k = {k} must be smaller than the dimension {n}")

    tri = _tridiagonal_parts(mat)
    if tri is not None:
        vals, vecs = scipy.linalg.eigh_tridiagonal(tri[0], tri[1], select="i",
                                                   select_range=(0, k - 1))
    elif n <= DENSE_LIMIT:
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        vals, vecs = scipy.linalg.eigh(dense, subset_by_index=[0, k - 1])
    else:
        # Anchor just below the spectrum: a structural lower bound recorded by
        # the assembler when known, else Gershgorin.
        csr = sp.csr_matrix(mat)
        bound = op.meta.get("lower_bound") if isinstance(op, OperatorMatrix) else None
        if bound is None:
            radius = np.asarray(abs(csr).sum(axis=1)).ravel() - np.abs(csr.diagonal())
            bound = min(0.0, float(np.min(csr.diagonal() - radius)))
        sigma = float(bound) - 1.0
        try:
            vals, vecs = spla.eigsh(csr.tocsc(), k=k, sigma=sigma, which="LM",
                                    v0=deterministic_vector(n), tol=0.0)
        except spla.ArpackNoConvergence as exc:
            raise SolverError("Lanczos eigensolve did not converge") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]

    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    vecs = vecs * np.where(signs == 0, 1.0, signs)
    residuals = np.linalg.norm(mat @ vecs - vecs * vals, axis=0)
    scale = max(1.0, _norm_estimate(mat))
    if np.any(residuals > tol * scale):
        raise SolverError(f"eigenpair residuals up to {residuals.max():.3e} exceed "
                          f"{tol:.1e} * ||A||", residuals=residuals)
    return Eigenpairs(np.asarray(vals), vecs, residuals)


def _norm_estimate(mat):
    # Infinity norm bounds the spectral norm of a symmetric matrix.
    if sp.issparse(mat):
        return float(abs(mat).sum(axis=1).max())
    return float(np.abs(mat).sum(axis=1).max())


class Resolvent:
    """Action of ``P (A - z)^{-1} P^T`` on a space of dimension ``dim``.

    ``P`` injects the unknowns of ``A`` at positions ``support`` (all of them
    when ``support`` is None); entries outside are mapped to zero. This covers
    plain resolvents and the block embeddings used to compare operators living
    on subspaces.
    """

    def __init__(self, op, z=-1.0, support=None, dim=None):
        mat = op.matrix if isinstance(op, OperatorMatrix) else op
        n = mat.shape[0]
        self.z = float(z)
        self.support = None if support is None else np.asarray(support, dtype=np.int64)
        self.dim = n if support is None else int(dim)
        if self.support is not None and self.support.size != n:
            raise ValueError("support size must equal the operator dimension")
        shifted = sp.csc_matrix(mat) - self.z * sp.identity(n, format="csc")
        try:
            self._lu = spla.splu(shifted.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"shifted matrix is singular at z = {z}") from exc
        diag_u = self._lu.U.diagonal()
        if np.min(np.abs(diag_u)) < 1e-14 * np.max(np.abs(diag_u)):
            raise SolverError(f"shifted matrix is numerically singular at z = {z}")

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        if self.support is None:
            return self._lu.solve(v)
        out = np.zeros((self.dim,) + v.shape[1:])
        out[self.support] = self._lu.solve(np.ascontiguousarray(v[self.support]))
        return out

    def dense(self):
        return self.apply(np.eye(self.dim))


@dataclass(frozen=True)
class NormResult:
    value: float
    residual: float
    method: str


def resolvent_difference_norm(A, B, shift=-1.0, method="auto", tol=1e-10):
    """Operator norm of ``(A - shift)^{-1} - (B - shift)^{-1}``.

    ``A`` and ``B`` may be operator matrices or prebuilt :class:`Resolvent`
    objects (use the latter for block-embedded comparisons). Both resolvents
    are symmetric, so the norm is the largest eigenvalue magnitude of their
    difference: computed densely for small dimensions and by Lanczos on the
    implicit difference otherwise, with the Lanczos residual reported.
    """
    RA = A if isinstance(A, Resolvent) else Resolvent(A, shift)
    RB = B if isinstance(B, Resolvent) else Resolvent(B, shift)
    if RA.dim != RB.dim:
        raise ValueError(f"dimension mismatch: {RA.dim} vs {RB.dim}")
    n = RA.dim
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "lanczos"
    if method == "dense":
        diff = RA.dense() - RB.dense()
        diff = 0.5 * (diff + diff.T)
        vals, vecs = np.linalg.eigh(diff)
        j = int(np.argmax(np.abs(vals)))
        res = float(np.linalg.norm(diff @ vecs[:, j] - vals[j] * vecs[:, j]))
        return NormResult(float(abs(vals[j])), res, "dense")
    if method != "lanczos":
        raise ValueError(f"unknown method {method!r}")

    def matvec(v):
        return RA.apply(v) - RB.apply(v)

    lin = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    try:
        vals, vecs = spla.eigsh(lin, k=1, which="LM", v0=deterministic_vector(n), tol=tol)
    except spla.ArpackNoConvergence as exc:
        raise SolverError("Lanczos norm estimate did not converge") from exc
    v = vecs[:, 0]
    res = float(np.linalg.norm(matvec(v) - vals[0] * v))
    return NormResult(float(abs(vals[0])), res, "lanczos")


def write_triplets(path, op):
    """Write the upper triangle as ``row col value`` lines (0-based, 17 digits)."""
    coo = sp.coo_matrix(op.matrix if isinstance(op, OperatorMatrix) else op)
    keep = coo.row <= coo.col
    order = np.lexsort((coo.col[keep], coo.row[keep]))
    rows, cols, vals = coo.row[keep][order], coo.col[keep][order], coo.data[keep][order]
    with open(path, "w") as fh:
        fh.write(f"# symmetric {coo.shape[0]} {coo.shape[1]} upper-triangle\n")
        for r, c, v in zip(rows, cols, vals):
            fh.write(f"{r} {c} {v:.17g}\n")


def read_triplets(path):
    with open(path) as fh:
        header = fh.readline().split()
        n, m = int(header[2]), int(header[3])
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((n, m))
    r, c, v = data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2]
    off = r != c
    upper = sp.coo_matrix((v, (r, c)), shape=(n, m))
    lower = sp.coo_matrix((v[off], (c[off], r[off])), shape=(n, m))
    return (upper + lower).tocsr()
