"""Compressed-row matrices and Jacobi-preconditioned Krylov solvers.

The solvers are written as numba kernels over the raw CSR arrays; a
Python-level loop would spend most of its time in interpreter overhead
at the problem sizes used here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np
import scipy.sparse as sp

__all__ = ["SparseMatrix", "SolveReport", "spmv", "dot", "norm2", "cg_solve", "bicgstab_solve"]


class SparseMatrix:
    """Square CSR matrix.

    Column indices are strictly increasing inside each row and there are
    no duplicate entries.  Instances are treated as immutable.
    """

    __slots__ = ("row_offsets", "column_indices", "values", "n", "_diag_pos")

    def __init__(self, row_offsets, column_indices, values, n: int | None = None, check: bool = True):
        self.row_offsets = np.ascontiguousarray(row_offsets, dtype=np.int64)
        self.column_indices = np.ascontiguousarray(column_indices, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.n = len(self.row_offsets) - 1 if n is None else int(n)
        self._diag_pos = None
        if check:
            self._validate()
        for a in (self.row_offsets, self.column_indices, self.values):
            a.setflags(write=False)

    def _validate(self):
        ro, ci = self.row_offsets, self.column_indices
        if ro.shape[0] != self.n + 1 or ro[0] != 0:
            raise ValueError("row_offsets must have n+1 entries starting at 0")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be monotone")
        if ro[-1] != ci.shape[0] or ci.shape[0] != self.values.shape[0]:
            raise ValueError("last row offset must equal the number of stored entries")
        if ci.size and (ci.min() < 0 or ci.max() >= self.n):
            raise ValueError("column index out of range")
        d = np.diff(ci)
        row_start = np.zeros(ci.size, dtype=bool)
        row_start[ro[:-1][np.diff(ro) > 0]] = True
        if np.any((d <= 0) & ~row_start[1:]):
            raise ValueError("column indices must be strictly increasing within each row")

    @classmethod
    def from_coo(cls, rows, cols, vals, n: int) -> "SparseMatrix":
        """Sum duplicates; explicit zeros are kept as structural entries."""
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.indptr, m.indices, m.data, n)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        r, c = np.nonzero(a)
        return cls.from_coo(r, c, a[r, c], a.shape[0])

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls(np.arange(n + 1), np.arange(n), np.ones(n), n)

    @property
    def nnz(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def with_values(self, values) -> "SparseMatrix":
        """Same sparsity pattern, new values."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.values.shape:
            raise ValueError("values do not match the sparsity pattern")
        out = SparseMatrix(self.row_offsets, self.column_indices, values, self.n, check=False)
        out._diag_pos = self._diag_pos
        return out

    def same_pattern(self, other: "SparseMatrix") -> bool:
        return (
            self.n == other.n
            and self.nnz == other.nnz
            and (self.row_offsets is other.row_offsets or np.array_equal(self.row_offsets, other.row_offsets))
            and (
                self.column_indices is other.column_indices
                or np.array_equal(self.column_indices, other.column_indices)
            )
        )

    def diagonal_positions(self) -> np.ndarray:
        """Index into ``values`` of each diagonal entry (-1 when not stored)."""
        if self._diag_pos is None:
            rows = np.repeat(np.arange(self.n), np.diff(self.row_offsets))
            pos = np.full(self.n, -1, dtype=np.int64)
            hit = np.flatnonzero(rows == self.column_indices)
            pos[rows[hit]] = hit
            self._diag_pos = pos
        return self._diag_pos

    def diagonal(self) -> np.ndarray:
        pos = self.diagonal_positions()
        return np.where(pos >= 0, self.values[np.maximum(pos, 0)], 0.0)

    def row_indices(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.row_offsets))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.column_indices, self.row_offsets), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def __matmul__(self, x):
        return spmv(self, x)

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.same_pattern(other):
            return self.with_values(self.values + other.values)
        m = (self.to_scipy() + other.to_scipy()).tocsr()
        m.sort_indices()
        return SparseMatrix(m.indptr, m.indices, m.data, self.n)

    def __mul__(self, alpha: float) -> "SparseMatrix":
        return self.with_values(float(alpha) * self.values)

    __rmul__ = __mul__

    def quad_form(self, x, y=None) -> float:
        """``x^T A y`` (``y`` defaults to ``x``)."""
        y = x if y is None else y
        return dot(x, spmv(self, y))

    def is_symmetric(self, tol: float = 0.0) -> bool:
        a = self.to_scipy()
        d = abs(a - a.T)
        return d.nnz == 0 or d.max() <= tol

    def __repr__(self) -> str:
        return f"SparseMatrix(n={self.n}, nnz={self.nnz})"


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_residual_norm: float
    initial_residual_norm: float
    converged: bool


@nb.njit(cache=True)
def _csr_matvec(ro, ci, va, x, out):
    n = ro.shape[0] - 1
    for i in range(n):
        s = 0.0
        for k in range(ro[i], ro[i + 1]):
            s += va[k] * x[ci[k]]
        out[i] = s


@nb.njit(cache=True)
def _dot(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@nb.njit(cache=True)
def _pcg(ro, ci, va, b, x, dinv, tol, maxit):
    n = b.shape[0]
    r = np.empty(n)
    z = np.empty(n)
    q = np.empty(n)
    _csr_matvec(ro, ci, va, x, q)
    for i in range(n):
        r[i] = b[i] - q[i]
        z[i] = dinv[i] * r[i]
    res0 = np.sqrt(_dot(z, z))
    res = res0
    if res0 == 0.0:
        return 0, res, res0
    p = z.copy()
    rz = _dot(r, z)
    it = 0
    while it < maxit:
        it += 1
        _csr_matvec(ro, ci, va, p, q)
        pq = _dot(p, q)
        if pq <= 0.0:
            break
        alpha = rz / pq
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * q[i]
            z[i] = dinv[i] * r[i]
        res = np.sqrt(_dot(z, z))
        if res <= tol * res0:
            break
        rz_new = _dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        for i in range(n):
            p[i] = z[i] + beta * p[i]
    return it, res, res0


@nb.njit(cache=True)
def _pbicgstab(ro, ci, va, b, x, dinv, tol, maxit):
    # right-preconditioned BiCGSTAB; residual measured as ||D^-1 r||
    n = b.shape[0]
    r = np.empty(n)
    tmp = np.empty(n)
    _csr_matvec(ro, ci, va, x, tmp)
    for i in range(n):
        r[i] = b[i] - tmp[i]
    s0 = 0.0
    for i in range(n):
        s0 += (dinv[i] * r[i]) ** 2
    res0 = np.sqrt(s0)
    res = res0
    if res0 == 0.0:
        return 0, res, res0
    rhat = r.copy()
    p = np.zeros(n)
    v = np.zeros(n)
    phat = np.empty(n)
    shat = np.empty(n)
    s = np.empty(n)
    t = np.empty(n)
    rho = 1.0
    alpha = 1.0
    omega = 1.0
    it = 0
    while it < maxit:
        it += 1
        rho_new = _dot(rhat, r)
        if rho_new == 0.0:
            break
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        for i in range(n):
            p[i] = r[i] + beta * (p[i] - omega * v[i])
            phat[i] = dinv[i] * p[i]
        _csr_matvec(ro, ci, va, phat, v)
        rv = _dot(rhat, v)
        if rv == 0.0:
            break
        alpha = rho / rv
        ss = 0.0
        for i in range(n):
            s[i] = r[i] - alpha * v[i]
            ss += (dinv[i] * s[i]) ** 2
        if np.sqrt(ss) <= tol * res0:
            for i in range(n):
                x[i] += alpha * phat[i]
            res = np.sqrt(ss)
            break
        for i in range(n):
            shat[i] = dinv[i] * s[i]
        _csr_matvec(ro, ci, va, shat, t)
        tt = _dot(t, t)
        if tt == 0.0:
            break
        omega = _dot(t, s) / tt
        rr = 0.0
        for i in range(n):
            x[i] += alpha * phat[i] + omega * shat[i]
            r[i] = s[i] - omega * t[i]
            rr += (dinv[i] * r[i]) ** 2
        res = np.sqrt(rr)
        if res <= tol * res0 or omega == 0.0:
            break
    return it, res, res0


def dot(x, y) -> float:
    """Sequential-order inner product; reproducible across processes."""
    return float(_dot(np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(y, dtype=float)))


def norm2(x) -> float:
    return math.sqrt(dot(x, x))


def spmv(A: SparseMatrix, x) -> np.ndarray:
    """``y = A x`` for a vector, or column-wise for a 2-D block."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != A.n:
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, vector has {x.shape[0]} rows")
    if x.ndim == 1:
        out = np.empty(A.n)
        _csr_matvec(A.row_offsets, A.column_indices, A.values, np.ascontiguousarray(x), out)
        return out
    return A.to_scipy() @ x


def _prepare(A: SparseMatrix, b, x0, maxit):
    b = np.ascontiguousarray(b, dtype=float)
    if b.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, rhs has shape {b.shape}")
    if maxit < 1:
        raise ValueError("maxit must be at least 1")
    x = np.zeros(A.n) if x0 is None else np.array(x0, dtype=float)
    d = A.diagonal()
    if np.any(d == 0):
        raise ValueError("Jacobi preconditioner needs a nonzero diagonal")
    return b, x, 1.0 / d


def cg_solve(A: SparseMatrix, b, tol: float = 1e-10, maxit: int | None = None, x0=None):
    """Jacobi-preconditioned conjugate gradients for SPD ``A``.

    Stops when the preconditioned residual norm drops below ``tol`` times
    its initial value.  On failure the best iterate is returned with
    ``converged=False``.
    """
    maxit = 10 * A.n if maxit is None else int(maxit)
    b, x, dinv = _prepare(A, b, x0, maxit)
    it, res, res0 = _pcg(A.row_offsets, A.column_indices, A.values, b, x, dinv, float(tol), maxit)
    return x, SolveReport(int(it), float(res), float(res0), bool(res <= tol * res0))


def bicgstab_solve(A: SparseMatrix, b, tol: float = 1e-10, maxit: int | None = None, x0=None):
    """Jacobi-preconditioned BiCGSTAB for general square ``A``."""
    maxit = 10 * A.n if maxit is None else int(maxit)
    b, x, dinv = _prepare(A, b, x0, maxit)
    it, res, res0 = _pbicgstab(A.row_offsets, A.column_indices, A.values, b, x, dinv, float(tol), maxit)
    return x, SolveReport(int(it), float(res), float(res0), bool(res <= tol * res0))
