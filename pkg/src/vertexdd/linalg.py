"""Sparse linear algebra: submatrices, LDL^T factorizations, PCG, Ritz values.

Matrices are ``scipy.sparse.csr_matrix`` with sorted column indices. Sparse
factorizations use CHOLMOD's simplicial LDL^T with a METIS ordering when
scikit-sparse is importable, and SuperLU in symmetric mode otherwise.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

try:
    from sksparse import cholmod
except ImportError:  # pragma: no cover - depends on the environment
    cholmod = None

log = logging.getLogger(__name__)

PIVOT_RTOL = 1e-13


class NonPositivePivot(ArithmeticError):
    """LDL^T met a pivot <= PIVOT_RTOL * max|diag|; the input is not SPD."""

    def __init__(self, row: int, value: float = float("nan"), block: str = ""):
        self.row = row
        self.value = value
        self.block = block
        where = f" in {block}" if block else ""
        super().__init__(f"non-positive pivot {value:.3e} at row {row}{where}")


class NotConverged(RuntimeError):
    def __init__(self, report: "SolveReport", stage: str = "pcg"):
        self.report = report
        self.stage = stage
        super().__init__(f"{stage}: no convergence after {report.iterations} iterations "
                         f"(relative residual {report.final_residual:.3e})")


def submatrix(A: sp.spmatrix, rows, cols) -> sp.csr_matrix:
    """Exact extraction of ``A[rows, cols]`` in the given index order."""
    A = sp.csr_matrix(A)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    for name, idx, n in (("row", rows, A.shape[0]), ("column", cols, A.shape[1])):
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise IndexError(f"{name} index out of range for dimension {n}")
        if np.unique(idx).size != idx.size:
            raise ValueError(f"duplicate {name} indices")
    S = A[rows][:, cols].tocsr()
    S.sort_indices()
    return S


class CholeskyFactor:
    """LDL^T factorization ``P A P^T = L D L^T`` of a sparse SPD matrix.

    ``solve`` accepts a vector or a matrix of right-hand sides. ``perm``,
    ``L`` and ``D`` are materialized on first access.
    """

    def __init__(self, A: sp.spmatrix, ordering: str = "metis", backend: Optional[str] = None):
        A = sp.csc_matrix(A)
        self.n = A.shape[0]
        self.ordering = ordering
        self.backend = backend or ("cholmod" if cholmod is not None else "superlu")
        self._factor = None
        self._lu = None
        if self.n == 0:
            self.backend = "empty"
            return
        diag_max = float(np.abs(A.diagonal()).max())
        if self.backend == "cholmod":
            try:
                # the supernodal path is unreliable with some BLAS builds
                self._factor = cholmod.cholesky(A, mode="simplicial", ordering_method=ordering)
            except cholmod.CholmodNotPositiveDefiniteError as exc:
                raise NonPositivePivot(-1, float("nan")) from exc
            d = self._factor.D()
        elif self.backend == "superlu":
            try:
                self._lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                     options={"SymmetricMode": True})
            except RuntimeError as exc:  # exactly singular
                raise NonPositivePivot(-1, 0.0) from exc
            d = self._lu.U.diagonal()
        else:
            raise ValueError(f"unknown factorization backend {self.backend!r}")
        bad = np.flatnonzero(d <= PIVOT_RTOL * diag_max)
        if bad.size:
            raise NonPositivePivot(int(bad[0]), float(d[bad[0]]))

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has {b.shape[0]} rows, factor has {self.n}")
        if self.n == 0:
            return np.zeros_like(b)
        if self._factor is not None:
            return self._factor.solve_A(b)
        return self._lu.solve(b)

    __call__ = solve

    @property
    def perm(self) -> np.ndarray:
        if self._factor is not None:
            return self._factor.P()
        if self._lu is not None:
            return self._lu.perm_c
        return np.arange(self.n)

    @property
    def L(self) -> sp.csc_matrix:
        if self._factor is not None:
            return self._factor.L_D()[0]
        if self._lu is not None:
            return self._lu.L
        return sp.csc_matrix((0, 0))

    @property
    def D(self) -> np.ndarray:
        if self._factor is not None:
            return self._factor.D()
        if self._lu is not None:
            return self._lu.U.diagonal()
        return np.zeros(0)

    @property
    def nnz(self) -> int:
        if self._factor is not None:
            return self._factor.L().nnz
        if self._lu is not None:
            return self._lu.L.nnz + self._lu.U.nnz
        return 0


def ldlt_factor(A: sp.spmatrix, ordering: str = "metis", backend: Optional[str] = None) -> CholeskyFactor:
    return CholeskyFactor(A, ordering=ordering, backend=backend)


def ldlt_solve(F: CholeskyFactor, b: np.ndarray) -> np.ndarray:
    return F.solve(b)


class FactorCache:
    """Reuse factorizations of matrices that coincide up to round-off.

    Translated subdomains of a structured mesh give equal local matrices once
    their dofs are sorted; lookups key on the sparsity pattern and then
    compare values.
    """

    def __init__(self, rtol: float = 1e-12, **factor_kw):
        self.rtol = rtol
        self.factor_kw = factor_kw
        self._entries = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def _key(A: sp.csr_matrix) -> str:
        h = hashlib.sha1()
        h.update(np.asarray(A.shape, dtype=np.int64).tobytes())
        h.update(A.indptr.astype(np.int64).tobytes())
        h.update(A.indices.astype(np.int64).tobytes())
        return h.hexdigest()

    def factor(self, A: sp.csr_matrix) -> CholeskyFactor:
        A = sp.csr_matrix(A)
        A.sort_indices()
        key = self._key(A)
        scale = np.abs(A.data).max() if A.nnz else 0.0
        for data, F in self._entries.get(key, []):
            if np.all(np.abs(data - A.data) <= self.rtol * scale):
                self.hits += 1
                return F
        F = ldlt_factor(A, **self.factor_kw)
        self._entries.setdefault(key, []).append((A.data.copy(), F))
        self.misses += 1
        return F

    @property
    def factors(self) -> List[CholeskyFactor]:
        return [F for group in self._entries.values() for _, F in group]


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: List[float] = field(default_factory=list)
    ritz_min: float = float("nan")
    ritz_max: float = float("nan")
    converged: bool = False
    alphas: List[float] = field(default_factory=list, repr=False)
    betas: List[float] = field(default_factory=list, repr=False)
    residual_kind: str = "true"

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")

    @property
    def condition_estimate(self) -> float:
        return self.ritz_max / self.ritz_min


def lanczos_tridiagonal(alphas, betas):
    """Diagonal and off-diagonal of the Lanczos matrix implied by CG.

    ``betas[j]`` is the coefficient that forms direction ``j+1``.
    """
    a = np.asarray(alphas, dtype=float)
    b = np.asarray(betas, dtype=float)[: len(a) - 1]
    diag = 1.0 / a
    diag[1:] += b / a[:-1]
    off = np.sqrt(b) / a[:-1]
    return diag, off


def ritz_extremes(alphas, betas):
    """Smallest and largest Ritz values of the preconditioned operator."""
    if len(alphas) < 2:
        raise ValueError("need at least two CG iterations to form Ritz values")
    diag, off = lanczos_tridiagonal(alphas, betas)
    lo = scipy.linalg.eigvalsh_tridiagonal(diag, off, select="i", select_range=(0, 0),
                                           lapack_driver="stebz")
    hi = scipy.linalg.eigvalsh_tridiagonal(diag, off, select="i",
                                           select_range=(len(diag) - 1, len(diag) - 1),
                                           lapack_driver="stebz")
    return float(lo[0]), float(hi[0])


def pcg(A, b, precond: Optional[Callable[[np.ndarray], np.ndarray]] = None, tol: float = 1e-6,
        max_iter: int = 500, x0: Optional[np.ndarray] = None, callback=None):
    """Preconditioned CG stopped on the true relative residual.

    The recurrence residual drives the test; when it drops below ``tol``
    the true residual ``b - A x`` is recomputed, and iteration resumes from it
    if it is still too large. Returns ``(x, SolveReport)``.
    """
    b = np.asarray(b, dtype=float)
    M = precond if precond is not None else (lambda r: r.copy())
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    report = SolveReport()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        report.residual_history.append(0.0)
        report.converged = True
        return x, report
    r = b - A @ x
    report.residual_history.append(np.linalg.norm(r) / bnorm)
    if report.residual_history[-1] < tol:
        report.converged = True
        return x, report
    z = M(r)
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, max_iter + 1):
        q = A @ p
        pq = float(p @ q)
        if pq <= 0 or rz <= 0:
            log.warning("pcg breakdown at iteration %d (p.Ap=%g, r.z=%g)", it, pq, rz)
            break
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        rel = np.linalg.norm(r) / bnorm
        report.alphas.append(alpha)
        report.iterations = it
        if rel < tol:
            r_true = b - A @ x
            rel = np.linalg.norm(r_true) / bnorm
            if rel >= tol:
                r = r_true
        report.residual_history.append(rel)
        if callback is not None:
            callback(it, x, rel)
        if rel < tol:
            report.converged = True
            break
        z = M(r)
        rz_new = float(r @ z)
        beta = rz_new / rz
        report.betas.append(beta)
        rz = rz_new
        p = z + beta * p
    if report.iterations >= 2:
        report.ritz_min, report.ritz_max = ritz_extremes(report.alphas, report.betas)
    elif report.iterations == 1:
        report.ritz_min = report.ritz_max = 1.0 / report.alphas[0]
    return x, report


def operator_matrix(apply: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    """Dense matrix of a linear operator, formed column by column."""
    out = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        out[:, j] = apply(e)
        e[j] = 0.0
    return out
