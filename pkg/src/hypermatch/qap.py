"""Ascent heuristics for ``max_{y in M} <y, A y>`` with symmetric nonnegative ``A``.

Both subroutines are wrapped so that the returned assignment never scores
below the starting one, which is all the block-ascent solvers rely on.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, NotAnAssignment
from .lap import AssignmentVec, argmax_over_M, solve_lap
from .modform import GMatrix
from .tensor3 import ProblemDims

IPFP_MAX_ITER = 50
MPM_MAX_ITER = 100
STAGNATION_TOL = 1e-10


class QapOperator:
    """``A = sparse + (h 1^T + 1 h^T) + G`` over the correspondence grid.

    Any of the three parts may be absent. ``G`` is a :class:`GMatrix` with
    its scale already folded in.
    """

    def __init__(self, dims: ProblemDims, sparse=None, gpart: GMatrix | None = None, lowrank=None):
        self.dims = dims
        n = dims.n
        if sparse is not None:
            sparse = sp.csr_matrix(sparse)
            if sparse.shape != (n, n):
                raise DimensionMismatch(f"sparse part must be {n} x {n}")
        self.sparse = sparse
        self.gpart = gpart if (gpart is not None and gpart.scale != 0.0) else None
        self.lowrank = None if lowrank is None else np.asarray(lowrank, dtype=np.float64)

    @classmethod
    def from_pair(cls, pair, dims: ProblemDims) -> "QapOperator":
        sparse, gpart = pair
        return cls(dims, sparse=sparse, gpart=gpart)

    @classmethod
    def from_dense(cls, A, dims: ProblemDims) -> "QapOperator":
        return cls(dims, sparse=sp.csr_matrix(np.asarray(A, dtype=np.float64)))

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        out = np.zeros(self.dims.n)
        if self.sparse is not None:
            out += self.sparse @ v
        if self.gpart is not None:
            out += self.gpart.matvec(v)
        if self.lowrank is not None:
            out += self.lowrank * v.sum() + np.dot(self.lowrank, v)
        return out

    def quad(self, v) -> float:
        v = np.asarray(v, dtype=np.float64)
        return float(np.dot(v, self.matvec(v)))

    def rows(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        out = np.zeros((len(idx), self.dims.n))
        if self.sparse is not None:
            out += self.sparse[idx].toarray()
        if self.gpart is not None:
            out += self.gpart.rows(idx)
        if self.lowrank is not None:
            out += self.lowrank[idx][:, None] + self.lowrank[None, :]
        return out

    def diagonal(self) -> np.ndarray:
        out = np.zeros(self.dims.n)
        if self.sparse is not None:
            out += self.sparse.diagonal()
        if self.gpart is not None:
            out += self.gpart.diagonal()
        if self.lowrank is not None:
            out += 2.0 * self.lowrank
        return out

    def toarray(self) -> np.ndarray:
        return self.rows(np.arange(self.dims.n))


def _start(A: QapOperator, y0) -> AssignmentVec:
    if not isinstance(y0, AssignmentVec):
        raise NotAnAssignment("the starting point must be an AssignmentVec")
    if y0.dims != A.dims:
        raise DimensionMismatch("starting point and operator disagree on dimensions")
    return y0


def _keep_ascent(A: QapOperator, y0: AssignmentVec, candidates) -> AssignmentVec:
    best, best_val = y0, A.quad(y0.to_vector())
    for cand in candidates:
        val = A.quad(cand.to_vector())
        if val > best_val:
            best, best_val = cand, val
    return best


def psi_ipfp(A: QapOperator, y0: AssignmentVec, max_iter: int = IPFP_MAX_ITER) -> AssignmentVec:
    """Integer projected fixed point iteration.

    Each step moves from the current point towards the assignment that
    maximizes the linearization, with an exact line search on the quadratic.
    """
    y0 = _start(A, y0)
    dims = A.dims
    y = y0.to_vector()
    found = []
    for _ in range(max_iter):
        grad = A.matvec(y)
        b = argmax_over_M(grad, dims)
        found.append(b)
        d = b.to_vector() - y
        slope = float(np.dot(grad, d))
        if slope <= STAGNATION_TOL * max(1.0, abs(float(np.dot(grad, y)))):
            break
        curv = A.quad(d)
        t = 1.0 if curv >= 0 else min(1.0, -slope / curv)
        y = y + t * d
        if t == 1.0:
            # landed on a vertex; the next linearization starts from it
            continue
    found.append(solve_lap(y.reshape(dims.n1, dims.n2))[0])
    return _keep_ascent(A, y0, found)


DENSE_POOL_LIMIT = 3000


def _pooled(A: QapOperator, x: np.ndarray, chunk: int = 512) -> np.ndarray:
    dims = A.dims
    n1, n2 = dims.n1, dims.n2
    out = np.empty(dims.n)
    src = np.repeat(np.arange(n1), n2)
    diag = A.diagonal()
    for lo in range(0, dims.n, chunk):
        rows = np.arange(lo, min(lo + chunk, dims.n))
        W = (A.rows(rows) * x[None, :]).reshape(len(rows), n1, n2)
        best = W.max(axis=2)
        best[np.arange(len(rows)), src[rows]] = 0.0
        out[rows] = best.sum(axis=1) + x[rows] * diag[rows]
    return out


class _DensePool:
    """Pooling against a materialized matrix with preallocated buffers."""

    def __init__(self, A: QapOperator):
        dims = A.dims
        self.shape = (dims.n, dims.n1, dims.n2)
        self.M = A.toarray()
        self.diag = np.diagonal(self.M).copy()
        self.own = (np.arange(dims.n), np.repeat(np.arange(dims.n1), dims.n2))
        self.buf = np.empty_like(self.M)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        np.multiply(self.M, x[None, :], out=self.buf)
        best = self.buf.reshape(self.shape).max(axis=2)
        best[self.own] = 0.0
        return best.sum(axis=1) + x * self.diag


def psi_mpm(A: QapOperator, y0: AssignmentVec, max_iter: int = MPM_MAX_ITER) -> AssignmentVec:
    """Max-pooling power iteration started at ``y0``, projected by the
    Hungarian method at the end.

    Candidate ``a = (i, j)`` collects ``x_a A_aa`` plus, for every other
    source point ``i'``, only its strongest supporting candidate.
    """
    y0 = _start(A, y0)
    dims = A.dims
    x = y0.to_vector()
    x /= np.linalg.norm(x)
    # small problems pool against the materialized matrix
    pool = _DensePool(A) if dims.n <= DENSE_POOL_LIMIT else (lambda v: _pooled(A, v))
    for _ in range(max_iter):
        nxt = pool(x)
        nrm = np.linalg.norm(nxt)
        if nrm == 0.0:
            break
        nxt /= nrm
        done = np.linalg.norm(nxt - x) <= STAGNATION_TOL * max(1.0, np.linalg.norm(x))
        x = nxt
        if done:
            break
    proj = solve_lap(x.reshape(dims.n1, dims.n2))[0]
    return _keep_ascent(A, y0, [proj])


PSI = {"ipfp": psi_ipfp, "mpm": psi_mpm}


def solve_qap(A: QapOperator, psi: str = "ipfp", start=None) -> AssignmentVec:
    """Stand-alone QAP solve from ``start`` (default all-ones, seeded by one LAP on ``A 1``)."""
    x = np.ones(A.dims.n) if start is None else np.asarray(start, dtype=np.float64)
    y0 = argmax_over_M(A.matvec(x), A.dims)
    return PSI[psi](A, y0)
