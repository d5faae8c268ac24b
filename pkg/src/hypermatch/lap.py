"""Exact rectangular linear assignment (maximization) by the Hungarian method."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadShape, DimensionMismatch, NonFiniteEntry, NotAnAssignment
from .tensor3 import ProblemDims


@dataclass(frozen=True)
class AssignmentVec:
    """Injective map source -> target; ``cols[i]`` is the target of row ``i``."""

    dims: ProblemDims
    cols: tuple[int, ...]

    def __post_init__(self):
        cols = tuple(int(c) for c in self.cols)
        object.__setattr__(self, "cols", cols)
        if len(cols) != self.dims.n1:
            raise NotAnAssignment(f"expected {self.dims.n1} columns, got {len(cols)}")
        if any(c < 0 or c >= self.dims.n2 for c in cols):
            raise NotAnAssignment("column index out of range")
        if len(set(cols)) != len(cols):
            raise NotAnAssignment("two rows share a column")

    def to_vector(self) -> np.ndarray:
        x = np.zeros(self.dims.n)
        x[np.arange(self.dims.n1) * self.dims.n2 + np.asarray(self.cols, dtype=np.int64)] = 1.0
        return x

    def to_matrix(self) -> np.ndarray:
        return self.to_vector().reshape(self.dims.n1, self.dims.n2)

    @classmethod
    def from_vector(cls, x, dims: ProblemDims) -> "AssignmentVec":
        x = np.asarray(x)
        if x.shape != (dims.n,) or not np.all((x == 0) | (x == 1)):
            raise NotAnAssignment("vector is not binary of length n")
        X = x.reshape(dims.n1, dims.n2)
        if not np.all(X.sum(axis=1) == 1):
            raise NotAnAssignment("each row must hold exactly one 1")
        return cls(dims, tuple(int(j) for j in X.argmax(axis=1)))

    @classmethod
    def identity(cls, dims: ProblemDims) -> "AssignmentVec":
        return cls(dims, tuple(range(dims.n1)))


# below this many columns plain Python lists beat per-row numpy overhead
SMALL_COLS = 64


def _hungarian_small(cost: np.ndarray) -> np.ndarray:
    """List-based twin of :func:`_hungarian_vec` with the same pivoting order."""
    n, m = cost.shape
    c = cost.tolist()
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    owner = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            row = c[i0 - 1]
            ui = u[i0]
            delta, j1 = inf, 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta, j1 = minv[j], j
            for j in range(m + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    cols = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if owner[j]:
            cols[owner[j] - 1] = j - 1
    return cols


def _hungarian_min(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost assignment of every row of an ``n x m`` matrix, ``n <= m``.

    Shortest augmenting path with dual potentials; rows are inserted in
    ascending order and ties resolve to the lowest column index.
    """
    if cost.shape[1] <= SMALL_COLS:
        return _hungarian_small(cost)
    return _hungarian_vec(cost)


def _hungarian_vec(cost: np.ndarray) -> np.ndarray:
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    owner = np.zeros(m + 1, dtype=np.int64)  # owner[j]: 1-based row on column j, 0 = free
    way = np.zeros(m + 1, dtype=np.int64)
    c = np.zeros((n + 1, m + 1))
    c[1:, 1:] = cost
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used[1:]
            cur = c[i0, 1:] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    cols = np.empty(n, dtype=np.int64)
    taken = np.flatnonzero(owner[1:])
    cols[owner[1:][taken] - 1] = taken
    return cols


def solve_lap(profit) -> tuple[AssignmentVec, float]:
    """Maximize ``sum_i profit[i, cols[i]]`` over injective ``cols``."""
    profit = np.asarray(profit, dtype=np.float64)
    if profit.ndim != 2 or profit.shape[0] < 1 or profit.shape[0] > profit.shape[1]:
        raise BadShape(f"profit must be n1 x n2 with 1 <= n1 <= n2, got {profit.shape}")
    if not np.all(np.isfinite(profit)):
        raise NonFiniteEntry("profit matrix has non-finite entries")
    n1, n2 = profit.shape
    # shifting by the max keeps costs nonnegative without changing the argmin
    cols = _hungarian_min(profit.max() - profit)
    value = float(profit[np.arange(n1), cols].sum())
    return AssignmentVec(ProblemDims(n1, n2), tuple(cols.tolist())), value


def argmax_over_M(g, dims: ProblemDims) -> AssignmentVec:
    """Assignment maximizing the linear function ``<x, g>``."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (dims.n,):
        raise DimensionMismatch(f"g must have shape ({dims.n},), got {g.shape}")
    x, _ = solve_lap(g.reshape(dims.n1, dims.n2))
    return x
