"""Modification of the multilinear form by the rank-structured form G.

``G(x, y, z) = sum_i <e_i, x><e_i, y><e_i, z>`` with the perturbed basis
``e_i = 1/3 * ones + 2/3 * unit_i``. Since ``<e_i, v> = sum(v)/3 + 2 v_i/3``
every contraction of ``G`` costs ``O(n)``. ``G(x, x, x)`` is the same for
every assignment, so adding ``alpha * G`` shifts the score by a constant on
the feasible set while making the form convex enough for block ascent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigInvalid, DimensionMismatch, HomogeneousTuple, NotAnAssignment
from .tensor3 import ProblemDims, SparseTensor3, eval_form, grad_vector, slice_matrix

EPSILON = 1.0 / 3.0
# 1 / (eps * (1 - eps)^2) at eps = 1/3
BOUND_FACTOR = 27.0 / 4.0


def _check(v, dims: ProblemDims, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (dims.n,):
        raise DimensionMismatch(f"{name} must have shape ({dims.n},), got {v.shape}")
    return v


def ebar_dot(v: np.ndarray) -> np.ndarray:
    """All inner products ``<e_i, v>`` at once."""
    return v.sum() * EPSILON + (1.0 - EPSILON) * v


def g_eval(x, y, z, dims: ProblemDims) -> float:
    x, y, z = _check(x, dims, "x"), _check(y, dims, "y"), _check(z, dims, "z")
    return float(np.sum(ebar_dot(x) * ebar_dot(y) * ebar_dot(z)))


def g_grad(y, z, dims: ProblemDims) -> np.ndarray:
    y, z = _check(y, dims, "y"), _check(z, dims, "z")
    ab = ebar_dot(y) * ebar_dot(z)
    return EPSILON * ab.sum() + (1.0 - EPSILON) * ab


class GMatrix:
    """Symmetric matrix ``scale * sum_i d_i e_i e_i^T`` kept in closed form.

    Expanded, it equals ``scale * (D/9 * 11^T + 2/9 (d 1^T + 1 d^T) + 4/9 diag(d))``
    with ``D = sum(d)``; products, rows and the diagonal cost ``O(n)`` each.
    """

    def __init__(self, d: np.ndarray, scale: float = 1.0):
        self.d = np.asarray(d, dtype=np.float64)
        self.scale = float(scale)
        self.total = float(self.d.sum())

    @property
    def shape(self):
        n = len(self.d)
        return (n, n)

    def scaled(self, s: float) -> "GMatrix":
        return GMatrix(self.d, self.scale * s)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        sv = v.sum()
        out = (self.total * sv / 9.0) + (2.0 / 9.0) * (self.d * sv + np.dot(self.d, v)) + (4.0 / 9.0) * self.d * v
        return self.scale * out

    def diagonal(self) -> np.ndarray:
        return self.scale * (self.total / 9.0 + (8.0 / 9.0) * self.d)

    def rows(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx)
        block = self.total / 9.0 + (2.0 / 9.0) * (self.d[idx][:, None] + self.d[None, :])
        block[np.arange(len(idx)), idx] += (4.0 / 9.0) * self.d[idx]
        return self.scale * block

    def toarray(self) -> np.ndarray:
        return self.rows(np.arange(len(self.d)))


def g_matrix(x, dims: ProblemDims) -> GMatrix:
    """Structured form of the matrix ``G(x, ., .)``."""
    x = _check(x, dims, "x")
    return GMatrix(ebar_dot(x))


def alpha_bound(F: SparseTensor3) -> float:
    """``27/4 * max_i ||F_i..||_F`` over slices of the symmetrized tensor.

    A canonical entry lands twice in each of its three slices (the two
    orderings led by that index).
    """
    if F.nnz == 0:
        return 0.0
    sq = np.bincount(F.idx.ravel(), weights=np.repeat(2.0 * F.weights**2, 3), minlength=F.n)
    return BOUND_FACTOR * float(np.sqrt(sq.max()))


@dataclass(frozen=True)
class ModifiedForm:
    """``F_alpha = F + alpha * G``."""

    base: SparseTensor3
    alpha: float = 0.0

    def __post_init__(self):
        if not (self.alpha >= 0 and np.isfinite(self.alpha)):
            raise ConfigInvalid(f"alpha must be a finite nonnegative number, got {self.alpha}")

    @property
    def dims(self) -> ProblemDims:
        return self.base.dims

    def eval(self, x, y, z) -> float:
        return mod_eval(self, x, y, z)

    def grad(self, y, z) -> np.ndarray:
        return mod_grad(self, y, z)

    def matrix(self, x):
        return mod_matrix(self, x)

    def score(self, x) -> float:
        return mod_eval(self, x, x, x)


def mod_eval(M: ModifiedForm, x, y, z) -> float:
    val = eval_form(M.base, x, y, z)
    if M.alpha:
        val += M.alpha * g_eval(x, y, z, M.dims)
    return val


def mod_grad(M: ModifiedForm, y, z) -> np.ndarray:
    out = grad_vector(M.base, y, z)
    if M.alpha:
        out = out + M.alpha * g_grad(y, z, M.dims)
    return out


def mod_matrix(M: ModifiedForm, x) -> tuple[sp.csr_matrix, GMatrix]:
    """``F_alpha(x, ., .)`` as the pair (sparse slice, scaled structured G)."""
    return slice_matrix(M.base, x), g_matrix(x, M.dims).scaled(M.alpha)


def is_assignment(v, dims: ProblemDims) -> bool:
    v = np.asarray(v)
    if v.shape != (dims.n,) or not np.all((v == 0) | (v == 1)):
        return False
    X = v.reshape(dims.n1, dims.n2)
    return bool(np.all(X.sum(axis=1) == 1) and np.all(X.sum(axis=0) <= 1))


def alpha_threshold(F: SparseTensor3, x, y, z) -> float:
    """Smallest ``alpha`` for which ``F_alpha(x, y, z) <= max_u F_alpha(u, u, u)``.

    Valid for non-homogeneous tuples of assignments, where the denominator
    ``G(x, x, x) - G(x, y, z)`` is strictly positive. May be negative.
    """
    dims = F.dims
    vs = [_check(v, dims, name) for v, name in ((x, "x"), (y, "y"), (z, "z"))]
    for v in vs:
        if not is_assignment(v, dims):
            raise NotAnAssignment("alpha_threshold needs assignment vectors")
    x, y, z = vs
    if np.array_equal(x, y) and np.array_equal(y, z):
        raise HomogeneousTuple("x = y = z has no finite threshold")
    top = max(eval_form(F, u, u, u) for u in (x, y, z))
    num = eval_form(F, x, y, z) - top
    den = g_eval(x, x, x, dims) - g_eval(x, y, z, dims)
    return num / den
