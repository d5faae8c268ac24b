"""Fourth-order form obtained by lifting a third-order tensor.

The lifted tensor ``F4[i,j,k,l] = F[i,j,k] + F[i,j,l] + F[i,k,l] + F[j,k,l]``
is never materialized. Contracting it against four vectors gives

    F4(x, y, z, t) = s(t) F(x,y,z) + s(z) F(x,y,t) + s(y) F(x,z,t) + s(x) F(y,z,t)

with ``s(v) = sum(v)``, so every operation reduces to third-order ones.
The modification uses ``G4 = sum_i e_i (x) e_i (x) e_i (x) e_i`` with the same
perturbed basis as the cubic case.
"""

from __future__ import annotations

import numpy as np

from .errors import HomogeneousTuple, NotAnAssignment
from .modform import EPSILON, GMatrix, ebar_dot, is_assignment
from .tensor3 import SparseTensor3, eval_form, grad_vector, slice_matrix


def eval4(F: SparseTensor3, x, y, z, t) -> float:
    x, y, z, t = (np.asarray(v, dtype=np.float64) for v in (x, y, z, t))
    return (
        t.sum() * eval_form(F, x, y, z)
        + z.sum() * eval_form(F, x, y, t)
        + y.sum() * eval_form(F, x, z, t)
        + x.sum() * eval_form(F, y, z, t)
    )


def grad4(F: SparseTensor3, x, y, z) -> np.ndarray:
    """Gradient of ``F4(x, y, z, .)``."""
    x, y, z = (np.asarray(v, dtype=np.float64) for v in (x, y, z))
    out = np.full(F.n, eval_form(F, x, y, z))
    out += z.sum() * grad_vector(F, x, y)
    out += y.sum() * grad_vector(F, x, z)
    out += x.sum() * grad_vector(F, y, z)
    return out


def slice4(F: SparseTensor3, x, y):
    """``F4(x, y, ., .)`` split as (sparse part, low-rank vector ``h``).

    The matrix equals ``sparse + h 1^T + 1 h^T`` with ``h = F(x, y, .)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    h = grad_vector(F, x, y)
    if np.array_equal(x, y):
        sparse = slice_matrix(F, x) * (2.0 * x.sum())
    else:
        sparse = slice_matrix(F, x) * y.sum() + slice_matrix(F, y) * x.sum()
    return sparse, h


def g4_eval(x, y, z, t) -> float:
    vals = [ebar_dot(np.asarray(v, dtype=np.float64)) for v in (x, y, z, t)]
    return float(np.sum(vals[0] * vals[1] * vals[2] * vals[3]))


def g4_grad(x, y, z) -> np.ndarray:
    p = ebar_dot(np.asarray(x, dtype=np.float64)) * ebar_dot(np.asarray(y, dtype=np.float64))
    p = p * ebar_dot(np.asarray(z, dtype=np.float64))
    return EPSILON * p.sum() + (1.0 - EPSILON) * p


def g4_matrix(x, y) -> GMatrix:
    return GMatrix(ebar_dot(np.asarray(x, dtype=np.float64)) * ebar_dot(np.asarray(y, dtype=np.float64)))


def alpha_bound4(F: SparseTensor3) -> float:
    """An ``alpha`` making the Hessian of the lifted score PSD at every assignment.

    On an assignment ``x`` with ``s(x) = n1`` the Hessian is ``12 (h 1^T + 1 h^T
    + 2 n1 F(x,.,.))`` plus ``12 alpha sum_i <e_i,x>^2 e_i e_i^T``. The last term
    is at least ``4 n1^2 / 81`` times the identity, while
    ``||h|| <= n1^2 max_ij ||F_ij.||`` and ``||F(x,.,.)|| <= n1 max_i ||F_i..||_F``.
    """
    if F.nnz == 0:
        return 0.0
    n = F.n
    idx, w = F.idx, F.weights
    slice_sq = np.bincount(idx.ravel(), weights=np.repeat(2.0 * w**2, 3), minlength=n)
    # fiber (a, b, .) holds each entry containing both a and b exactly once
    pairs = np.concatenate([idx[:, [0, 1]], idx[:, [0, 2]], idx[:, [1, 2]]])
    codes = pairs[:, 0] * n + pairs[:, 1]
    fiber_sq = np.bincount(codes, weights=np.tile(w**2, 3), minlength=n * n)
    fiber_max = float(np.sqrt(fiber_sq.max()))
    slice_max = float(np.sqrt(slice_sq.max()))
    return 81.0 / 4.0 * (2.0 * np.sqrt(n) * fiber_max + 2.0 * slice_max)


def alpha_threshold4(F: SparseTensor3, x, y, z, t) -> float:
    """Smallest ``alpha`` with ``F4_alpha(x,y,z,t) <= max_u F4_alpha(u,u,u,u)``."""
    dims = F.dims
    vs = [np.asarray(v, dtype=np.float64) for v in (x, y, z, t)]
    for v in vs:
        if not is_assignment(v, dims):
            raise NotAnAssignment("alpha_threshold4 needs assignment vectors")
    if all(np.array_equal(vs[0], v) for v in vs[1:]):
        raise HomogeneousTuple("x = y = z = t has no finite threshold")
    top = max(eval4(F, u, u, u, u) for u in vs)
    num = eval4(F, *vs) - top
    den = g4_eval(vs[0], vs[0], vs[0], vs[0]) - g4_eval(*vs)
    return num / den


__all__ = [
    "alpha_bound4",
    "alpha_threshold4",
    "eval4",
    "g4_eval",
    "g4_grad",
    "g4_matrix",
    "grad4",
    "slice4",
]
