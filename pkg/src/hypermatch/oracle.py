"""Brute-force references for tests.

Nothing here calls the sparse contraction code: tensors are expanded into
dense arrays and every quantity is summed or enumerated directly. Size
guards raise instead of approximating.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NotSymmetric, TooLarge
from .lap import AssignmentVec
from .modform import ModifiedForm
from .tensor3 import ProblemDims, SparseTensor3

DENSE_LIMIT = 20
DENSE4_LIMIT = 9
SCORE_LIMIT = 10**5
FORM_LIMIT = 10**6


@dataclass(frozen=True)
class EnumeratedM:
    dims: ProblemDims
    items: tuple

    def __len__(self):
        return len(self.items)

    def vectors(self) -> np.ndarray:
        return np.array([a.to_vector() for a in self.items])


def count_M(dims: ProblemDims) -> int:
    out = 1
    for k in range(dims.n1):
        out *= dims.n2 - k
    return out


def enumerate_M(dims: ProblemDims, limit: int = SCORE_LIMIT) -> EnumeratedM:
    """All assignments in lexicographic order of their column tuples."""
    if count_M(dims) > limit:
        raise TooLarge(f"|M| = {count_M(dims)} exceeds {limit}")
    items = tuple(AssignmentVec(dims, cols) for cols in itertools.permutations(range(dims.n2), dims.n1))
    return EnumeratedM(dims, items)


def dense_tensor(F: SparseTensor3) -> np.ndarray:
    n = F.n
    if n > DENSE_LIMIT:
        raise TooLarge(f"dense tensor needs n <= {DENSE_LIMIT}, got {n}")
    T = np.zeros((n, n, n))
    for (a, b, c), w in zip(F.idx.tolist(), F.weights.tolist()):
        for p, q, r in itertools.permutations((a, b, c)):
            T[p, q, r] = w
    return T


def dense_eval(F: SparseTensor3, x, y, z) -> float:
    T = dense_tensor(F)
    return float(np.einsum("ijk,i,j,k->", T, np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)))


def dense_g(n: int) -> np.ndarray:
    """``sum_i e_i (x) e_i (x) e_i`` with ``e_i = 1/3 + 2/3 unit_i``, built entrywise."""
    E = np.full((n, n), 1.0 / 3.0) + np.eye(n) * (2.0 / 3.0)
    G = np.zeros((n, n, n))
    for i in range(n):
        G += np.multiply.outer(np.multiply.outer(E[i], E[i]), E[i])
    return G


def dense_lifted(F: SparseTensor3) -> np.ndarray:
    """``F4[i,j,k,l] = F[i,j,k] + F[i,j,l] + F[i,k,l] + F[j,k,l]`` as a dense array."""
    n = F.n
    if n > DENSE4_LIMIT:
        raise TooLarge(f"dense lifted tensor needs n <= {DENSE4_LIMIT}, got {n}")
    T = dense_tensor(F)
    F4 = np.zeros((n, n, n, n))
    for i, j, k, l in itertools.product(range(n), repeat=4):
        F4[i, j, k, l] = T[i, j, k] + T[i, j, l] + T[i, k, l] + T[j, k, l]
    return F4


def dense_lifted_eval(F: SparseTensor3, x, y, z, t) -> float:
    F4 = dense_lifted(F)
    vs = [np.asarray(v, float) for v in (x, y, z, t)]
    return float(np.einsum("ijkl,i,j,k,l->", F4, *vs))


def _unpack(F):
    if isinstance(F, ModifiedForm):
        return F.base, F.alpha
    return F, 0.0


def _dense_alpha(F) -> np.ndarray:
    base, alpha = _unpack(F)
    T = dense_tensor(base)
    if alpha:
        T = T + alpha * dense_g(base.n)
    return T


def brute_score_max(F, dims: ProblemDims | None = None) -> tuple[AssignmentVec, float]:
    """Exhaustive ``max_{x in M} S_alpha(x)``; ties keep the lexicographically first."""
    base, _ = _unpack(F)
    dims = dims or base.dims
    T = _dense_alpha(F)
    best, best_val = None, -np.inf
    for a in enumerate_M(dims).items:
        x = a.to_vector()
        val = float(np.einsum("ijk,i,j,k->", T, x, x, x))
        if val > best_val:
            best, best_val = a, val
    return best, best_val


def brute_form_max(F, dims: ProblemDims | None = None) -> float:
    """Exhaustive ``max_{x,y,z in M} F_alpha(x, y, z)``."""
    base, _ = _unpack(F)
    dims = dims or base.dims
    m = count_M(dims)
    if m**3 > FORM_LIMIT:
        raise TooLarge(f"|M|^3 = {m**3} exceeds {FORM_LIMIT}")
    T = _dense_alpha(F)
    X = enumerate_M(dims).vectors()
    # all F(x, y, z) at once: contract each axis with the stacked assignments
    vals = np.einsum("ijk,ai,bj,ck->abc", T, X, X, X)
    return float(vals.max())


def brute_tuple_thresholds(F: SparseTensor3, dims: ProblemDims | None = None):
    """Yield ``(x, y, z, threshold)`` for every non-homogeneous tuple, computed densely."""
    dims = dims or F.dims
    T = dense_tensor(F)
    G = dense_g(F.n)
    X = enumerate_M(dims).vectors()
    m = len(X)
    if m**3 > FORM_LIMIT:
        raise TooLarge(f"|M|^3 = {m**3} exceeds {FORM_LIMIT}")
    Fv = np.einsum("ijk,ai,bj,ck->abc", T, X, X, X)
    Gv = np.einsum("ijk,ai,bj,ck->abc", G, X, X, X)
    for a, b, c in itertools.product(range(m), repeat=3):
        if a == b == c:
            continue
        top = max(Fv[a, a, a], Fv[b, b, b], Fv[c, c, c])
        lam = (Fv[a, b, c] - top) / (Gv[a, a, a] - Gv[a, b, c])
        yield a, b, c, float(lam)


def brute_lap(profit) -> tuple[tuple[int, ...], float]:
    profit = np.asarray(profit, dtype=np.float64)
    n1, n2 = profit.shape
    best, best_val = None, -np.inf
    for cols in itertools.permutations(range(n2), n1):
        val = float(sum(profit[i, c] for i, c in enumerate(cols)))
        if val > best_val:
            best, best_val = cols, val
    return best, best_val


def min_eig_sym(A, tol: float = 1e-10, max_sweeps: int = 100) -> float:
    """Smallest eigenvalue by cyclic Jacobi rotations."""
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSymmetric("matrix must be square")
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > 1e-10 * scale:
        raise NotSymmetric("matrix is not symmetric")
    A = (A + A.T) / 2.0
    n = A.shape[0]
    if n == 1:
        return float(A[0, 0])
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows and columns p, q
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
    return float(np.min(np.diag(A)))


def hessian_scaled(F, x) -> np.ndarray:
    """``6 F_alpha(x, ., .)`` densely, i.e. the Hessian of ``S_alpha`` at ``x``."""
    T = _dense_alpha(F)
    return 6.0 * np.einsum("ijk,i->jk", T, np.asarray(x, float))
