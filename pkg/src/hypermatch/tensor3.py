"""Sparse symmetric third-order affinity tensors.

Only strictly third-order terms are stored: one canonical row ``(a, b, c)``
with ``a < b < c`` per unordered triple. The symmetrized tensor holds the
weight ``w`` at all six orderings of ``(a, b, c)``, so every contraction
expands a canonical entry into its six permutations on the fly.

Correspondence ``(i, j)`` (source point ``i``, target point ``j``) has the
row-major linear index ``i * n2 + j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DiagonalEntry, DimensionMismatch, FormatError, IndexOutOfRange

__all__ = [
    "ProblemDims",
    "SparseTensor3",
    "TensorStats",
    "canonicalize",
    "eval_form",
    "grad_vector",
    "slice_matrix",
    "stats",
    "read_tensor",
    "write_tensor",
]


@dataclass(frozen=True)
class ProblemDims:
    n1: int
    n2: int

    def __post_init__(self):
        if not (1 <= self.n1 <= self.n2):
            raise DimensionMismatch(f"need 1 <= n1 <= n2, got n1={self.n1}, n2={self.n2}")

    @property
    def n(self) -> int:
        return self.n1 * self.n2

    def index(self, i: int, j: int) -> int:
        return i * self.n2 + j

    def unravel(self, a: int) -> tuple[int, int]:
        return divmod(int(a), self.n2)


@dataclass(frozen=True)
class TensorStats:
    T: int
    K: float
    L: float


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class SparseTensor3:
    """Immutable canonical sparse tensor. Build it with :func:`canonicalize`.

    ``idx`` is an ``(m, 3)`` int array of strictly increasing rows sorted
    lexicographically; ``weights`` the matching nonnegative floats.
    """

    __slots__ = ("dims", "idx", "weights", "_incidence", "_pairs")

    def __init__(self, dims: ProblemDims, idx: np.ndarray, weights: np.ndarray):
        self.dims = dims
        self.idx = _frozen(np.asarray(idx, dtype=np.int64).reshape(-1, 3))
        self.weights = _frozen(np.asarray(weights, dtype=np.float64).ravel())
        self._incidence = None
        self._pairs = None

    @property
    def n(self) -> int:
        return self.dims.n

    @property
    def nnz(self) -> int:
        return len(self.weights)

    @property
    def entries(self) -> list[tuple[int, int, int, float]]:
        return [(int(a), int(b), int(c), float(w)) for (a, b, c), w in zip(self.idx, self.weights)]

    def __repr__(self):
        return f"SparseTensor3(n1={self.dims.n1}, n2={self.dims.n2}, nnz={self.nnz})"

    def scaled(self, s: float) -> "SparseTensor3":
        return SparseTensor3(self.dims, self.idx, self.weights * float(s))

    @property
    def incidence(self):
        """CSR-style map index -> ids of entries containing that index."""
        if self._incidence is None:
            flat = self.idx.ravel()
            ids = np.repeat(np.arange(self.nnz), 3)
            order = np.argsort(flat, kind="stable")
            ptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(np.bincount(flat, minlength=self.n), out=ptr[1:])
            self._incidence = (_frozen(ptr), _frozen(ids[order]))
        return self._incidence

    @property
    def pair_incidence(self):
        """Sorted unordered-pair codes ``s * n + t`` (``s < t``), range
        pointers into them, and for each slot the third index and weight."""
        if self._pairs is None:
            a, b, c = self.idx.T
            n = self.n
            codes = np.concatenate([a * n + b, a * n + c, b * n + c])
            third = np.concatenate([c, b, a])
            w = np.tile(self.weights, 3)
            order = np.argsort(codes, kind="stable")
            codes, third, w = codes[order], third[order], w[order]
            keys, starts = np.unique(codes, return_index=True)
            ptr = np.append(starts, len(codes)).astype(np.int64)
            self._pairs = (_frozen(keys), _frozen(ptr), _frozen(third), _frozen(w))
        return self._pairs


def canonicalize(raw_entries, dims: ProblemDims, drop_diagonal: bool = False) -> SparseTensor3:
    """Merge raw ``(i, j, k, w)`` entries into canonical ``i < j < k`` form.

    Duplicate unordered triples have their weights summed. Entries with a
    repeated index raise :class:`DiagonalEntry` unless ``drop_diagonal``.
    """
    raw = np.asarray(raw_entries, dtype=np.float64)
    if raw.size == 0:
        return SparseTensor3(dims, np.zeros((0, 3), np.int64), np.zeros(0))
    raw = raw.reshape(-1, 4)
    ijk_f = raw[:, :3]
    ijk = ijk_f.astype(np.int64)
    if np.any(ijk != ijk_f):
        raise IndexOutOfRange("tensor indices must be integers")
    w = raw[:, 3]
    if np.any(ijk < 0) or np.any(ijk >= dims.n):
        raise IndexOutOfRange(f"indices must lie in [0, {dims.n})")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise FormatError("weights must be finite and nonnegative")
    ijk = np.sort(ijk, axis=1)
    diag = (ijk[:, 0] == ijk[:, 1]) | (ijk[:, 1] == ijk[:, 2])
    if np.any(diag):
        if not drop_diagonal:
            raise DiagonalEntry("entries with repeated indices are not third-order terms")
        ijk, w = ijk[~diag], w[~diag]
    if len(w) == 0:
        return SparseTensor3(dims, np.zeros((0, 3), np.int64), np.zeros(0))
    n = dims.n
    codes = (ijk[:, 0] * n + ijk[:, 1]) * n + ijk[:, 2]
    keys, inv = np.unique(codes, return_inverse=True)
    merged = np.zeros(len(keys))
    np.add.at(merged, inv.ravel(), w)
    a, rem = np.divmod(keys, n * n)
    b, c = np.divmod(rem, n)
    return SparseTensor3(dims, np.stack([a, b, c], axis=1), merged)


def _vec(v, n: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise DimensionMismatch(f"{name} must have shape ({n},), got {v.shape}")
    return v


def _is_binary(v: np.ndarray) -> bool:
    return bool(np.all((v == 0.0) | (v == 1.0)))


def eval_form(F: SparseTensor3, x, y, z) -> float:
    """Trilinear form ``sum_{ijk} F_ijk x_i y_j z_k`` of the symmetrized tensor."""
    n = F.n
    x, y, z = _vec(x, n, "x"), _vec(y, n, "y"), _vec(z, n, "z")
    if F.nnz == 0:
        return 0.0
    a, b, c = F.idx.T
    terms = (
        x[a] * (y[b] * z[c] + y[c] * z[b])
        + x[b] * (y[a] * z[c] + y[c] * z[a])
        + x[c] * (y[a] * z[b] + y[b] * z[a])
    )
    return float(np.dot(F.weights, terms))


def grad_vector(F: SparseTensor3, y, z) -> np.ndarray:
    """Vector ``r -> sum_{st} F_rst y_s z_t``.

    Binary ``y`` and ``z`` go through the pair index, touching only entries
    that contain an active pair; anything else sweeps all entries.
    """
    n = F.n
    y, z = _vec(y, n, "y"), _vec(z, n, "z")
    if F.nnz == 0:
        return np.zeros(n)
    if _is_binary(y) and _is_binary(z):
        return _grad_pairs(F, y, z)
    a, b, c = F.idx.T
    w = F.weights
    out = np.bincount(a, weights=w * (y[b] * z[c] + y[c] * z[b]), minlength=n)
    out += np.bincount(b, weights=w * (y[a] * z[c] + y[c] * z[a]), minlength=n)
    out += np.bincount(c, weights=w * (y[a] * z[b] + y[b] * z[a]), minlength=n)
    return out


def _grad_pairs(F: SparseTensor3, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    n = F.n
    keys, ptr, third, w = F.pair_incidence
    s_idx = np.flatnonzero(y)
    t_idx = np.flatnonzero(z)
    s, t = np.meshgrid(s_idx, t_idx, indexing="ij")
    s, t = s.ravel(), t.ravel()
    keep = s != t
    s, t = s[keep], t[keep]
    if len(s) == 0:
        return np.zeros(n)
    codes = np.minimum(s, t) * n + np.maximum(s, t)
    pos = np.searchsorted(keys, codes)
    pos_c = np.minimum(pos, len(keys) - 1)
    hit = keys[pos_c] == codes
    pos = pos_c[hit]
    scale = (y[s] * z[t])[hit]
    lo, hi = ptr[pos], ptr[pos + 1]
    lens = hi - lo
    total = int(lens.sum())
    if total == 0:
        return np.zeros(n)
    slot = np.repeat(lo - np.cumsum(lens) + lens, lens) + np.arange(total)
    return np.bincount(third[slot], weights=w[slot] * np.repeat(scale, lens), minlength=n)


def slice_matrix(F: SparseTensor3, x) -> sp.csr_matrix:
    """Symmetric sparse matrix ``(s, t) -> sum_r F_rst x_r``."""
    n = F.n
    x = _vec(x, n, "x")
    if F.nnz == 0:
        return sp.csr_matrix((n, n))
    if _is_binary(x):
        ptr, ids = F.incidence
        active = np.flatnonzero(x)
        lens = ptr[active + 1] - ptr[active]
        sel = ids[np.repeat(ptr[active] - np.cumsum(lens) + lens, lens) + np.arange(int(lens.sum()))]
        r = np.repeat(active, lens)
        tri = F.idx[sel]
        w = F.weights[sel] * x[r]
        # the two members of each selected entry other than r
        others = tri[tri != r[:, None]].reshape(-1, 2)
        rows, cols = others[:, 0], others[:, 1]
    else:
        a, b, c = F.idx.T
        wt = F.weights
        rows = np.concatenate([b, a, a])
        cols = np.concatenate([c, c, b])
        w = np.concatenate([wt * x[a], wt * x[b], wt * x[c]])
    # rows < cols throughout; U + U^T is then symmetric bit for bit
    U = sp.coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    U.sum_duplicates()
    return (U + U.T).tocsr()


def stats(F: SparseTensor3) -> TensorStats:
    """Entry counts of the symmetrized tensor. ``K`` and ``L`` average the
    symmetrized entries touching each occupied index pair / single index."""
    if F.nnz == 0:
        return TensorStats(T=0, K=0.0, L=0.0)
    keys, ptr, _, _ = F.pair_incidence
    per_pair = np.diff(ptr)
    per_index = np.bincount(F.idx.ravel(), minlength=F.n)
    per_index = per_index[per_index > 0]
    return TensorStats(T=6 * F.nnz, K=6.0 * float(per_pair.mean()), L=6.0 * float(per_index.mean()))


def write_tensor(F: SparseTensor3, fh) -> None:
    """Write the text format: header ``n1 n2 nnz`` then ``a b c w`` lines."""
    fh.write(f"{F.dims.n1} {F.dims.n2} {F.nnz}\n")
    for (a, b, c), w in zip(F.idx.tolist(), F.weights.tolist()):
        fh.write(f"{a} {b} {c} {w!r}\n")


def read_tensor(fh) -> SparseTensor3:
    lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise FormatError("empty tensor file")
    try:
        n1, n2, nnz = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise FormatError(f"bad header {lines[0]!r}") from exc
    dims = ProblemDims(n1, n2)
    body = lines[1:]
    if len(body) != nnz:
        raise FormatError(f"header announces {nnz} entries, found {len(body)}")
    idx = np.zeros((nnz, 3), dtype=np.int64)
    w = np.zeros(nnz)
    prev = None
    for row, line in enumerate(body):
        toks = line.split()
        if len(toks) != 4:
            raise FormatError(f"line {row + 2}: expected 'a b c w'")
        try:
            a, b, c = int(toks[0]), int(toks[1]), int(toks[2])
            wt = float(toks[3])
        except ValueError as exc:
            raise FormatError(f"line {row + 2}: {exc}") from exc
        if not (0 <= a < b < c < dims.n):
            raise FormatError(f"line {row + 2}: non-canonical or out-of-range indices {a} {b} {c}")
        if not (np.isfinite(wt) and wt >= 0):
            raise FormatError(f"line {row + 2}: weight must be finite and nonnegative")
        if prev is not None and (a, b, c) <= prev:
            raise FormatError(f"line {row + 2}: entries must be strictly increasing")
        prev = (a, b, c)
        idx[row] = (a, b, c)
        w[row] = wt
    return SparseTensor3(dims, idx, w)


def from_triples(dims: ProblemDims, triples: Iterable[Sequence[int]], weights: Iterable[float]) -> SparseTensor3:
    """Convenience wrapper over :func:`canonicalize` for parallel sequences."""
    rows = [(t[0], t[1], t[2], w) for t, w in zip(triples, weights)]
    return canonicalize(rows, dims)
