"""Affinities between two 2-D point sets, a synthetic generator and metrics.

Third-order affinities compare triangles: each triple of points gets a
feature from its interior angles, and a correspondence triple
``((i1,j1), (i2,j2), (i3,j3))`` is weighted by ``exp(-gamma ||f_P - f_Q||^2)``.
Angles do not change under scaling, so the tensor is scale invariant.
Pairwise affinities compare distances instead.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllTriplesDegenerate,
    BadSigma,
    ConfigInvalid,
    DegenerateTriangle,
    FormatError,
    LengthMismatch,
    TooFewPoints,
)
from .lap import AssignmentVec
from .tensor3 import ProblemDims, SparseTensor3, canonicalize

DEFAULT_KNN = 300
DEFAULT_MAX_TRIPLES = 20000


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise FormatError(f"points must be an (m, 2) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise FormatError("point coordinates must be finite")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def to_dict(self) -> dict:
        return {"points": self.points.tolist()}

    @classmethod
    def from_dict(cls, obj) -> "PointSet":
        if not isinstance(obj, dict) or "points" not in obj:
            raise FormatError("point set must be an object with a 'points' list")
        return cls(np.asarray(obj["points"], dtype=np.float64))


@dataclass(frozen=True)
class AffinityConfig:
    """``gamma=None`` picks the inverse mean squared feature distance.

    ``triples_sampled=None`` means ``n**2`` with ``n = n1 * n2``, clipped to
    ``max_triples`` and to the number of available source triples.
    """

    gamma: float | None = None
    triples_sampled: int | None = None
    max_triples: int = DEFAULT_MAX_TRIPLES
    knn: int = DEFAULT_KNN
    min_area: float = 1e-12
    feature: str = "sines"
    seed: int = 0

    def __post_init__(self):
        if self.knn < 1:
            raise ConfigInvalid("knn must be >= 1")
        if self.triples_sampled is not None and self.triples_sampled < 1:
            raise ConfigInvalid("triples_sampled must be >= 1")
        if self.max_triples < 1:
            raise ConfigInvalid("max_triples must be >= 1")
        if self.gamma is not None and not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigInvalid("gamma must be positive")
        if self.feature not in ("sines", "angles"):
            raise ConfigInvalid("feature must be 'sines' or 'angles'")
        if not (self.min_area >= 0):
            raise ConfigInvalid("min_area must be nonnegative")


@dataclass(frozen=True)
class SyntheticConfig:
    n_in: int
    n_out: int = 0
    sigma: float = 0.0
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_in < 1:
            raise ConfigInvalid("n_in must be >= 1")
        if self.n_out < 0:
            raise ConfigInvalid("n_out must be >= 0")
        if not (self.sigma >= 0 and np.isfinite(self.sigma)):
            raise ConfigInvalid("sigma must be >= 0")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ConfigInvalid("scale must be > 0")


@dataclass(frozen=True)
class MatchProblem:
    source: PointSet
    target: PointSet
    ground_truth: tuple | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dims(self) -> ProblemDims:
        return ProblemDims(len(self.source), len(self.target))

    def to_dict(self) -> dict:
        gt = None if self.ground_truth is None else [int(j) for j in self.ground_truth]
        return {"source": self.source.to_dict(), "target": self.target.to_dict(), "ground_truth": gt}

    @classmethod
    def from_dict(cls, obj) -> "MatchProblem":
        try:
            src = PointSet.from_dict(obj["source"])
            tgt = PointSet.from_dict(obj["target"])
        except (KeyError, TypeError) as exc:
            raise FormatError("problem needs 'source' and 'target' point sets") from exc
        gt = obj.get("ground_truth")
        if gt is not None:
            gt = tuple(int(j) for j in gt)
            if len(gt) > len(src) or any(j < 0 or j >= len(tgt) for j in gt):
                raise FormatError("ground truth does not fit the point sets")
        return cls(src, tgt, gt)


def dump_json(obj, fh) -> None:
    # repr-precision floats round-trip exactly through json
    json.dump(obj.to_dict(), fh)
    fh.write("\n")


def load_problem(fh) -> MatchProblem:
    try:
        obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    return MatchProblem.from_dict(obj)


def load_pointset(fh) -> PointSet:
    try:
        obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    return PointSet.from_dict(obj)


def _features(pts: np.ndarray, triples: np.ndarray, kind: str):
    """Features and doubled areas for an ``(m, 3)`` array of index triples."""
    A, B, C = pts[triples[:, 0]], pts[triples[:, 1]], pts[triples[:, 2]]

    def corner(p, q, r):
        u, v = q - p, r - p
        cross = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        norms = np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            if kind == "sines":
                return cross / norms, cross
            dot = np.einsum("ij,ij->i", u, v)
            return np.arctan2(cross, dot), cross

    fa, area2 = corner(A, B, C)
    fb, _ = corner(B, C, A)
    fc, _ = corner(C, A, B)
    return np.stack([fa, fb, fc], axis=1), area2 / 2.0


def triangle_feature(ps: PointSet, triple, min_area: float = 1e-12, kind: str = "sines") -> np.ndarray:
    """Sines (or raw angles) of the interior angles at the three vertices, in order."""
    t = tuple(int(i) for i in triple)
    if len(t) != 3 or len(set(t)) != 3 or min(t) < 0 or max(t) >= len(ps):
        raise DegenerateTriangle(f"need three distinct valid indices, got {triple}")
    feat, area = _features(ps.points, np.array([t]), kind)
    if not area[0] >= max(min_area, 0.0) or area[0] == 0.0:
        raise DegenerateTriangle(f"triangle {t} has area {area[0]:.3g}")
    return feat[0]


def _source_triples(n1: int, cfg: AffinityConfig, dims: ProblemDims, rng) -> np.ndarray:
    combos = np.array(list(itertools.combinations(range(n1), 3)), dtype=np.int64)
    want = cfg.triples_sampled if cfg.triples_sampled is not None else dims.n**2
    want = min(want, cfg.max_triples, len(combos))
    if want == len(combos):
        return combos
    pick = np.sort(rng.choice(len(combos), size=want, replace=False))
    return combos[pick]


@dataclass(frozen=True)
class TensorBuild:
    """What :func:`build_tensor_details` produced, for inspection and tests."""

    tensor: SparseTensor3
    gamma: float
    source_triples: np.ndarray
    target_triples: np.ndarray
    pairs: np.ndarray  # (m, 2): rows into source_triples and target_triples
    sq_dist: np.ndarray


def build_tensor_details(P: PointSet, Q: PointSet, cfg: AffinityConfig | None = None) -> TensorBuild:
    cfg = cfg or AffinityConfig()
    n1, n2 = len(P), len(Q)
    if n1 < 3 or n2 < 3:
        raise TooFewPoints(f"need at least 3 points on each side, got {n1} and {n2}")
    dims = ProblemDims(n1, n2)
    rng = np.random.default_rng(cfg.seed)

    src = _source_triples(n1, cfg, dims, rng)
    fP, aP = _features(P.points, src, cfg.feature)
    ok = aP >= cfg.min_area
    ok &= aP > 0
    src, fP = src[ok], fP[ok]
    tgt = np.array(list(itertools.permutations(range(n2), 3)), dtype=np.int64)
    fQ, aQ = _features(Q.points, tgt, cfg.feature)
    ok = (aQ >= cfg.min_area) & (aQ > 0)
    tgt, fQ = tgt[ok], fQ[ok]
    if len(src) == 0 or len(tgt) == 0:
        raise AllTriplesDegenerate("every candidate triangle is degenerate")

    k = min(cfg.knn, len(tgt))
    rows, cols, dists = [], [], []
    qq = np.einsum("ij,ij->i", fQ, fQ)
    chunk = max(1, 2_000_000 // len(tgt))
    for lo in range(0, len(src), chunk):
        f = fP[lo:lo + chunk]
        d2 = np.maximum(np.einsum("ij,ij->i", f, f)[:, None] - 2.0 * f @ fQ.T + qq[None, :], 0.0)
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        for r in range(len(f)):
            cand = np.flatnonzero(d2[r] <= kth[r])
            # stable sort keeps ascending target index among equal distances
            cand = cand[np.argsort(d2[r, cand], kind="stable")[:k]]
            rows.append(np.full(len(cand), lo + r))
            cols.append(cand)
            dists.append(d2[r, cand])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    sq = np.concatenate(dists)
    if cfg.gamma is not None:
        gamma = float(cfg.gamma)
    else:
        mean = float(sq.mean())
        gamma = 1.0 / mean if mean > 0 else 1.0
    lin = src[rows] * n2 + tgt[cols]
    w = np.exp(-gamma * sq)
    # distinct source points make the three correspondence indices distinct
    raw = np.column_stack([lin.astype(np.float64), w])
    F = canonicalize(raw, dims)
    return TensorBuild(F, gamma, src, tgt, np.column_stack([rows, cols]), sq)


def build_tensor(P: PointSet, Q: PointSet, cfg: AffinityConfig | None = None) -> SparseTensor3:
    return build_tensor_details(P, Q, cfg).tensor


def build_pairwise(P: PointSet, Q: PointSet, sigma_s: float = 0.5) -> np.ndarray:
    """``((i1,j1),(i2,j2)) -> exp(-(dP[i1,i2] - dQ[j1,j2])^2 / sigma_s^2)``, zero when
    ``i1 == i2`` or ``j1 == j2``."""
    if not (np.isfinite(sigma_s) and sigma_s > 0):
        raise BadSigma(f"sigma_s must be positive, got {sigma_s}")
    p, q = P.points, Q.points
    n1, n2 = len(p), len(q)
    dP = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=2)
    dQ = np.linalg.norm(q[:, None, :] - q[None, :, :], axis=2)
    # axes (i1, j1, i2, j2)
    diff = dP[:, None, :, None] - dQ[None, :, None, :]
    W = np.exp(-(diff**2) / sigma_s**2)
    W[np.arange(n1), :, np.arange(n1), :] = 0.0
    W[:, np.arange(n2), :, np.arange(n2)] = 0.0
    return W.reshape(n1 * n2, n1 * n2)


def gen_synthetic(cfg: SyntheticConfig) -> MatchProblem:
    """Gaussian inliers, target = scale * P + noise, Gaussian outliers appended,
    then the target order is shuffled. Ground truth maps source ``i`` to the
    shuffled position of its partner."""
    rng = np.random.default_rng(cfg.seed)
    P = rng.standard_normal((cfg.n_in, 2))
    Q = cfg.scale * P + cfg.sigma * rng.standard_normal((cfg.n_in, 2))
    Q = np.vstack([Q, rng.standard_normal((cfg.n_out, 2))])
    perm = rng.permutation(len(Q))
    Qs = Q[perm]
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    gt = tuple(int(inv[i]) for i in range(cfg.n_in))
    meta = {"permutation": perm.tolist(), **{k: getattr(cfg, k) for k in ("n_in", "n_out", "sigma", "scale", "seed")}}
    return MatchProblem(PointSet(P), PointSet(Qs), gt, meta)


def accuracy(x: AssignmentVec, gt) -> float:
    """Fraction of inliers ``i`` (``i < len(gt)``) matched to ``gt[i]``."""
    gt = [int(j) for j in gt]
    if not gt:
        return 0.0
    return sum(int(x.cols[i] == j) for i, j in enumerate(gt)) / len(gt)


@dataclass(frozen=True)
class GainTable:
    """Paired comparison of two score lists; gains are percentages."""

    a_better: int
    a_gain: float | None
    b_better: int
    b_gain: float | None
    equal: int
    zero_denominator: int = 0

    def rows(self, name_a: str = "A", name_b: str = "B") -> list[dict]:
        return [
            {"Comparison": f"{name_a} > {name_b}", "No.": self.a_better, "Avg(%)": self.a_gain},
            {"Comparison": f"{name_a} < {name_b}", "No.": self.b_better, "Avg(%)": self.b_gain},
            {"Comparison": f"{name_a} = {name_b}", "No.": self.equal, "Avg(%)": None},
        ]


def avg_gain(f, g, eq_tol: float = 1e-9) -> GainTable:
    """Count and mean relative gain (in %) of the winner on each side.

    A pair counts as equal when ``|f - g| <= eq_tol * max(1, |f|, |g|)``. The
    gain of a win is ``(winner - loser) / loser``; wins over a zero score are
    counted but left out of the mean and reported as ``zero_denominator``.
    """
    f = np.asarray(f, dtype=np.float64).ravel()
    g = np.asarray(g, dtype=np.float64).ravel()
    if f.shape != g.shape:
        raise LengthMismatch(f"paired lists differ in length: {len(f)} vs {len(g)}")
    tol = eq_tol * np.maximum(1.0, np.maximum(np.abs(f), np.abs(g)))
    eq = np.abs(f - g) <= tol
    a_win = (f > g) & ~eq
    b_win = (g > f) & ~eq
    zero = 0

    def mean_gain(win, hi, lo):
        nonlocal zero
        ok = win & (lo != 0)
        zero += int(np.sum(win & (lo == 0)))
        if not ok.any():
            return None
        return float(np.mean((hi[ok] - lo[ok]) / lo[ok]) * 100.0)

    ga = mean_gain(a_win, f, g)
    gb = mean_gain(b_win, g, f)
    return GainTable(int(a_win.sum()), ga, int(b_win.sum()), gb, int(eq.sum()), zero)
