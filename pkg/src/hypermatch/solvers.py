"""Block-coordinate ascent on the modified multilinear form.

Every solver alternates exact block updates of ``F_alpha`` over the
assignment set with a homogenization step that falls back to the score
``S_alpha(u) = F_alpha(u, u, u)`` once the form stops increasing. Two update
schemes exist:

* LAP sweep: each of the three arguments in turn is the exact maximizer of a
  linear assignment problem with the other two fixed.
* Psi sweep: one LAP for ``x`` then a QAP heuristic for the shared ``y`` in
  ``F_alpha(x, y, y)``.

``alpha`` is either switched once from 0 to the convexifying bound, or grown
lazily to the smallest value that lets the current stagnant tuple pass the
homogenization test (the adaptive variants). The lifted fourth-order solvers
reuse the same loop with the form ``F4``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid
from .lap import AssignmentVec, argmax_over_M
from .lifted import alpha_bound4, alpha_threshold4, eval4, g4_eval, g4_grad, g4_matrix, grad4, slice4
from .modform import alpha_bound, alpha_threshold, g_eval, g_grad, g_matrix, is_assignment
from .qap import PSI, QapOperator
from .tensor3 import ProblemDims, SparseTensor3, eval_form, grad_vector, slice_matrix

XI_FACTOR = 1e-6
ENUM_LIMIT = 10**6


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by all solvers.

    ``xi=None`` means ``1e-6 * alpha_bound``; ``max_outer=None`` means ``10 n``;
    ``start=None`` means the all-ones vector.
    """

    xi: float | None = None
    eq_tol: float = 1e-9
    max_outer: int | None = None
    start: np.ndarray | None = None
    psi_max_iter: int | None = None

    def __post_init__(self):
        if self.xi is not None and not (np.isfinite(self.xi) and self.xi > 0):
            raise ConfigInvalid(f"xi must be positive, got {self.xi}")
        if not (np.isfinite(self.eq_tol) and self.eq_tol >= 0):
            raise ConfigInvalid(f"eq_tol must be nonnegative, got {self.eq_tol}")
        if self.max_outer is not None and int(self.max_outer) < 1:
            raise ConfigInvalid(f"max_outer must be >= 1, got {self.max_outer}")
        if self.psi_max_iter is not None and int(self.psi_max_iter) < 1:
            raise ConfigInvalid(f"psi_max_iter must be >= 1, got {self.psi_max_iter}")


@dataclass
class SolverResult:
    x_star: AssignmentVec
    score: float
    form_trace: list = field(default_factory=list)
    score_trace: list = field(default_factory=list)
    alpha_trace: list = field(default_factory=list)
    phase_switches: int = 0
    iterations: int = 0
    homogeneous_exit: bool = False
    converged: bool = True
    algo: str = ""
    alpha_final: float = 0.0
    # per-iteration block iterates and every homogenized candidate, kept for auditing
    iterates: list = field(default_factory=list)
    u_history: list = field(default_factory=list)

    def trace_records(self) -> list[dict]:
        return [
            {"iteration": k + 1, "alpha": a, "form": f}
            for k, (a, f) in enumerate(zip(self.alpha_trace, self.form_trace))
        ] + [{"homogenization": m + 1, "score": s} for m, s in enumerate(self.score_trace)]

    def write_trace(self, fh) -> None:
        for rec in self.trace_records():
            fh.write(json.dumps(rec) + "\n")


def _assignments(dims: ProblemDims) -> np.ndarray:
    rows = []
    for cols in itertools.permutations(range(dims.n2), dims.n1):
        x = np.zeros(dims.n)
        x[np.arange(dims.n1) * dims.n2 + np.asarray(cols)] = 1.0
        rows.append(x)
    return np.array(rows)


def _count_assignments(dims: ProblemDims) -> int:
    out = 1
    for k in range(dims.n1):
        out *= dims.n2 - k
    return out


class _Cubic:
    order = 3
    psi_pattern = (0, 1, 1)

    def __init__(self, F: SparseTensor3):
        self.F = F
        self.dims = F.dims
        self.bound = alpha_bound(F)
        self._max_lambda = None

    def form(self, vs, alpha: float) -> float:
        val = eval_form(self.F, *vs)
        if alpha:
            val += alpha * g_eval(*vs, self.dims)
        return val

    def score(self, u) -> float:
        return eval_form(self.F, u, u, u)

    def grad(self, others, alpha: float) -> np.ndarray:
        g = grad_vector(self.F, *others)
        if alpha:
            g = g + alpha * g_grad(*others, self.dims)
        return g

    def operator(self, x, alpha: float) -> QapOperator:
        return QapOperator(self.dims, sparse=slice_matrix(self.F, x), gpart=g_matrix(x, self.dims).scaled(alpha))

    def threshold(self, vs) -> float:
        return alpha_threshold(self.F, *vs)

    def psi_sweep(self, blocks, alpha, psi):
        x, y = blocks
        yv = _vec(y)
        xt = argmax_over_M(self.grad((yv, yv), alpha), self.dims)
        yt = psi(self.operator(xt.to_vector(), alpha), y)
        return [xt, yt]

    def max_lambda(self):
        """Largest threshold over all non-homogeneous tuples, or None if too many."""
        if self._max_lambda is None:
            m = _count_assignments(self.dims)
            if m**3 > ENUM_LIMIT:
                return None
            X = _assignments(self.dims)
            E = X * (2.0 / 3.0) + self.dims.n1 / 3.0
            S = np.array([self.score(x) for x in X])
            Gc = float(np.sum(E[0] ** 3))
            best = -np.inf
            for ix in range(m):
                Fyz = X @ (slice_matrix(self.F, X[ix]) @ X.T)
                Gyz = (E * E[ix]) @ E.T
                top = np.maximum(np.maximum.outer(S, S), S[ix])
                lam = (Fyz - top) / np.where(Gc - Gyz > 0, Gc - Gyz, 1.0)
                lam[ix, ix] = -np.inf
                best = max(best, float(lam.max()))
            self._max_lambda = best
        return self._max_lambda


class _Quartic:
    order = 4
    psi_pattern = (0, 0, 1, 1)

    def __init__(self, F: SparseTensor3):
        self.F = F
        self.dims = F.dims
        self.bound = alpha_bound4(F)
        self._max_lambda = None

    def form(self, vs, alpha: float) -> float:
        val = eval4(self.F, *vs)
        if alpha:
            val += alpha * g4_eval(*vs)
        return val

    def score(self, u) -> float:
        return eval_form(self.F, u, u, u)

    def grad(self, others, alpha: float) -> np.ndarray:
        g = grad4(self.F, *others)
        if alpha:
            g = g + alpha * g4_grad(*others)
        return g

    def operator(self, x, y, alpha: float) -> QapOperator:
        sparse, h = slice4(self.F, x, y)
        return QapOperator(self.dims, sparse=sparse, gpart=g4_matrix(x, y).scaled(alpha), lowrank=h)

    def threshold(self, vs) -> float:
        return alpha_threshold4(self.F, *vs)

    def psi_sweep(self, blocks, alpha, psi):
        x, y = blocks
        yv = _vec(y)
        xt = psi(self.operator(yv, yv, alpha), x)
        xv = xt.to_vector()
        yt = psi(self.operator(xv, xv, alpha), y)
        return [xt, yt]

    def max_lambda(self):
        if self._max_lambda is None:
            m = _count_assignments(self.dims)
            if m**4 > ENUM_LIMIT:
                return None
            X = _assignments(self.dims)
            n1 = float(self.dims.n1)
            E = X * (2.0 / 3.0) + n1 / 3.0
            S4 = np.array([eval4(self.F, x, x, x, x) for x in X])
            Gc = float(np.sum(E[0] ** 4))
            slices = [slice_matrix(self.F, x).toarray() for x in X]
            best = -np.inf
            for ix in range(m):
                for iy in range(m):
                    h = X @ grad_vector(self.F, X[ix], X[iy])
                    F4 = n1 * (h[:, None] + h[None, :]) + n1 * (X @ (slices[ix] + slices[iy]) @ X.T)
                    G4 = (E * (E[ix] * E[iy])) @ E.T
                    top = np.maximum(np.maximum.outer(S4, S4), max(S4[ix], S4[iy]))
                    den = Gc - G4
                    lam = (F4 - top) / np.where(den > 0, den, 1.0)
                    if ix == iy:
                        lam[ix, ix] = -np.inf
                    best = max(best, float(lam.max()))
            self._max_lambda = best
        return self._max_lambda


def _vec(v) -> np.ndarray:
    return v.to_vector() if isinstance(v, AssignmentVec) else v


def _as_assignment(v, dims: ProblemDims):
    if isinstance(v, AssignmentVec):
        return v
    if is_assignment(v, dims):
        return AssignmentVec.from_vector(v, dims)
    return None


def _seeded(psi, max_iter):
    """Psi that accepts a non-assignment start by seeding with the best LAP
    against ``A y`` (only happens on the very first sweep)."""

    def call(A: QapOperator, y):
        y0 = _as_assignment(y, A.dims)
        if y0 is None:
            y0 = argmax_over_M(A.matvec(np.asarray(y, dtype=np.float64)), A.dims)
        return psi(A, y0) if max_iter is None else psi(A, y0, max_iter=max_iter)

    return call


def _lap_sweep(obj, blocks, alpha):
    new = [_vec(b) for b in blocks]
    out = []
    for b in range(obj.order):
        others = [new[j] for j in range(obj.order) if j != b]
        xb = argmax_over_M(obj.grad(others, alpha), obj.dims)
        out.append(xb)
        new[b] = xb.to_vector()
    return out


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a))


def _run(obj, scheme: str, adaptive: bool, psi: str | None, cfg: SolverConfig | None, algo: str) -> SolverResult:
    cfg = cfg or SolverConfig()
    dims = obj.dims
    n = dims.n
    if cfg.start is None:
        start = np.ones(n)
    else:
        start = np.asarray(cfg.start, dtype=np.float64)
        if start.shape != (n,) or not np.all(np.isfinite(start)):
            raise ConfigInvalid(f"start must be a finite vector of length {n}")
    if scheme == "lap":
        pattern = tuple(range(obj.order))
        sweep = lambda blocks, a: _lap_sweep(obj, blocks, a)  # noqa: E731
    else:
        if psi not in PSI:
            raise ConfigInvalid(f"unknown subroutine {psi!r}; choose from {sorted(PSI)}")
        call = _seeded(PSI[psi], cfg.psi_max_iter)
        pattern = obj.psi_pattern
        sweep = lambda blocks, a: obj.psi_sweep(blocks, a, call)  # noqa: E731
    nblocks = max(pattern) + 1
    bound = obj.bound
    xi = cfg.xi if cfg.xi is not None else XI_FACTOR * (bound if bound > 0 else 1.0)
    max_outer = int(cfg.max_outer) if cfg.max_outer is not None else 10 * n
    tol = cfg.eq_tol

    def vecs(blocks):
        return [_vec(b) for b in blocks]

    def expand(vs):
        return [vs[p] for p in pattern]

    res = SolverResult(x_star=AssignmentVec.identity(dims), score=-np.inf, algo=algo)
    best = [None, -np.inf]

    def consider(u: AssignmentVec) -> float:
        s = obj.score(u.to_vector())
        if s > best[1]:
            best[0], best[1] = u, s
        return s

    def finish(u, homogeneous, converged, k, alpha):
        s = consider(u)
        res.score_trace.append(s)
        res.u_history.append(u)
        res.x_star, res.score = best[0], float(best[1])
        res.homogeneous_exit = homogeneous
        res.converged = converged
        res.iterations = k
        res.alpha_final = float(alpha)
        return res

    alpha = 0.0
    switched = False
    blocks = [start] * nblocks
    prev = obj.form(expand(vecs(blocks)), alpha)
    for k in range(1, max_outer + 1):
        tilde = sweep(blocks, alpha)
        tv = vecs(tilde)
        cur = obj.form(expand(tv), alpha)
        res.form_trace.append(cur)
        res.alpha_trace.append(alpha)
        res.iterates.append(tuple(tilde))
        if not _close(cur, prev, tol):
            blocks, prev = tilde, cur
            continue
        cands = []
        for t in tilde:
            if all(t.cols != c.cols for c in cands):
                cands.append(t)
        svals = [obj.form([c.to_vector()] * obj.order, alpha) for c in cands]
        i = int(np.argmax(svals))
        u, su = cands[i], svals[i]
        homogeneous = len(cands) == 1
        if su > cur + tol * max(1.0, abs(cur)):
            res.score_trace.append(consider(u))
            res.u_history.append(u)
            blocks, prev = [u] * nblocks, su
            continue
        if not adaptive:
            if not switched and not homogeneous and bound > alpha:
                alpha, switched = bound, True
                res.phase_switches += 1
                blocks, prev = tilde, obj.form(expand(tv), alpha)
                continue
            return finish(u, homogeneous, True, k, alpha)
        if homogeneous or _eq9_holds(obj, alpha):
            return finish(u, homogeneous, True, k, alpha)
        lam = obj.threshold(expand(tv))
        new = min(lam + xi, bound)
        if not new > alpha:
            new = min(alpha + xi, bound)
        alpha = new
        res.phase_switches += 1
        blocks, prev = tilde, obj.form(expand(tv), alpha)
    # iteration cap: report the best homogenized candidate from the last sweep
    cands = list(tilde)
    svals = [obj.score(c.to_vector()) for c in cands]
    return finish(cands[int(np.argmax(svals))], False, False, max_outer, alpha)


def _eq9_holds(obj, alpha: float) -> bool:
    """Whether ``alpha`` passes the homogenization test for every tuple."""
    if alpha >= obj.bound:
        return True
    lam = obj.max_lambda()
    return lam is not None and alpha >= lam


def _check_tensor(F):
    if not isinstance(F, SparseTensor3):
        raise ConfigInvalid("F must be a SparseTensor3")


def bcagm3(F: SparseTensor3, cfg: SolverConfig | None = None) -> SolverResult:
    _check_tensor(F)
    return _run(_Cubic(F), "lap", False, None, cfg, "bcagm3")


def bcagm3_psi(F: SparseTensor3, psi: str = "mpm", cfg: SolverConfig | None = None) -> SolverResult:
    _check_tensor(F)
    psi = _psi_key(psi)
    return _run(_Cubic(F), "psi", False, psi, cfg, f"bcagm3+{_psi_tag(psi)}")


def adapt_bcagm3(F: SparseTensor3, cfg: SolverConfig | None = None) -> SolverResult:
    _check_tensor(F)
    return _run(_Cubic(F), "lap", True, None, cfg, "adapt-bcagm3")


def adapt_bcagm3_psi(F: SparseTensor3, psi: str = "mpm", cfg: SolverConfig | None = None) -> SolverResult:
    _check_tensor(F)
    psi = _psi_key(psi)
    return _run(_Cubic(F), "psi", True, psi, cfg, f"adapt-bcagm3+{_psi_tag(psi)}")


def lifted4_solve(
    F: SparseTensor3,
    variant: str = "bcagm",
    adaptive: bool = False,
    psi: str = "mpm",
    cfg: SolverConfig | None = None,
) -> SolverResult:
    """Same ascent loop on the lifted fourth-order form.

    ``variant='bcagm'`` updates four blocks by LAPs; ``'bcagm_psi'`` works on
    ``F4(x, x, y, y)`` and updates both blocks with the QAP heuristic.
    The reported score is always the cubic ``S(x*)``.
    """
    _check_tensor(F)
    prefix = "adapt-" if adaptive else ""
    if variant == "bcagm":
        return _run(_Quartic(F), "lap", adaptive, None, cfg, prefix + "bcagm")
    if variant == "bcagm_psi":
        psi = _psi_key(psi)
        return _run(_Quartic(F), "psi", adaptive, psi, cfg, f"{prefix}bcagm+{_psi_tag(psi)}")
    raise ConfigInvalid(f"unknown lifted variant {variant!r}")


_PSI_ALIASES = {"mp": "mpm", "mpm": "mpm", "ipfp": "ipfp"}


def _psi_key(psi: str) -> str:
    try:
        return _PSI_ALIASES[psi.lower()]
    except (KeyError, AttributeError):
        raise ConfigInvalid(f"unknown subroutine {psi!r}; choose ipfp or mp") from None


def _psi_tag(psi: str) -> str:
    return "mp" if psi == "mpm" else psi


THIRD_ORDER = ("bcagm3", "bcagm3+ipfp", "bcagm3+mp", "adapt-bcagm3", "adapt-bcagm3+ipfp", "adapt-bcagm3+mp")
LIFTED = ("bcagm", "bcagm+ipfp", "bcagm+mp", "adapt-bcagm", "adapt-bcagm+ipfp", "adapt-bcagm+mp")
ALGORITHMS = THIRD_ORDER + LIFTED


def solve(F: SparseTensor3, algo: str, cfg: SolverConfig | None = None) -> SolverResult:
    """Dispatch by name, e.g. ``'adapt-bcagm3+mp'`` or ``'bcagm+ipfp'``."""
    name = algo.lower().strip()
    adaptive = name.startswith("adapt-")
    core = name[len("adapt-"):] if adaptive else name
    base, _, psi = core.partition("+")
    if base == "bcagm3":
        if not psi:
            return (adapt_bcagm3 if adaptive else bcagm3)(F, cfg)
        return (adapt_bcagm3_psi if adaptive else bcagm3_psi)(F, psi, cfg)
    if base == "bcagm":
        if not psi:
            return lifted4_solve(F, "bcagm", adaptive, cfg=cfg)
        return lifted4_solve(F, "bcagm_psi", adaptive, psi, cfg)
    raise ConfigInvalid(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")


__all__ = [
    "ALGORITHMS",
    "LIFTED",
    "THIRD_ORDER",
    "SolverConfig",
    "SolverResult",
    "adapt_bcagm3",
    "adapt_bcagm3_psi",
    "bcagm3",
    "bcagm3_psi",
    "lifted4_solve",
    "solve",
]
