"""Command-line interface: ``hypermatch {generate,build-tensor,solve,bench,oracle-check}``.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
``HYPERMATCH_SEED`` supplies the default seed when ``--seed`` is absent.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import affinity as aff
from . import oracle, solvers
from .errors import ConfigInvalid, FormatError, HypermatchError
from .lap import solve_lap
from .modform import ModifiedForm, alpha_bound, g_eval, mod_matrix
from .qap import QapOperator, solve_qap
from .tensor3 import ProblemDims, canonicalize, read_tensor, write_tensor

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

PAIRWISE = ("pairwise-ipfp", "pairwise-mp")
BENCH_COLUMNS = ["sweep_var", "value", "trial", "seed", "algo", "score", "accuracy", "iterations", "runtime_ms"]


class BadFlag(HypermatchError):
    pass


class UnknownAlgo(HypermatchError):
    pass


class SpecInvalid(HypermatchError):
    pass


def default_seed() -> int:
    raw = os.environ.get("HYPERMATCH_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise BadFlag(f"HYPERMATCH_SEED must be an integer, got {raw!r}") from None


def trial_seed(master: int, value_index: int, trial: int) -> int:
    """Per-trial seed: first word of ``SeedSequence([master, value_index, trial])``."""
    return int(np.random.SeedSequence([master, value_index, trial]).generate_state(1)[0])


def _affinity_from_args(args, seed: int) -> aff.AffinityConfig:
    return aff.AffinityConfig(
        gamma=args.gamma,
        triples_sampled=args.triples,
        knn=args.knn,
        feature=args.feature,
        seed=seed,
    )


def _algo_name(args) -> str:
    name = args.algo.lower()
    if args.psi:
        if "+" in name:
            raise BadFlag("give the subroutine either in --algo or with --psi, not both")
        name = f"{name}+{args.psi.lower()}"
    if args.adaptive and not name.startswith("adapt-"):
        name = "adapt-" + name
    name = name.replace("+mpm", "+mp")
    if name not in solvers.ALGORITHMS:
        raise UnknownAlgo(f"unknown algorithm {name!r}; choose from {', '.join(solvers.ALGORITHMS)}")
    return name


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    if args.n_in < 1:
        raise BadFlag("--n-in must be >= 1")
    if args.n_out < 0:
        raise BadFlag("--n-out must be >= 0")
    if not args.sigma >= 0:
        raise BadFlag("--sigma must be >= 0")
    if not args.scale > 0:
        raise BadFlag("--scale must be > 0")
    prob = aff.gen_synthetic(aff.SyntheticConfig(args.n_in, args.n_out, args.sigma, args.scale, seed))
    fh, close = _open_out(args.out)
    try:
        aff.dump_json(prob, fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _load_problem(path) -> aff.MatchProblem:
    with open(path, encoding="utf-8") as fh:
        return aff.load_problem(fh)


def cmd_build_tensor(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    prob = _load_problem(args.problem)
    F = aff.build_tensor(prob.source, prob.target, _affinity_from_args(args, seed))
    fh, close = _open_out(args.out)
    try:
        write_tensor(F, fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_solve(args) -> int:
    if (args.problem is None) == (args.tensor is None):
        raise BadFlag("give exactly one of --problem or --tensor")
    seed = args.seed if args.seed is not None else default_seed()
    name = _algo_name(args)
    gt = None
    if args.problem is not None:
        prob = _load_problem(args.problem)
        F = aff.build_tensor(prob.source, prob.target, _affinity_from_args(args, seed))
        gt = prob.ground_truth
    else:
        with open(args.tensor, encoding="utf-8") as fh:
            F = read_tensor(fh)
    t0 = time.perf_counter()
    res = solvers.solve(F, name)
    runtime = (time.perf_counter() - t0) * 1e3
    if not np.isfinite(res.score):
        print("error: solver produced a non-finite score", file=sys.stderr)
        return EXIT_NUMERIC
    record = {
        "algo": name,
        "score": res.score,
        "iterations": res.iterations,
        "alpha_final": res.alpha_final,
        "runtime_ms": runtime,
        "assignment": list(res.x_star.cols),
    }
    if gt is not None:
        record["accuracy"] = aff.accuracy(res.x_star, gt)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            res.write_trace(fh)
    print(json.dumps(record))
    return EXIT_OK


@dataclass(frozen=True)
class BenchSpec:
    sweep: str
    values: tuple
    trials: int
    solvers: tuple
    base: aff.SyntheticConfig
    affinity: dict
    output: str
    seed: int
    sigma_s: float = 0.5

    @classmethod
    def from_dict(cls, obj: dict, seed_default: int) -> "BenchSpec":
        if not isinstance(obj, dict):
            raise SpecInvalid("bench spec must be a JSON object")
        sweep = obj.get("sweep")
        if sweep not in ("outliers", "deformation"):
            raise SpecInvalid("'sweep' must be 'outliers' or 'deformation'")
        values = obj.get("values")
        if not isinstance(values, list) or not values:
            raise SpecInvalid("'values' must be a non-empty list")
        trials = obj.get("trials", 1)
        if not isinstance(trials, int) or trials < 1:
            raise SpecInvalid("'trials' must be an integer >= 1")
        names = obj.get("solvers")
        if not isinstance(names, list) or not names:
            raise SpecInvalid("'solvers' must be a non-empty list")
        names = tuple(str(s).lower().replace("+mpm", "+mp") for s in names)
        for s in names:
            if s not in solvers.ALGORITHMS and s not in PAIRWISE:
                raise SpecInvalid(f"unknown solver {s!r}")
        base = dict(obj.get("base", {}))
        if "output" not in obj:
            raise SpecInvalid("'output' path is required")
        try:
            base_cfg = aff.SyntheticConfig(
                n_in=int(base.get("n_in", 10)),
                n_out=int(base.get("n_out", 0)),
                sigma=float(base.get("sigma", 0.0)),
                scale=float(base.get("scale", 1.0)),
            )
            for v in values:
                _point_config(sweep, v, base_cfg, 0)
            affinity = dict(obj.get("affinity", {}))
            aff.AffinityConfig(**affinity)
        except (ConfigInvalid, TypeError, ValueError) as exc:
            raise SpecInvalid(str(exc)) from exc
        seed = obj.get("seed", seed_default)
        if not isinstance(seed, int) or seed < 0:
            raise SpecInvalid("'seed' must be a nonnegative integer")
        sigma_s = float(obj.get("sigma_s", 0.5))
        return cls(sweep, tuple(values), trials, names, base_cfg, affinity, str(obj["output"]), seed, sigma_s)


def _point_config(sweep: str, value, base: aff.SyntheticConfig, seed: int) -> aff.SyntheticConfig:
    if sweep == "outliers":
        return aff.SyntheticConfig(base.n_in, int(value), base.sigma, base.scale, seed)
    return aff.SyntheticConfig(base.n_in, base.n_out, float(value), base.scale, seed)


def run_bench(spec: BenchSpec) -> list[dict]:
    """One row per (value, trial, solver), in that order."""
    rows = []
    for vi, value in enumerate(spec.values):
        for trial in range(spec.trials):
            seed = trial_seed(spec.seed, vi, trial)
            prob = aff.gen_synthetic(_point_config(spec.sweep, value, spec.base, seed))
            F = None
            W = None
            for name in spec.solvers:
                t0 = time.perf_counter()
                if name in PAIRWISE:
                    if W is None:
                        W = QapOperator.from_dense(aff.build_pairwise(prob.source, prob.target, spec.sigma_s), prob.dims)
                    x = solve_qap(W, "ipfp" if name == "pairwise-ipfp" else "mpm")
                    score, iters = W.quad(x.to_vector()), 0
                    runtime = (time.perf_counter() - t0) * 1e3
                else:
                    if F is None:
                        cfg = aff.AffinityConfig(**{**spec.affinity, "seed": seed})
                        F = aff.build_tensor(prob.source, prob.target, cfg)
                        t0 = time.perf_counter()
                    res = solvers.solve(F, name)
                    runtime = (time.perf_counter() - t0) * 1e3
                    x, score, iters = res.x_star, res.score, res.iterations
                rows.append(
                    {
                        "sweep_var": spec.sweep,
                        "value": value,
                        "trial": trial,
                        "seed": seed,
                        "algo": name,
                        "score": float(score),
                        "accuracy": aff.accuracy(x, prob.ground_truth),
                        "iterations": iters,
                        "runtime_ms": runtime,
                    }
                )
    return rows


def summarize(rows: list[dict], spec: BenchSpec) -> list[dict]:
    out = []
    for value in spec.values:
        for name in spec.solvers:
            sel = [r for r in rows if r["value"] == value and r["algo"] == name]
            out.append(
                {
                    "sweep_var": spec.sweep,
                    "value": value,
                    "algo": name,
                    "trials": len(sel),
                    "mean_score": float(np.mean([r["score"] for r in sel])),
                    "mean_accuracy": float(np.mean([r["accuracy"] for r in sel])),
                    "mean_iterations": float(np.mean([r["iterations"] for r in sel])),
                    "mean_runtime_ms": float(np.mean([r["runtime_ms"] for r in sel])),
                }
            )
    return out


def compare(rows: list[dict], spec: BenchSpec) -> list[dict]:
    """Paired score comparison for every pair of tensor solvers."""
    names = [s for s in spec.solvers if s not in PAIRWISE]
    out = []
    for ia, a in enumerate(names):
        for b in names[ia + 1:]:
            fa = [r["score"] for r in rows if r["algo"] == a]
            fb = [r["score"] for r in rows if r["algo"] == b]
            out.extend(aff.avg_gain(fa, fb).rows(a, b))
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def bench_paths(output: str) -> tuple[Path, Path, Path]:
    main = Path(output)
    stem = main.with_suffix("")
    return main, Path(f"{stem}_summary.csv"), Path(f"{stem}_comparison.csv")


def cmd_bench(args) -> int:
    try:
        with open(args.spec, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecInvalid(f"invalid JSON: {exc}") from exc
    spec = BenchSpec.from_dict(obj, args.seed if args.seed is not None else default_seed())
    if args.output:
        spec = BenchSpec(**{**spec.__dict__, "output": args.output})
    rows = run_bench(spec)
    main, summary, comparison = bench_paths(spec.output)
    main.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(main, BENCH_COLUMNS, rows)
    summ = summarize(rows, spec)
    _write_csv(summary, list(summ[0].keys()), summ)
    _write_csv(comparison, ["Comparison", "No.", "Avg(%)"], compare(rows, spec))
    print(json.dumps({"rows": len(rows), "output": str(main), "summary": str(summary), "comparison": str(comparison)}))
    return EXIT_OK


def _random_tensor(dims: ProblemDims, m: int, rng) -> "object":
    n = dims.n
    idx = np.array([rng.choice(n, 3, replace=False) for _ in range(m)])
    return canonicalize(np.column_stack([idx, rng.random(m)]), dims)


def cmd_oracle_check(args) -> int:
    """Quick brute-force self test of the main identities on tiny random tensors."""
    seed = args.seed if args.seed is not None else default_seed()
    rng = np.random.default_rng(seed)
    failures = 0
    checks = []
    for k in range(args.instances):
        d23 = ProblemDims(2, 3)
        F = _random_tensor(d23, 12, rng)
        M = ModifiedForm(F, alpha_bound(F))
        lhs, rhs = oracle.brute_form_max(M), oracle.brute_score_max(M)[1]
        checks.append(("form-max equals score-max at the bound", abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))))
        d33 = ProblemDims(3, 3)
        F = _random_tensor(d33, 40, rng)
        M = ModifiedForm(F, alpha_bound(F))
        worst = np.inf
        for a in oracle.enumerate_M(d33).items:
            sl, G = mod_matrix(M, a.to_vector())
            A = 6.0 * (sl.toarray() + G.toarray())
            worst = min(worst, oracle.min_eig_sym(A) / max(1.0, np.abs(A).max()))
        checks.append(("Hessian PSD on assignments", worst >= -1e-8))
        vals = [g_eval(x, x, x, d33) for x in oracle.enumerate_M(d33).vectors()]
        checks.append(("G constant on assignments", max(vals) - min(vals) <= 1e-10 * max(vals)))
        P = rng.integers(-9, 10, (3, 4)).astype(float)
        checks.append(("LAP exact", solve_lap(P)[1] == oracle.brute_lap(P)[1]))
    by_name: dict = {}
    for name, ok in checks:
        by_name.setdefault(name, []).append(ok)
    for name, oks in by_name.items():
        status = "PASS" if all(oks) else "FAIL"
        failures += not all(oks)
        print(f"{status} {name} ({sum(oks)}/{len(oks)})")
    return EXIT_OK if failures == 0 else EXIT_NUMERIC


def _add_affinity_flags(p):
    p.add_argument("--knn", type=int, default=aff.DEFAULT_KNN)
    p.add_argument("--triples", type=int, default=None, help="source triples to sample (default n^2, capped)")
    p.add_argument("--gamma", type=float, default=None, help="fixed gamma (default: inverse mean squared distance)")
    p.add_argument("--feature", choices=("sines", "angles"), default="sines")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypermatch", description="Third-order hypergraph matching.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic matching problem as JSON")
    p.add_argument("--n-in", type=int, required=True)
    p.add_argument("--n-out", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("build-tensor", help="build the third-order affinity tensor of a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    _add_affinity_flags(p)
    p.set_defaults(func=cmd_build_tensor)

    p = sub.add_parser("solve", help="run one solver and print a JSON record")
    p.add_argument("--problem", default=None)
    p.add_argument("--tensor", default=None)
    p.add_argument("--algo", default="bcagm3", help="e.g. bcagm3, adapt-bcagm3+mp, bcagm+ipfp")
    p.add_argument("--psi", choices=("ipfp", "mp", "mpm"), default=None)
    p.add_argument("--adaptive", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trace", default=None, help="write per-iteration JSON lines here")
    _add_affinity_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run a synthetic sweep described by a JSON spec")
    p.add_argument("spec")
    p.add_argument("--output", default=None, help="override the spec's output CSV path")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle-check", help="brute-force self test on tiny instances")
    p.add_argument("--instances", type=int, default=3)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_oracle_check)
    return parser


USAGE_ERRORS = (BadFlag, UnknownAlgo, SpecInvalid, FormatError, ConfigInvalid, OSError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HypermatchError, FloatingPointError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
