import io
import json

import numpy as np
import pytest

from hypermatch import oracle, solvers
from hypermatch.errors import ConfigInvalid
from hypermatch.lap import AssignmentVec, argmax_over_M
from hypermatch.modform import ModifiedForm, alpha_bound, is_assignment, mod_grad
from hypermatch.solvers import SolverConfig
from hypermatch.tensor3 import ProblemDims, canonicalize, eval_form

from _util import random_tensor

EQ = 1e-9


def phases(res):
    """Split form_trace into runs of constant alpha."""
    out, cur, last = [], [], None
    for a, f in zip(res.alpha_trace, res.form_trace):
        if last is not None and a != last:
            out.append(cur)
            cur = []
        cur.append(f)
        last = a
    if cur:
        out.append(cur)
    return out


def check_contract(res, F):
    d = F.dims
    for ph in phases(res):
        for a, b in zip(ph, ph[1:]):
            assert b >= a - EQ * max(1.0, abs(a))
    s = res.score_trace[:-1]
    for a, b in zip(s, s[1:]):
        assert b > a - EQ * max(1.0, abs(a))
    for u in res.u_history + [res.x_star]:
        assert is_assignment(u.to_vector(), d)
    for its in res.iterates:
        for t in its:
            assert is_assignment(t.to_vector(), d)
    assert res.score == pytest.approx(eval_form(F, *[res.x_star.to_vector()] * 3), rel=1e-12, abs=1e-12)
    assert res.score >= max(res.score_trace) - 1e-12
    assert res.iterations < 100
    assert all(b >= a for a, b in zip(res.alpha_trace, res.alpha_trace[1:]))


@pytest.mark.parametrize("algo", solvers.ALGORITHMS)
def test_zero_tensor(algo):
    F = canonicalize([], ProblemDims(3, 4))
    res = solvers.solve(F, algo)
    assert res.score == 0.0
    assert res.alpha_final == 0.0
    assert res.iterations == 1
    assert is_assignment(res.x_star.to_vector(), F.dims)


@pytest.mark.parametrize("algo", solvers.ALGORITHMS)
def test_random_contracts_and_oracle_bound(algo):
    d = ProblemDims(3, 3)
    for seed in range(100 if algo in solvers.THIRD_ORDER else 30):
        rng = np.random.default_rng(seed)
        F = random_tensor(d, int(rng.integers(5, 80)), rng)
        res = solvers.solve(F, algo)
        check_contract(res, F)
        assert res.score <= oracle.brute_score_max(F)[1] + 1e-12


def identity_dominant(d, rng):
    n1 = d.n1
    ident = [d.index(i, i) for i in range(n1)]
    raw = [(ident[a], ident[b], ident[c], 10.0) for a in range(n1) for b in range(a + 1, n1) for c in range(b + 1, n1)]
    noise = random_tensor(d, 30, rng)
    raw += [(a, b, c, 0.1 * w) for a, b, c, w in noise.entries]
    return canonicalize(raw, d)


@pytest.mark.parametrize("algo", solvers.ALGORITHMS)
def test_identity_dominant(algo):
    d = ProblemDims(4, 4)
    F = identity_dominant(d, np.random.default_rng(0))
    best, _ = oracle.brute_score_max(F)
    vals = sorted(eval_form(F, x, x, x) for x in oracle.enumerate_M(d).vectors())
    assert best == AssignmentVec.identity(d) and vals[-1] > vals[-2]
    assert solvers.solve(F, algo).x_star == AssignmentVec.identity(d)


@pytest.mark.parametrize("pair", [("bcagm3", "adapt-bcagm3"), ("bcagm3+ipfp", "adapt-bcagm3+ipfp"),
                                  ("bcagm3+mp", "adapt-bcagm3+mp")])
def test_adaptive_not_worse(pair):
    d = ProblemDims(3, 3)
    worse = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        F = random_tensor(d, int(rng.integers(5, 80)), rng)
        a, b = (solvers.solve(F, name).score for name in pair)
        worse += b < a - 1e-9
    assert worse <= 1


def test_alpha_strictly_increases_on_updates():
    d = ProblemDims(3, 4)
    fired = 0
    for seed in range(60):
        F = random_tensor(d, 120, np.random.default_rng(seed))
        res = solvers.adapt_bcagm3(F)
        changes = [b for a, b in zip(res.alpha_trace, res.alpha_trace[1:]) if b != a]
        fired += len(changes)
        assert all(b > a for a, b in zip(res.alpha_trace, res.alpha_trace[1:]) if b != a)
        assert res.phase_switches == len(changes)
        assert res.alpha_final <= alpha_bound(F)
    assert fired > 0


def test_nonadaptive_switch_goes_to_bound():
    d = ProblemDims(3, 4)
    for seed in range(40):
        F = random_tensor(d, 120, np.random.default_rng(seed))
        res = solvers.bcagm3(F)
        assert res.phase_switches in (0, 1)
        assert set(res.alpha_trace) <= {0.0, alpha_bound(F)}


def homogeneous_exit_states(limit, algos=("bcagm3", "bcagm3+mp", "bcagm3+ipfp")):
    """Yield (F, u) where phase one (alpha = 0) ended at a homogeneous tuple."""
    d = ProblemDims(3, 3)
    found = 0
    for seed in range(2000):
        rng = np.random.default_rng(seed)
        F = random_tensor(d, int(rng.integers(3, 40)), rng)
        for algo in algos:
            res = solvers.solve(F, algo)
            if res.homogeneous_exit and res.phase_switches == 0:
                yield F, res.u_history[-1].to_vector()
                found += 1
                if found == limit:
                    return


def test_no_lap_ascent_after_homogeneous_exit():
    states = 0
    for F, u in homogeneous_exit_states(20):
        for alpha in (0.0, alpha_bound(F) / 2, alpha_bound(F)):
            g = mod_grad(ModifiedForm(F, alpha), u, u)
            x = argmax_over_M(g, F.dims).to_vector()
            assert x @ g <= u @ g + 1e-9 * max(1.0, abs(u @ g))
        states += 1
    assert states == 20


def test_config_validation():
    for kw in ({"xi": 0.0}, {"xi": -1}, {"eq_tol": -1}, {"max_outer": 0}, {"psi_max_iter": 0}):
        with pytest.raises(ConfigInvalid):
            SolverConfig(**kw)
    F = random_tensor(ProblemDims(2, 3), 5, np.random.default_rng(0))
    with pytest.raises(ConfigInvalid):
        solvers.bcagm3(F, SolverConfig(start=np.ones(3)))
    with pytest.raises(ConfigInvalid):
        solvers.solve(F, "nope")
    with pytest.raises(ConfigInvalid):
        solvers.bcagm3_psi(F, psi="rrwm")
    with pytest.raises(ConfigInvalid):
        solvers.lifted4_solve(F, variant="dense")
    with pytest.raises(ConfigInvalid):
        solvers.bcagm3("not a tensor")


def test_iteration_cap_reports_unconverged():
    d = ProblemDims(4, 6)
    F = random_tensor(d, 400, np.random.default_rng(3))
    res = solvers.bcagm3(F, SolverConfig(max_outer=1))
    full = solvers.bcagm3(F)
    if full.iterations > 1:
        assert not res.converged and res.iterations == 1
    assert is_assignment(res.x_star.to_vector(), d)


def test_custom_start_respected():
    d = ProblemDims(3, 4)
    F = random_tensor(d, 60, np.random.default_rng(8))
    start = AssignmentVec(d, (3, 2, 1)).to_vector()
    for algo in ("bcagm3", "bcagm3+ipfp", "adapt-bcagm3+mp"):
        res = solvers.solve(F, algo, SolverConfig(start=start))
        check_contract(res, F)


def test_trace_export():
    F = random_tensor(ProblemDims(3, 4), 60, np.random.default_rng(2))
    res = solvers.adapt_bcagm3_psi(F, "ipfp")
    buf = io.StringIO()
    res.write_trace(buf)
    recs = [json.loads(line) for line in buf.getvalue().splitlines()]
    iters = [r for r in recs if "iteration" in r]
    homs = [r for r in recs if "homogenization" in r]
    assert [r["form"] for r in iters] == res.form_trace
    assert [r["alpha"] for r in iters] == res.alpha_trace
    assert [r["score"] for r in homs] == res.score_trace


def test_dispatch_names():
    F = random_tensor(ProblemDims(3, 4), 40, np.random.default_rng(4))
    for name in solvers.ALGORITHMS:
        assert solvers.solve(F, name).algo == name
    assert solvers.solve(F, "bcagm3+mpm").algo == "bcagm3+mp"


def test_deterministic_runs():
    F = random_tensor(ProblemDims(4, 5), 150, np.random.default_rng(5))
    for name in solvers.ALGORITHMS:
        a, b = solvers.solve(F, name), solvers.solve(F, name)
        assert a.x_star == b.x_star and a.form_trace == b.form_trace
