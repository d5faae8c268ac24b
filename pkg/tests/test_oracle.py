import math

import numpy as np
import pytest

from hypermatch import oracle
from hypermatch.errors import NotSymmetric, TooLarge
from hypermatch.modform import ModifiedForm, alpha_bound
from hypermatch.tensor3 import ProblemDims, canonicalize, eval_form

from _util import random_tensor


@pytest.mark.parametrize("n1,n2", [(n1, n2) for n2 in range(1, 6) for n1 in range(1, n2 + 1)])
def test_enumerated_count(n1, n2):
    d = ProblemDims(n1, n2)
    E = oracle.enumerate_M(d)
    assert len(E) == oracle.count_M(d) == math.factorial(n2) // math.factorial(n2 - n1)
    assert len({a.cols for a in E.items}) == len(E)


def test_enumerate_guard():
    with pytest.raises(TooLarge):
        oracle.enumerate_M(ProblemDims(8, 10))


def test_dense_eval_examples():
    d = ProblemDims(2, 3)
    assert oracle.dense_eval(canonicalize([], d), *np.ones((3, 6))) == 0.0
    F = canonicalize([(0, 2, 5, 1.5)], d)
    rng = np.random.default_rng(0)
    for _ in range(50):
        vs = rng.random((3, 6))
        assert oracle.dense_eval(F, *vs) == pytest.approx(eval_form(F, *vs), rel=1e-12)
        assert oracle.dense_eval(F, vs[2], vs[0], vs[1]) == pytest.approx(oracle.dense_eval(F, *vs), rel=1e-12)


def test_dense_guard():
    with pytest.raises(TooLarge):
        oracle.dense_tensor(canonicalize([], ProblemDims(5, 5)))


def test_brute_score_max_examples():
    d = ProblemDims(2, 2)
    _, v = oracle.brute_score_max(canonicalize([], d))
    assert v == 0.0
    F = random_tensor(ProblemDims(3, 3), 30, np.random.default_rng(1))
    X = oracle.enumerate_M(F.dims).vectors()
    best, v = oracle.brute_score_max(F)
    assert v == max(eval_form(F, x, x, x) for x in X)
    assert eval_form(F, *[best.to_vector()] * 3) == v


def test_brute_score_max_tiny_direct():
    d = ProblemDims(2, 2)
    F = canonicalize([(0, 1, 3, 1.0)], d)
    vals = [eval_form(F, x, x, x) for x in oracle.enumerate_M(d).vectors()]
    assert oracle.brute_score_max(F)[1] == max(vals)


def test_brute_form_max_zero_and_bound():
    d = ProblemDims(2, 3)
    assert oracle.brute_form_max(ModifiedForm(canonicalize([], d), 0.0)) == 0.0
    F = random_tensor(d, 12, np.random.default_rng(2))
    M = ModifiedForm(F, alpha_bound(F))
    assert oracle.brute_form_max(M) == pytest.approx(oracle.brute_score_max(M)[1], rel=1e-9)


def test_tuple_max_can_exceed_score_max_without_modification():
    # n1 = 2: no assignment covers three distinct source points, so S = 0 on M
    d = ProblemDims(2, 3)
    found = False
    for seed in range(20):
        F = random_tensor(d, 12, np.random.default_rng(seed))
        if oracle.brute_form_max(F) > oracle.brute_score_max(F)[1] + 1e-9:
            found = True
            break
    assert found


def test_brute_form_guard():
    F = canonicalize([], ProblemDims(3, 6))
    with pytest.raises(TooLarge):
        oracle.brute_form_max(F)


def test_min_eig_examples():
    assert oracle.min_eig_sym(np.eye(4)) == pytest.approx(1.0)
    assert oracle.min_eig_sym(np.diag([-1.0, 2.0])) == pytest.approx(-1.0)
    assert oracle.min_eig_sym([[3.0]]) == 3.0
    with pytest.raises(NotSymmetric):
        oracle.min_eig_sym([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(NotSymmetric):
        oracle.min_eig_sym(np.ones((2, 3)))


def test_min_eig_against_lapack():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(2, 12))
        A = rng.normal(size=(n, n)) * 10 ** rng.uniform(-3, 3)
        A = A + A.T
        ref = np.linalg.eigvalsh(A)[0]
        assert abs(oracle.min_eig_sym(A) - ref) <= 1e-9 * np.linalg.norm(A, 2)


def test_lifted_dense_guard():
    with pytest.raises(TooLarge):
        oracle.dense_lifted(canonicalize([], ProblemDims(2, 5)))


def test_oracle_deterministic():
    F = random_tensor(ProblemDims(3, 3), 20, np.random.default_rng(4))
    assert oracle.brute_score_max(F) == oracle.brute_score_max(F)
