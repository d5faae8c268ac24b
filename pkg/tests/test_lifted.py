import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypermatch import oracle
from hypermatch.errors import HomogeneousTuple, NotAnAssignment
from hypermatch.lifted import (
    alpha_bound4,
    alpha_threshold4,
    eval4,
    g4_eval,
    g4_grad,
    g4_matrix,
    grad4,
    slice4,
)
from hypermatch.tensor3 import ProblemDims, canonicalize

from _util import random_assignment, random_tensor

SEEDS = st.integers(0, 2**32 - 1)


def dense_g4(n):
    E = np.full((n, n), 1.0 / 3.0) + np.eye(n) * (2.0 / 3.0)
    return np.einsum("ia,ib,ic,id->abcd", E, E, E, E)


@settings(max_examples=50, deadline=None)
@given(seed=SEEDS, n1=st.integers(1, 3))
def test_eval4_matches_dense(seed, n1):
    rng = np.random.default_rng(seed)
    d = ProblemDims(n1, 3)
    F = random_tensor(d, int(rng.integers(0, 20)), rng)
    vs = rng.random((4, d.n))
    ref = oracle.dense_lifted_eval(F, *vs)
    assert abs(eval4(F, *vs) - ref) <= 1e-11 * max(1.0, abs(ref))


def test_eval4_zero():
    d = ProblemDims(2, 3)
    F = canonicalize([], d)
    assert eval4(F, *np.ones((4, 6))) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_grad_slice_match_dense(seed):
    rng = np.random.default_rng(seed)
    d = ProblemDims(2, 4)
    F = random_tensor(d, 25, rng)
    F4 = oracle.dense_lifted(F)
    x, y, z = rng.random((3, d.n))
    np.testing.assert_allclose(grad4(F, x, y, z), np.einsum("ijkl,i,j,k->l", F4, x, y, z), rtol=1e-11)
    for a, b in [(x, y), (x, x)]:
        sparse, h = slice4(F, a, b)
        A = sparse.toarray() + h[:, None] + h[None, :]
        np.testing.assert_allclose(A, np.einsum("ijkl,i,j->kl", F4, a, b), rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_g4_closed_forms(seed):
    rng = np.random.default_rng(seed)
    n = 6
    G4 = dense_g4(n)
    x, y, z, t = rng.random((4, n))
    assert g4_eval(x, y, z, t) == pytest.approx(np.einsum("ijkl,i,j,k,l->", G4, x, y, z, t), rel=1e-12)
    np.testing.assert_allclose(g4_grad(x, y, z), np.einsum("ijkl,i,j,k->l", G4, x, y, z), rtol=1e-12)
    np.testing.assert_allclose(g4_matrix(x, y).toarray(), np.einsum("ijkl,i,j->kl", G4, x, y), rtol=1e-12)


def test_lifted_symmetry():
    rng = np.random.default_rng(3)
    F = random_tensor(ProblemDims(2, 4), 20, rng)
    vs = rng.random((4, 8))
    base = eval4(F, *vs)
    for perm in itertools.permutations(range(4)):
        assert eval4(F, *vs[list(perm)]) == pytest.approx(base, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(seed=SEEDS)
def test_bound4_makes_hessian_psd_on_M(seed):
    rng = np.random.default_rng(seed)
    d = ProblemDims(3, 3)
    F = random_tensor(d, int(rng.integers(1, 60)), rng)
    alpha = alpha_bound4(F)
    F4 = oracle.dense_lifted(F) + alpha * dense_g4(d.n)
    for x in oracle.enumerate_M(d).vectors():
        H = 12.0 * np.einsum("ijkl,i,j->kl", F4, x, x)
        assert oracle.min_eig_sym(H) >= -1e-8 * np.abs(H).max()


def test_bound4_scales():
    F = random_tensor(ProblemDims(3, 3), 20, np.random.default_rng(0))
    assert alpha_bound4(F.scaled(3.0)) == pytest.approx(3.0 * alpha_bound4(F), rel=1e-12)
    assert alpha_bound4(canonicalize([], ProblemDims(1, 3))) == 0.0


def test_threshold4():
    rng = np.random.default_rng(1)
    d = ProblemDims(2, 3)
    F = random_tensor(d, 12, rng)
    X = oracle.enumerate_M(d).vectors()
    with pytest.raises(HomogeneousTuple):
        alpha_threshold4(F, X[0], X[0], X[0], X[0])
    with pytest.raises(NotAnAssignment):
        alpha_threshold4(F, X[0], X[0], X[0], np.ones(6))
    for _ in range(30):
        vs = [X[i] for i in rng.integers(0, len(X), 4)]
        if all(np.array_equal(vs[0], v) for v in vs):
            continue
        lam = alpha_threshold4(F, *vs)
        a = max(lam, 0.0) + 1e-8
        lhs = eval4(F, *vs) + a * g4_eval(*vs)
        rhs = max(eval4(F, u, u, u, u) + a * g4_eval(u, u, u, u) for u in vs)
        assert lhs <= rhs + 1e-12


def test_slice_helpers_accept_assignments():
    rng = np.random.default_rng(2)
    d = ProblemDims(3, 4)
    F = random_tensor(d, 30, rng)
    x = random_assignment(d, rng).to_vector()
    sparse, h = slice4(F, x, x)
    y = random_assignment(d, rng).to_vector()
    assert y @ (sparse @ y) + 2 * (h @ y) * y.sum() == pytest.approx(eval4(F, x, x, y, y), rel=1e-12)
