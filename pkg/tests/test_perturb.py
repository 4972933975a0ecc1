import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cocyclebounds.cocycle import LocallyConstantCocycle, rotation
from cocyclebounds.errors import InputError
from cocyclebounds.perturb import (Infeasible, RootUnavailable, c0_distance, covering_perturbation,
                                   find_identity_return, matrix_nth_root, patterns_disjoint)
from cocyclebounds.sft import is_admissible


def expm_series(X, terms=40):
    out, term = np.eye(len(X)), np.eye(len(X))
    for n in range(1, terms):
        term = term @ X / n
        out = out + term
    return out


def test_identity_return_examples(golden):
    assert find_identity_return(LocallyConstantCocycle.constant(golden, np.eye(2)), 4) == (1,)
    R5 = LocallyConstantCocycle.constant(golden, rotation(2 * math.pi / 5), group="SL")
    assert find_identity_return(R5, 6) == (1, 1, 1, 1, 1)
    assert find_identity_return(R5, 4) is None
    C = LocallyConstantCocycle.constant(golden, np.diag([2.0, 0.5]), group="SL")
    assert find_identity_return(C, 8) is None


def test_identity_return_mixed(full2):
    # R on 1 and R^-1 on 2: the first return is at period 2 over (1, 2)
    A = LocallyConstantCocycle.from_symbols(full2, {1: rotation(0.9), 2: rotation(-0.9)}, group="SL")
    assert find_identity_return(A, 3) == (1, 2)


def test_root_examples():
    assert np.allclose(matrix_nth_root(np.diag([4.0, 0.25]), 2), np.diag([2.0, 0.5]), atol=1e-14)
    for k in (2, 3, 7):
        assert np.allclose(matrix_nth_root(rotation(1.2), k), rotation(1.2 / k), atol=1e-13)
    with pytest.raises(RootUnavailable):
        matrix_nth_root(-np.eye(2), 2)
    with pytest.raises(RootUnavailable):
        matrix_nth_root(np.diag([-2.0, -0.5]), 3)
    with pytest.raises(InputError):
        matrix_nth_root(np.eye(2), 0)


def test_root_round_trip_1000():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        X = rng.normal(size=(2, 2))
        X *= rng.uniform(0, 0.3) / oracles.opnorm(X)
        g = expm_series(X)
        N = int(rng.integers(1, 30))
        r = matrix_nth_root(g, N)
        assert oracles.opnorm(np.linalg.matrix_power(r, N) - g) <= 1e-10


@settings(max_examples=40)
@given(st.integers(0, 10 ** 6), st.integers(1, 40), st.sampled_from([2, 3]))
def test_root_special_linear(seed, N, d):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(d, d))
    X -= np.trace(X) / d * np.eye(d)
    X *= 0.3 / oracles.opnorm(X)
    g = expm_series(X)
    info = {}
    r = matrix_nth_root(g, N, info=info)
    assert abs(np.linalg.det(r) - 1) <= 1e-9
    assert info["power_error"] <= 1e-10
    assert np.allclose(r, expm_series(X / N), atol=1e-12)


def check_plan(A, A2, plan, targets, eps):
    p = plan
    assert len(p.p_tilde) == p.ell and all(len(w) == p.ell for w in p.w_tilde)
    blocks = [p.p_tilde] + list(p.w_tilde)
    assert len(set(blocks)) == len(blocks)
    pats = p.affected()
    assert len(set(pats)) == len(pats) and len({len(x) for x in pats}) == 1
    assert patterns_disjoint(pats)
    for i, (W, g) in enumerate(zip(p.words, targets)):
        assert is_admissible(A.base, W)
        assert oracles.opnorm(oracles.product(A2.value, A2.k, W) - g) <= 1e-10
        assert p.product_errors[i] <= 1e-10
    assert not p.spurious
    # independent sup distance: all listed windows plus random admissible ones
    worst = 0.0
    k, k2 = A.k, A2.k
    lev = A2
    while lev is not None and lev is not A:
        for w in lev.table:
            c = len(w) // 2
            worst = max(worst, oracles.opnorm(lev.table[w] - A.value(w[c - k:c + k + 1])))
        lev = lev.fallback
    rng = np.random.default_rng(0)
    ts = A.base
    for _ in range(300):
        w = [int(rng.integers(1, ts.alphabet_size + 1))]
        while len(w) < 2 * k2 + 1:
            w.append(int(rng.choice(ts.successors(w[-1]))))
        w = tuple(w)
        d = oracles.opnorm(A2.value(w) - A.value(w[k2 - k:k2 + k + 1]))
        worst = max(worst, d)
    assert worst < eps
    assert worst <= p.distance + 1e-12
    assert c0_distance(A, A2) == p.distance


def test_identity_golden_plan(identity_stack):
    st_ = identity_stack
    check_plan(st_["A"], st_["A2"], st_["plan"], st_["targets"], 0.25)
    assert st_["covering"].certified


def test_identity_full_shift(full2):
    A = LocallyConstantCocycle.constant(full2, np.eye(2), group="SL")
    rng = np.random.default_rng(1)
    targets = []
    for _ in range(2):
        X = rng.normal(size=(2, 2))
        X -= np.trace(X) / 2 * np.eye(2)
        targets.append(expm_series(0.15 * X / oracles.opnorm(X)))
    A2, plan = covering_perturbation(A, (1,), targets, 0.2)
    check_plan(A, A2, plan, targets, 0.2)


def test_single_block_plan(golden):
    A = LocallyConstantCocycle.constant(golden, np.eye(2), group="SL")
    g = expm_series(np.array([[0.0, 0.05], [0.04, 0.0]]))
    eps = 2 * oracles.opnorm(g - np.eye(2)) * (1 + 1e-9)
    A2, plan = covering_perturbation(A, (1,), [g], eps)
    assert plan.N == 1
    check_plan(A, A2, plan, [g], eps)


def test_infeasible(golden):
    A = LocallyConstantCocycle.constant(golden, np.eye(2), group="SL")
    g = rotation(0.5)
    with pytest.raises(Infeasible):
        covering_perturbation(A, (1,), [g], 1e-3, N_cap=5)


def test_requires_identity_return(golden):
    A = LocallyConstantCocycle.constant(golden, rotation(0.3), group="SL")
    with pytest.raises(InputError):
        covering_perturbation(A, (1,), [np.eye(2)], 0.2)
    with pytest.raises(InputError):
        covering_perturbation(LocallyConstantCocycle.constant(golden, np.eye(2)), (2, 2), [np.eye(2)], 0.2)


def test_patterns_disjoint_bruteforce():
    assert patterns_disjoint([(1, 2), (2, 1), (1, 1)])
    assert not patterns_disjoint([(1, 2), (1, 2)])
    assert not patterns_disjoint([(1, 2), (1, 2, 1)])
