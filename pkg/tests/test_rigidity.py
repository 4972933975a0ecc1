import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cocyclebounds.cocycle import LocallyConstantCocycle, rotation
from cocyclebounds.rigidity import (BlockPoint, PrecisionError, eigen_moduli, example_cocycle,
                                    forbidden_cylinder_upper, isometric_necessary,
                                    lind_scaling_report, nonconjugacy_witness,
                                    peak_subsequences, runs, verify_forbidden, x_k)
from cocyclebounds.sft import TransitionSystem, avoid_word_system, topological_entropy

D = np.diag([2.0, 0.5])


@pytest.fixture(scope="module")
def example():
    return example_cocycle(3, D=12)


def test_forbidden_constant_hyperbolic():
    A = LocallyConstantCocycle.constant(TransitionSystem.full_shift(1), D, group="SL")
    fc = forbidden_cylinder_upper(A, 10, 8, level="point")
    assert fc.word == (1,) and fc.N == 4
    assert fc.empty and fc.bound == -math.inf
    fi = forbidden_cylinder_upper(A, 10, 8)
    assert fi.N == 7          # interval level compares against kappa^2 = 100 < 2^7


def test_forbidden_rotation_none(full2):
    A = LocallyConstantCocycle.from_symbols(full2, {1: rotation(0.3), 2: rotation(2.0)}, group="SL")
    assert forbidden_cylinder_upper(A, 1.5, 10) is None


def test_forbidden_g0(g0, full2):
    fc = forbidden_cylinder_upper(g0, 4, 8)
    assert fc is not None and fc.N <= 8
    assert fc.bound < math.log(2) and fc.gap > 0
    assert fc.bound == pytest.approx(avoid_word_system(full2, fc.word).entropy(), abs=1e-12)
    assert verify_forbidden(g0, fc)
    # every continuation of the word really breaks the bound (brute force)
    L = len(fc.word) + fc.N
    for w in oracles.words(full2.matrix, L):
        if w[:len(fc.word)] != fc.word:
            continue
        steps = [g0.value((s,)) for s in w[fc.start:fc.start + fc.N]]
        P = np.eye(2)
        for f in steps:
            P = f @ P
        assert oracles.opnorm(P) > 16


def test_forbidden_tampered(g0):
    fc = forbidden_cylinder_upper(g0, 4, 8)
    assert not verify_forbidden(g0, dataclasses.replace(fc, word=(1,) * len(fc.word)))
    assert not verify_forbidden(g0, dataclasses.replace(fc, bound=fc.bound - 0.1))


def test_forbidden_bound_dominates_words(g0, full2):
    # bounded words never contain the forbidden word where its N steps fit
    fc = forbidden_cylinder_upper(g0, 4, 8)
    from cocyclebounds.cocycle import bounded_words
    n = 12
    for w in bounded_words(g0, n, 4, "all-intervals").words:
        for i in range(n - len(fc.word) + 1):
            if i + fc.start + fc.N <= n - 1:
                assert w[i:i + len(fc.word)] != fc.word


def test_isometric_examples(golden):
    R = LocallyConstantCocycle.from_symbols(golden, {1: rotation(0.4), 2: rotation(-1.1)}, group="SL")
    assert isometric_necessary(R, 8)
    C = LocallyConstantCocycle.constant(golden, D, group="SL")
    v = isometric_necessary(C, 3)
    assert not v and v.failures[0] == ((1,), pytest.approx(2.0))
    assert "necessary" in isometric_necessary(R, 2).summary()


def conj_cocycle(ts, k, seed, bump=None):
    rng = np.random.default_rng(seed)
    P = np.eye(2) + 0.5 * rng.normal(size=(2, 2))
    Pi = np.linalg.inv(P)
    tab = {}
    for w in oracles.words(ts.matrix, 2 * k + 1):
        O = rotation(rng.uniform(-math.pi, math.pi))
        if rng.random() < 0.3:
            O = O @ np.diag([1.0, -1.0])
        tab[w] = P @ O @ Pi
    if bump is not None:
        w0 = next(iter(tab))
        tab[w0] = P @ np.diag([bump, 1 / bump]) @ Pi
    return LocallyConstantCocycle(ts, k, tab)


@settings(max_examples=30)
@given(st.integers(0, 10 ** 6), st.sampled_from([0, 1]))
def test_conjugated_orthogonal_passes(seed, k):
    A = conj_cocycle(TransitionSystem.golden_mean(), k, seed)
    assert isometric_necessary(A, 6, tol=1e-7)


@settings(max_examples=30)
@given(st.integers(0, 10 ** 6), st.floats(1e-4, 0.5))
def test_bumped_return_fails(seed, e):
    A = conj_cocycle(TransitionSystem.full_shift(2), 0, seed, bump=1 + e)
    assert not isometric_necessary(A, 1, tol=1e-5)


def test_eigen_moduli_unipotent():
    assert np.allclose(eigen_moduli(np.array([[1.0, 3.0], [0.0, 1.0]])), 1, atol=1e-15)
    assert np.allclose(sorted(eigen_moduli(D)), [0.5, 2])


def test_example_definition(example):
    X = example
    assert len(X.v) == len(X.w) == 3 and X.v != X.w
    assert X.checks["bounded"]
    x = BlockPoint((1, 0, 0, 1), 1)           # starts with w: phi(x) = 0
    assert X.phi_D(x, 0) == 0.0
    assert X.value(x, 0)[0, 1] == X.phi_at(x, 3) == X.a(2)
    for t in (1, 2, 4, 5):
        assert X.phi_at(BlockPoint((0,) * 6, 1), t) == 0.0
    with pytest.raises(PrecisionError):
        X.phi(BlockPoint((0, 0), None), 0)


def test_example_telescoping(example):
    X = example
    for k in range(1, 51):
        A = X.iterate(x_k(k), k * X.ell, exact=True)
        assert np.allclose(A, [[1, -X.a(k)], [0, 1]], atol=1e-12)
    rng = np.random.default_rng(8)
    for _ in range(20):
        x = X.sample_point(rng, 80)
        for k in (1, 7, 20, 50):
            exact = X.telescoped(x, k)
            assert np.allclose(X.iterate(x, k * X.ell, exact=True), exact, atol=1e-12)
            err = X.phi_error_upto(80, infinite=True)
            assert oracles.opnorm(X.iterate(x, k * X.ell) - exact) <= 2 * err + 1e-12


def test_example_norm_bound(example):
    X = example
    C = X.remainder_factor()
    bound = (1 + math.sqrt(2)) * C
    rng = np.random.default_rng(9)
    for _ in range(10):
        x = X.sample_point(rng, 200)
        assert X.iterate_norms(x, 500).max() <= bound


def test_example_periodic_returns_unipotent(example):
    X = example
    for p in ((0,), (1,), (0, 1), (0, 0, 1), (0, 1, 1, 1)):
        x = BlockPoint(p * 40, None)
        R = X.iterate(x, len(p) * X.ell, start=len(p) * X.ell)
        assert R[1, 0] == 0 and R[0, 0] == R[1, 1] == 1
        assert np.allclose(eigen_moduli(R), 1, atol=1e-12)


def test_nonconjugacy_witness(example):
    ks1, ks2 = peak_subsequences()
    rep = nonconjugacy_witness(3, example.a, ks1, ks2)
    d = rep.beta - rep.beta2
    assert rep.conclusive and rep.trace == 2 and rep.det == pytest.approx(1)
    assert rep.orth_defect >= 0.5 * abs(d) and abs(d) > 1.9
    # through the cocycle products along x^(k), at the first peaks only
    via = nonconjugacy_witness(3, None, ks1[:1], [int(round(math.exp(math.pi))) - 1],
                               cocycle=example)
    assert via.conclusive and via.beta == pytest.approx(example.a(ks1[0]), abs=1e-12)
    same = nonconjugacy_witness(3, lambda k: 0.3, ks1, ks1)
    assert not same.conclusive and np.allclose(same.T, np.eye(2))


def test_nonconjugacy_half():
    rep = nonconjugacy_witness(3, lambda k: 0.5 if k < 0 else 0.0, [-1, -2], [1, 2])
    assert rep.beta - rep.beta2 == 0.5
    expect = oracles.opnorm(np.array([[0, 0.5], [0.5, 0.25]]))
    assert rep.orth_defect == pytest.approx(expect) and expect > 0.5


@given(st.floats(-3, 3).filter(lambda d: abs(d) > 1e-6))
def test_unipotent_never_orthogonal(d):
    rep = nonconjugacy_witness(3, lambda k: d if k < 0 else 0.0, [-1], [1], min_gap=0)
    assert rep.trace == 2 and rep.det == 1 and rep.orth_defect > 0


def test_lind_reports(full2, golden):
    r = lind_scaling_report(full2, runs(1, range(6, 13)))
    assert r.ok and r.decreasing and r.band_ratio <= 8
    assert r.rho == pytest.approx(2)
    g = lind_scaling_report(golden, runs(1, range(6, 13)))
    assert g.ok and g.rho == pytest.approx((1 + 5 ** 0.5) / 2)
    for row in g.rows:
        assert row.gap > 0
        assert row.normalized == pytest.approx(row.gap * g.rho ** row.n)
    assert r.csv().splitlines()[0] == "n,gap,normalized" and len(r.csv().splitlines()) == 8
    h = topological_entropy(full2)
    assert r.rows[0].gap == pytest.approx(h - avoid_word_system(full2, (1,) * 6).entropy())
