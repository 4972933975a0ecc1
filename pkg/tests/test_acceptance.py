"""Acceptance criteria 1-12, each at its stated tolerance and time budget.

Every test prints one ``criterion N: PASS|FAIL`` line (also collected into the
pytest terminal summary).  Run directly with ``python3 tests/test_acceptance.py``.
"""
import math
import os
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

import conftest  # noqa: E402
import oracles  # noqa: E402
from cocyclebounds import _batch as B  # noqa: E402
from cocyclebounds.branching import (build_tree, delta_safe, kappa_bound, most_used_window,  # noqa: E402
                                     perturb_table, scale_entry, verify_tree, word_count_lower)
from cocyclebounds.cocycle import (LocallyConstantCocycle, bounded_entropy_upper,  # noqa: E402
                                   bounded_words, check_composition, product_over_transition,
                                   rotation)
from cocyclebounds.covering import (Region, build_net, cocycle_multi_cover,  # noqa: E402
                                    multi_cover_from_cover, sample_multi_cover, verify_covering,
                                    verify_multi_cover)
from cocyclebounds.io import reverify_pipeline  # noqa: E402
from cocyclebounds.perturb import (c0_distance, covering_perturbation, default_targets,  # noqa: E402
                                   theorem_a_pipeline)
from cocyclebounds.rigidity import (example_cocycle, isometric_necessary,  # noqa: E402
                                    nonconjugacy_witness, peak_subsequences, x_k)
from cocyclebounds.rigidity import lind_scaling_report, runs  # noqa: E402
from cocyclebounds.sft import (TransitionSystem, admissible_words, amalgamate,  # noqa: E402
                               higher_block, topological_entropy)

PHI = (1 + 5 ** 0.5) / 2
U = Region.ball(0.2)


class Criterion:
    """Times a block, then records and asserts the outcome."""

    def __init__(self, number, budget):
        self.number, self.budget = number, budget
        self.checks = []

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        dt = time.perf_counter() - self.t0
        if exc_type is not None:
            self.check("no exception", False, f"{exc_type.__name__}: {exc}")
        self.check(f"runtime < {self.budget:g} s", dt < self.budget, f"{dt:.1f} s")
        bad = [c for c in self.checks if not c[1]]
        line = (f"criterion {self.number:2d}: {'PASS' if not bad else 'FAIL'} "
                f"({len(self.checks) - len(bad)}/{len(self.checks)} checks, {dt:.1f} s)")
        if bad:
            line += "; failed: " + "; ".join(f"{n} [{d}]" for n, _, d in bad)
        print(line)
        conftest.ACCEPTANCE_LINES.append(line)
        if exc_type is None:
            assert not bad, line
        return False


def random_irreducible(rng, q, p):
    while True:
        H = (rng.random((q, q)) < p).astype(int)
        ts = TransitionSystem(H) if H.any() else None
        if ts is not None and ts.is_irreducible() and oracles.rho(H) < 2.2:
            return ts


# ---------------------------------------------------------------- 1-4: symbolic

def test_criterion_1_entropy():
    with Criterion(1, 1.0) as c:
        gm = TransitionSystem.golden_mean()
        c.check("golden mean", abs(topological_entropy(gm) - math.log(PHI)) <= 1e-9)
        for q in range(1, 9):
            c.check(f"full {q}-shift", abs(topological_entropy(TransitionSystem.full_shift(q))
                                           - math.log(q)) <= 1e-12)
        rng = np.random.default_rng(1)
        for ts in (gm, TransitionSystem.full_shift(2), random_irreducible(rng, 3, 0.5)):
            h = topological_entropy(ts)
            for n in range(1, 6):
                hb = topological_entropy(higher_block(ts, n).system())
                c.check(f"higher block {n}", abs(hb - h) <= 1e-9, f"{hb} vs {h}")


def test_criterion_2_transfer_matrix():
    with Criterion(2, 10.0) as c:
        rng = np.random.default_rng(2)
        systems = [TransitionSystem.golden_mean()] + [random_irreducible(rng, 4, 0.4) for _ in range(3)]
        for s, ts in enumerate(systems):
            H = np.array(ts.matrix, dtype=object)
            for n in range(1, 21):
                enum = len(admissible_words(ts, n))
                c.check(f"system {s} n={n}", enum == oracles.matrix_power_count(H, n),
                        f"{enum} vs {oracles.matrix_power_count(H, n)}")


def test_criterion_3_composition():
    with Criterion(3, 10.0) as c:
        ts = TransitionSystem.full_shift(2)
        worst = 0.0
        for j, (d, k) in enumerate([(2, 0), (2, 1), (3, 0), (3, 1), (2, 1)]):
            rng = np.random.default_rng(30 + j)
            A = LocallyConstantCocycle.from_function(ts, k, lambda w: np.eye(d) + 0.5 * rng.normal(size=(d, d)))
            width = 2 * k + 1
            for _ in range(1000):
                w = tuple(int(s) for s in rng.integers(1, 3, size=int(rng.integers(width + 1, 14))))
                w2 = w[-width:] + tuple(int(s) for s in rng.integers(1, 3, size=int(rng.integers(1, 10))))
                lhs = product_over_transition(A, amalgamate(w, w2, width))
                rhs = product_over_transition(A, w2) @ product_over_transition(A, w)
                ref = oracles.product(A.value, k, w2) @ oracles.product(A.value, k, w)
                err = max(oracles.opnorm(lhs - rhs), oracles.opnorm(lhs - ref)) / oracles.opnorm(ref)
                worst = max(worst, err)
                if not check_composition(A, w, w2):
                    c.check("check_composition", False, f"{w} {w2}")
        c.check("relative error <= 1e-10", worst <= 1e-10, f"worst {worst:.2e}")


def test_criterion_4_lind_scaling():
    with Criterion(4, 30.0) as c:
        full = lind_scaling_report(TransitionSystem.full_shift(2), runs(1, range(6, 13)))
        gaps = [r.gap for r in full.rows]
        c.check("full shift strictly decreasing", all(a > b for a, b in zip(gaps, gaps[1:])))
        c.check("full shift band ratio <= 8", full.band_ratio <= 8, f"{full.band_ratio:.4g}")
        c.check("normalized by 2^n", full.rho == pytest.approx(2) and all(
            r.normalized == pytest.approx(r.gap * 2 ** r.n) for r in full.rows))
        gm = lind_scaling_report(TransitionSystem.golden_mean(), runs(1, range(6, 13)))
        gaps = [r.gap for r in gm.rows]
        c.check("golden strictly decreasing", all(a > b for a, b in zip(gaps, gaps[1:])))
        c.check("golden band ratio <= 8", gm.band_ratio <= 8, f"{gm.band_ratio:.4g}")
        c.check("normalized by phi^n", gm.rho == pytest.approx(PHI))


# ---------------------------------------------------------------- 5-6: coverings

@pytest.fixture(scope="module")
def inverse_net_cover():
    t0 = time.perf_counter()
    fam = B.inverses(build_net(Region.ball(0.3), 0.02).points)
    cert = verify_covering(list(fam), U, 0.05)
    return fam, cert, time.perf_counter() - t0


def test_criterion_5_covering(inverse_net_cover):
    with Criterion(5, 60.0) as c:
        fam, cert, dt = inverse_net_cover
        c.t0 -= dt
        c.check("inverse net certifies", cert.certified, cert.message)
        c.check("min margin >= 1e-3", cert.min_margin >= 1e-3, f"{cert.min_margin:.4g}")
        ref = verify_covering([np.eye(2)], U, 0.05)
        c.check("identity family refuted", not ref.certified and ref.status == "refuted")


def test_criterion_6_multi_cover(inverse_net_cover):
    with Criterion(6, 300.0) as c:
        fam, cert, _ = inverse_net_cover
        used = [fam[i] for i in cert.used()]
        mc = multi_cover_from_cover(used, U, 2, 0.05)
        c.check("m, R0, delta inequality", mc.R0 - mc.m * mc.delta < 1 <= mc.R0 - (mc.m - 1) * mc.delta,
                f"m={mc.m} R0={mc.R0:.6g} delta={mc.delta:.6g}")
        firsts = [lay[0][0] for lay in mc.layers]
        c.check("layers disjoint", len(mc.layers) == 2 and len(set(firsts)) == 2)
        c.check("verify_multi_cover", bool(verify_multi_cover(None, mc)))
        rep = sample_multi_cover(mc, 10_000, seed=6)
        c.check("10^4 samples find witnesses", rep.ok and rep.min_margin > 0,
                f"min margin {rep.min_margin:.4g}")


# ---------------------------------------------------------------- 7-9: tree, robustness, perturbation

@pytest.fixture(scope="module")
def identity_perturbation():
    t0 = time.perf_counter()
    A = LocallyConstantCocycle.constant(TransitionSystem.golden_mean(), np.eye(2), group="SL")
    Ub, targets, _, _ = default_targets(A)
    A2, plan = covering_perturbation(A, (1,), targets, 0.25)
    return A, Ub, targets, A2, plan, time.perf_counter() - t0


@pytest.fixture(scope="module")
def depth10(identity_perturbation):
    A, Ub, _, A2, plan, dt = identity_perturbation
    t0 = time.perf_counter()
    mc = cocycle_multi_cover(A2, [plan.letter], Ub, 0.05, candidates={plan.letter: plan.words})
    tree = build_tree(A2, mc, 10)
    return A2, mc, tree, dt + time.perf_counter() - t0


def test_criterion_7_branching_tree(depth10):
    with Criterion(7, 300.0) as c:
        A2, mc, tree, dt = depth10
        c.t0 -= dt
        width = 2 * tree.k + 1
        c.check("1024 leaves", len(tree.leaves()) == 1024)
        nested = disjoint = gaps = True
        for i in range(1, tree.depth + 1):
            ws = [nd.word for nd in tree.levels[i]]
            disjoint &= oracles.is_antichain(ws) and len(set(ws)) == len(ws)
            for nd in tree.levels[i]:
                par = tree.levels[i - 1][nd.j // tree.m]
                nested &= nd.word[:len(par.word)] == par.word
                gaps &= 0 < nd.n - par.n <= tree.L
        c.check("nested", nested)
        c.check("disjoint", disjoint)
        c.check("gaps in (0, L]", gaps)
        rep = kappa_bound(A2, tree.V, tree.L, m=tree.m, tree=tree)
        M = max(A2.sup_norm(), 1.0)
        kv = max(1.0 + r for _, r in tree.V.atoms)
        c.check("kappa = (M^L kappa_V)^2", rep.kappa == pytest.approx((M ** tree.L * kv) ** 2, rel=1e-12),
                f"{rep.kappa:.6g}")
        # prefix products along the tree, each window once per node
        root = math.sqrt(rep.kappa)
        prods = {(0, 0): np.eye(2)}
        worst = 0.0
        for i in range(1, tree.depth + 1):
            for nd in tree.levels[i]:
                P = prods[(i - 1, nd.j // tree.m)]
                par_n = tree.levels[i - 1][nd.j // tree.m].n if i > 1 else 0
                seq = []
                for t in range(par_n, nd.n):
                    P = A2.value(nd.word[t:t + width]) @ P
                    seq.append(P)
                prods[(i, nd.j)] = P
                S = np.stack(seq)
                n = np.linalg.norm(S, ord=2, axis=(1, 2))
                ninv = n / np.abs(np.linalg.det(S))      # 2x2: ||P^-1|| = ||P|| / |det P|
                worst = max(worst, float(n.max()), float(ninv.max()))
        c.check("prefix products <= sqrt(kappa)", worst <= root, f"max {worst:.6g} vs {root:.6g}")
        wc = word_count_lower(tree, 2 * tree.L)
        c.check("word count at N = 2L meets m^2", wc.passed and wc.threshold == tree.m ** 2,
                f"{wc.count} >= {wc.threshold}")
        c.check("gamma = log m / L > 0", rep.gamma == pytest.approx(math.log(tree.m) / tree.L)
                and rep.gamma > 0, f"{rep.gamma:.6g}")
        up = bounded_entropy_upper(A2, rep.kappa, 3 * tree.L)
        c.check("gamma <= bounded_entropy_upper(3L)", rep.gamma <= up, f"{rep.gamma:.6g} <= {up:.6g}")


def test_criterion_8_perturbation_robustness(depth10):
    with Criterion(8, 120.0) as c:
        A2, _, tree, _ = depth10
        ds = delta_safe(A2, tree)
        c.check("delta_safe > 0", ds["delta"] > 0, f"{ds['delta']:.3g}")
        rng = np.random.default_rng(8)
        fails = sum(not verify_tree(perturb_table(A2, ds["delta"], rng), tree) for _ in range(100))
        c.check("100 perturbations pass", fails == 0, f"{fails} failed")
        bad = scale_entry(A2, most_used_window(A2, tree), 10.0)
        c.check("10x mutation fails", not verify_tree(bad, tree))


def test_criterion_9_perturbation_construction():
    with Criterion(9, 120.0) as c:
        A = LocallyConstantCocycle.constant(TransitionSystem.golden_mean(), np.eye(2), group="SL")
        Ub, targets, _, _ = default_targets(A)
        A2, plan = covering_perturbation(A, (1,), targets, 0.25)
        # independent sup distance over every listed window above A
        dist, lev = 0.0, A2
        while lev is not None and lev is not A:
            for w in lev.table:
                mid = len(w) // 2
                dist = max(dist, oracles.opnorm(lev.table[w] - A.value(w[mid:mid + 1])))
            lev = lev.fallback
        c.check("d_C0 < 0.25 recomputed", dist < 0.25, f"{dist:.6g}")
        c.check("package distance agrees", abs(c0_distance(A, A2) - dist) <= 1e-15)
        errs = [oracles.opnorm(oracles.product(A2.value, A2.k, W) - g)
                for W, g in zip(plan.words, targets)]
        c.check("products hit targets <= 1e-10", max(errs) <= 1e-10, f"{max(errs):.2e}")
        pats = plan.affected()
        c.check("affected cylinders disjoint", len({len(x) for x in pats}) == 1
                and all(a != b for i, a in enumerate(pats) for b in pats[i + 1:]))
        cov = verify_covering([(W, product_over_transition(A2, W)) for W in plan.words], Ub, 0.05)
        c.check("covering certifies", cov.certified, cov.message)


# ---------------------------------------------------------------- 10: end to end

def test_criterion_10_pipeline(tmp_path):
    with Criterion(10, 600.0) as c:
        gm = TransitionSystem.golden_mean()
        for name, M in (("identity", np.eye(2)), ("rotation 2pi/5", rotation(2 * math.pi / 5))):
            A = LocallyConstantCocycle.constant(gm, M, group="SL")
            out = tmp_path / name.split()[0]
            rep = theorem_a_pipeline(A, 0.25, depth=8, horizon=12, out=str(out))
            k = rep.constants
            c.check(f"{name}: pipeline ok", rep.ok, str(rep.failed_stage))
            if not rep.ok:
                continue
            c.check(f"{name}: 0 < gamma <= gamma' < log phi",
                    0 < k["gamma"] <= k["gamma_upper"] < math.log(PHI),
                    f"{k['gamma']:.4g} <= {k['gamma_upper']:.6g}")
            c.check(f"{name}: forbidden N <= 12", k["forbidden_N"] <= 12)
            res = reverify_pipeline(str(out))
            c.check(f"{name}: re-verified from files", all(res.values()), str(res))


# ---------------------------------------------------------------- 11: rigidity gallery

def test_criterion_11_rigidity():
    with Criterion(11, 120.0) as c:
        X = example_cocycle(3, D=12)
        c.check("a_k = cos(log(k+1))", all(X.a(k) == math.cos(math.log(k + 1)) for k in range(1, 20)))
        tele = all(np.allclose(X.iterate(x_k(k), k * X.ell, exact=True), [[1, -X.a(k)], [0, 1]], atol=1e-12)
                   for k in range(1, 51))
        rng = np.random.default_rng(11)
        err = X.phi_error_upto(700, infinite=True)
        worst_tele, worst_norm = 0.0, 0.0
        bound = (1 + math.sqrt(2)) * X.remainder_factor()
        for _ in range(100):
            x = X.sample_point(rng, 700)
            for k in (1, 10, 50):
                d = oracles.opnorm(X.iterate(x, k * X.ell) - X.telescoped(x, k))
                worst_tele = max(worst_tele, d)
            worst_norm = max(worst_norm, float(X.iterate_norms(x, 2000).max()))
        c.check("telescoping k <= 50", tele and worst_tele <= 2 * err + 1e-12,
                f"{worst_tele:.2e} vs {2 * err:.2e}")
        c.check("sup ||A_n|| <= (1+sqrt2) C_l", worst_norm <= bound, f"{worst_norm:.6g} <= {bound:.6g}")
        ks1, ks2 = peak_subsequences()
        w = nonconjugacy_witness(3, X.a, ks1, ks2)
        gap = abs(w.beta - w.beta2)
        c.check("witness trace 2", w.trace == 2 and w.conclusive)
        c.check("non-orthogonality >= 0.5 |beta - beta'|", w.orth_defect >= 0.5 * gap,
                f"{w.orth_defect:.4g} vs {gap:.4g}")
        ts = TransitionSystem.full_shift(2)
        R = LocallyConstantCocycle.from_symbols(ts, {1: rotation(0.4), 2: rotation(-1.3)}, group="SL")
        c.check("rotations pass isometric test", bool(isometric_necessary(R, 8)))
        C = LocallyConstantCocycle.constant(ts, np.diag([2.0, 0.5]), group="SL")
        c.check("diag(2,1/2) fails at period 1", not isometric_necessary(C, 1))


# ---------------------------------------------------------------- 12: oracle equivalence

def test_criterion_12_oracle_equivalence():
    with Criterion(12, 30.0) as c:
        ts = TransitionSystem.full_shift(2)
        G0 = LocallyConstantCocycle.from_symbols(
            ts, {1: rotation(2 * math.pi * 0.29), 2: np.diag([2.0, 0.5])}, group="SL")
        lang = bounded_words(G0, 12, 4, "all-intervals")
        brute = [w for w in oracles.words(ts.matrix, 12) if oracles.interval_bounded(G0.value, 0, w, 4)]
        c.check("count", lang.count == len(brute), f"{lang.count} vs {len(brute)}")
        c.check("word set", set(lang.words) == set(brute) and len(set(lang.words)) == lang.count)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
