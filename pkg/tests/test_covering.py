import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cocyclebounds import _batch as B
from cocyclebounds.covering import (MultiCoverCertificate, Region, build_net, eta,
                                    multi_cover_from_cover, recheck, recheck_delta,
                                    sample_closure, sample_multi_cover, uniform_delta,
                                    verify_covering, verify_multi_cover)
from cocyclebounds.covering import is_antichain as pkg_antichain
from cocyclebounds.errors import InputError

U = Region.ball(0.2)


@pytest.fixture(scope="module")
def inverse_family():
    net = build_net(Region.ball(0.3), 0.05)
    fam = B.inverses(net.points)
    cert = verify_covering(list(fam), U, 0.05)
    return fam, cert, [fam[i] for i in cert.used()]


def op_dist(a, b):
    return oracles.opnorm(a - b)


def test_net_basics():
    net = build_net(Region.ball(0.1), 0.05)
    assert any(np.allclose(p, np.eye(2)) for p in net.points)
    assert net.spacing <= 0.05
    assert np.allclose(np.linalg.det(net.points), 1, atol=1e-12)
    d = B.dist_to_identity(net.points)
    assert d.max() <= 0.1 + 1e-12


def test_net_growth_when_spacing_halves():
    # the uniform interior grid grows by 2^3 per halving (3-dimensional group);
    # the refined boundary shell keeps the total below that at these sizes
    counts, totals = [], []
    for h in (0.04, 0.02, 0.01):
        pts = build_net(Region.ball(0.2), h).points
        totals.append(len(pts))
        counts.append(int((B.dist_to_identity(pts) <= 0.1).sum()))
    for a, b in zip(counts, counts[1:]):
        assert 6.5 < b / a < 9.5
    for a, b in zip(totals, totals[1:]):
        assert 4 < b / a < 9.5


def test_net_covers_samples():
    region = Region.ball(0.15)
    net = build_net(region, 0.05)
    pts = oracles.sl2_samples(np.random.default_rng(1), 300, 0.15)
    for p in pts:
        best = np.linalg.norm(net.points - p, ord=2, axis=(1, 2)).min()
        assert best <= net.spacing + 1e-12


def test_net_with_slack():
    region = Region.ball(0.1).with_slack(0.1)
    net = build_net(region, 0.1)
    assert net.spacing <= 0.1
    assert (B.dist_to_identity(net.points) <= 0.21 + 1e-9).all()


def test_identity_family_refuted():
    cert = verify_covering([np.eye(2)], Region.ball(0.1), 0.02)
    assert not cert.certified and cert.status == "refuted"


def test_empty_family():
    with pytest.raises(InputError):
        verify_covering([], U, 0.05)


def test_inverse_net_certifies(inverse_family):
    fam, cert, used = inverse_family
    assert cert.certified and cert.min_margin > 1e-3
    assert recheck(cert)
    # oracle: each net point has a family member close to its inverse
    rng = np.random.default_rng(0)
    for i in rng.choice(len(cert.points), 50, replace=False):
        v = cert.points[i]
        best = np.linalg.norm(fam @ v - np.eye(2), ord=2, axis=(1, 2)).min()
        assert best < 0.2


def test_margins_improve_with_finer_spacing(inverse_family):
    fam, cert, _ = inverse_family
    fine = verify_covering(list(fam), U, 0.025)
    assert fine.certified and fine.min_margin >= cert.min_margin


def test_tampered_certificate_fails_recheck(inverse_family):
    _, cert, _ = inverse_family
    import copy
    bad = copy.copy(cert)
    bad.choice = cert.choice.copy()
    far = np.linalg.norm(cert.family @ cert.points[0] - np.eye(2), ord=2, axis=(1, 2))
    bad.choice[0] = int(np.argmax(far))
    assert not recheck(bad)


def test_soundness_by_sampling(inverse_family):
    _, cert, used = inverse_family
    G = np.stack(used)
    rng = np.random.default_rng(5)
    u, _ = sample_closure(U, 2000, rng)
    for p in u:
        m, _ = U.margins(G @ p)
        assert m.max() > 0


def test_rotation_family():
    rots = [oracles.rotation(2 * math.pi * j / 3) for j in range(3)]
    region = Region(tuple((R, 0.2) for R in rots))
    near = B.inverses(build_net(Region.ball(0.3), 0.05).points)
    family = [rots[1], rots[2]] + list(near)
    cert = verify_covering(family, region, 0.05)
    assert cert.certified and cert.min_margin > 0
    # the rotations alone permute the atoms isometrically and leave no margin
    c = verify_covering(rots[1:], Region(tuple((R, 0.2) for R in rots)), 0.05)
    assert not c.certified


def test_eta_examples():
    D = np.diag([2.0, 0.5])
    tiny = Region.ball(1e-9)
    assert eta(tiny, [D], 1.0) == pytest.approx(17, abs=1e-6)
    assert eta(tiny, [np.eye(2)], 0.5) == pytest.approx(2.5, abs=1e-6)
    with pytest.raises(InputError):
        eta(tiny, [np.zeros((2, 2))], 1.0)


def test_eta_guarantee_by_sampling():
    rng = np.random.default_rng(3)
    region = Region.ball(0.2)
    S = [np.diag([1.5, 1 / 1.5]), oracles.rotation(0.7) @ np.diag([1.2, 1 / 1.2])]
    r = 0.5
    e = eta(region, S, r)
    u, b = sample_closure(region, 1000, rng, outer=r)
    for i in range(1000):
        s = S[i % 2]
        # witness u' = u: u b = s u' b' with b' = u^-1 s^-1 u b
        bp = np.linalg.inv(u[i]) @ np.linalg.inv(s) @ u[i] @ b[i]
        assert op_dist(bp, np.eye(2)) < e


def test_uniform_delta(inverse_family):
    _, cert, used = inverse_family
    dc = uniform_delta(used, U, 1.0, 2.0, 0.05, base=cert)
    assert dc.certified and dc.delta > 0
    assert recheck_delta(dc)
    assert np.diff(dc.r_grid()).max() <= dc.delta / 2 + 1e-15
    # independent spot checks at R_lo, the midpoint and R_hi: points u b with
    # ||b - Id|| near R + delta land in U B_{R - delta} under some family member
    G = np.stack(used)
    Unet = build_net(U, 0.02).points
    Uinv = B.inverses(Unet)
    rng = np.random.default_rng(11)
    for R in (1.0, 1.5, 2.0):
        u, b = sample_closure(U, 60, rng, outer=R + dc.delta)
        for ui, bi in zip(u, b):
            x = ui @ bi
            g = G[np.argmin(B.dist_to_identity(G @ ui))]
            best = B.dist_to_identity(Uinv @ (g @ x)).min()
            assert best < R - dc.delta


def test_uniform_delta_identity_fails():
    dc = uniform_delta([np.eye(2)], Region.ball(0.1), 1.0, 2.0, 0.02)
    assert not dc.certified and dc.delta == 0


@pytest.fixture(scope="module")
def family_multi(inverse_family):
    _, cert, used = inverse_family
    return multi_cover_from_cover(used, U, 2, 0.05)


def test_family_multi_cover(family_multi):
    mc = family_multi
    assert mc.k0 == 1 and len(mc.prefixes) == 2 and len(set(mc.prefixes)) == 2
    assert mc.R0 - mc.m * mc.delta < 1 <= mc.R0 - (mc.m - 1) * mc.delta
    assert verify_multi_cover(None, mc)
    a, b = mc.layers
    assert a[0][0] != b[0][0]      # the layers differ in their first letter
    rep = sample_multi_cover(mc, 400, seed=2)
    assert rep.ok and rep.min_margin > 0


def test_family_multi_cover_needs_two_maps():
    with pytest.raises(InputError):
        multi_cover_from_cover([np.eye(2)], U, 2, 0.05)


def test_family_multi_cover_bad_m(family_multi):
    import copy
    bad = copy.copy(family_multi)
    bad.m += 1
    assert not verify_multi_cover(None, bad)


def test_cocycle_multi_cover(identity_stack):
    mc, A2 = identity_stack["multi"], identity_stack["A2"]
    assert isinstance(mc, MultiCoverCertificate)
    assert mc.m == 2
    check = verify_multi_cover(A2, mc)
    assert check, check.failures
    for a in mc.letters:
        for i in range(len(mc.union)):
            ws = mc.layer_union(a, i)
            assert oracles.is_antichain(ws) and pkg_antichain(ws)
            for w in ws:
                assert w[:2 * mc.k + 1] == a


def test_cocycle_multi_cover_mutation(identity_stack):
    mc, A2 = identity_stack["multi"], identity_stack["A2"]
    import copy
    key = sorted(mc.layers, key=repr)[0]
    w = list(mc.layers[key][0])
    w[len(w) // 2] = 3 - w[len(w) // 2]
    bad = copy.copy(mc)
    bad.layers = dict(mc.layers)
    bad.layers[key] = [tuple(w)] + list(mc.layers[key][1:])
    check = verify_multi_cover(A2, bad)
    assert not check
    assert any(f[:3] == key for f in check.failures)
    empty = copy.copy(mc)
    empty.layers = dict(mc.layers)
    empty.layers[key] = []
    check = verify_multi_cover(A2, empty)
    assert not check and any("empty" in f[3] for f in check.failures)


def test_cocycle_multi_cover_products(identity_stack):
    mc, A2 = identity_stack["multi"], identity_stack["A2"]
    for key, ws in mc.layers.items():
        for w, P in zip(ws, mc.products[key]):
            assert np.allclose(P, oracles.product(A2.value, A2.k, w), atol=1e-12)


@settings(max_examples=25)
@given(st.lists(st.lists(st.integers(1, 2), min_size=1, max_size=4).map(tuple), max_size=6))
def test_antichain_matches_bruteforce(ws):
    dup = len(set(ws)) < len(ws)
    assert pkg_antichain(ws) == (oracles.is_antichain(ws) and not dup)
