"""The nested m-ary tree of cylinders driven by a multiple covering certificate,
its entropy lower bound, the kappa bound and a perturbation harness."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _batch as B
from .cocycle import LocallyConstantCocycle, prefix_products, product_over_transition
from .covering import MultiCoverCertificate, Region
from .errors import InputError, VerificationError
from .sft import amalgamate, as_word


@dataclass(eq=False)
class BranchNode:
    i: int
    j: int
    word: tuple          # cumulative word
    n: int               # checkpoint time (iterates from the root)
    letter: tuple        # terminal window
    region: int          # atom of the union holding the checkpoint product
    product: np.ndarray  # checkpoint product A_n
    margin: float
    segment: tuple = ()  # layer word appended to the parent (empty at the root)
    layer: int = 0       # which layer (1..m) the segment came from


@dataclass(eq=False)
class BranchTree:
    m: int
    L: int
    depth: int
    k: int
    V: Region
    levels: list         # levels[i][j] -> BranchNode

    def node(self, i, j) -> BranchNode:
        return self.levels[i][j]

    def leaves(self) -> list:
        return self.levels[self.depth]

    def nodes(self):
        for lev in self.levels:
            yield from lev

    def min_margin(self) -> float:
        return min(nd.margin for nd in self.nodes())


class _SegmentCache:
    """Products and prefix products of layer words under one cocycle."""

    def __init__(self, A):
        self.A = A
        self.prod = {}
        self.pref = {}

    def product(self, w):
        p = self.prod.get(w)
        if p is None:
            p = product_over_transition(self.A, w)
            self.prod[w] = p
        return p

    def prefixes(self, w):
        p = self.pref.get(w)
        if p is None:
            p = np.stack(prefix_products(self.A, w))
            self.pref[w] = p
        return p


def build_tree(A: LocallyConstantCocycle, cert: MultiCoverCertificate, depth: int,
               root_letter=None) -> BranchTree:
    """Grow the tree level by level; child (i+1, m j + l - 1) appends the word of
    layer l at the parent's (letter, atom) that puts the new checkpoint deepest
    inside the union."""
    if depth < 1:
        raise InputError("depth must be at least 1")
    width = 2 * A.k + 1
    V = cert.union
    m = cert.m
    L = cert.max_iterates()
    a0 = as_word(root_letter) if root_letter is not None else cert.letters[0]
    cache = _SegmentCache(A)
    eye = np.eye(A.dim)
    marg, idx = V.margins(eye)
    if not marg[0] > 0:
        raise VerificationError("the identity is not inside the covering union; no root")
    levels = [[BranchNode(0, 0, a0, 0, a0, int(idx[0]), eye, float(marg[0]))]]
    for i in range(depth):
        nxt = []
        for par in levels[i]:
            for l in range(1, m + 1):
                words = cert.layers.get((par.letter, par.region, l))
                if not words:
                    raise VerificationError(f"no layer ({par.letter}, {par.region}, {l})")
                prods = np.stack([cache.product(w) for w in words]) @ par.product
                mg, at = V.margins(prods)
                best = int(np.argmax(mg))
                if not mg[best] > 0:
                    raise VerificationError(
                        f"checkpoint of node ({i + 1}, {m * par.j + l - 1}) leaves every atom "
                        f"(best margin {mg[best]:.3g}); the certificate does not cover the "
                        f"parent product")
                w = words[best]
                nxt.append(BranchNode(i + 1, m * par.j + l - 1, amalgamate(par.word, w, width),
                                      par.n + len(w) - width, w[-width:], int(at[best]),
                                      prods[best], float(mg[best]), w, l))
        levels.append(nxt)
    return BranchTree(m, L, depth, A.k, V, levels)


def _antichain_sorted(words) -> bool:
    ws = sorted(words)
    for u, v in zip(ws, ws[1:]):
        if v[:len(u)] == u:
            return False
    return True


@dataclass
class TreeCheck:
    ok: bool
    min_margin: float
    margins: dict
    failures: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def verify_tree(A2: LocallyConstantCocycle, tree: BranchTree, V: Region | None = None) -> TreeCheck:
    """Recompute every checkpoint product under A2 and test membership in V.

    Also re-checks nestedness, gap bounds and disjointness of each level.
    """
    V = tree.V if V is None else V
    if A2.k != tree.k:
        raise InputError("A2 has a different window radius than the tree")
    width = 2 * tree.k + 1
    cache = _SegmentCache(A2)
    fails, margins = [], {}
    prods = {(0, 0): np.eye(A2.dim)}
    for lev in tree.levels:
        for nd in lev:
            key = (nd.i, nd.j)
            if nd.i > 0:
                par = tree.levels[nd.i - 1][nd.j // tree.m]
                if nd.word[:len(par.word)] != par.word or \
                        amalgamate(par.word, nd.segment, width) != nd.word:
                    fails.append((key, "word does not extend the parent by its segment"))
                    continue
                gap = nd.n - par.n
                if not (0 < gap <= tree.L) or gap != len(nd.segment) - width:
                    fails.append((key, f"gap {gap} outside (0, {tree.L}]"))
                with np.errstate(over="ignore", invalid="ignore"):   # overflow = far outside V
                    prods[key] = cache.product(nd.segment) @ prods[(nd.i - 1, nd.j // tree.m)]
            with np.errstate(invalid="ignore"):
                mg, _ = V.margins(prods[key])
            margins[key] = float(mg[0])
            if not mg[0] > 0:
                fails.append((key, f"checkpoint outside V (margin {mg[0]:.3g})"))
        if not _antichain_sorted([nd.word for nd in lev]):
            fails.append(((lev[0].i, None), "level words are not prefix-incomparable"))
    mm = min(margins.values()) if margins else -math.inf
    return TreeCheck(not fails, mm, margins, fails)


# ---------------------------------------------------------------- bounds

@dataclass
class BoundReport:
    kappa: float
    gamma: float
    M: float
    kappa_V: float
    L: int
    m: int
    eps: float
    kappa_sharp: float | None = None
    max_prefix: float | None = None
    checked: int = 0
    ok: bool = True

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("kappa", "gamma", "M", "kappa_V", "L", "m", "eps",
                                              "kappa_sharp", "max_prefix", "checked", "ok")}


def kappa_bound(A: LocallyConstantCocycle, V: Region, L: int, eps: float = 0.0, m: int = 2,
                tree: BranchTree | None = None) -> BoundReport:
    """kappa = (M^L kappa_V)^2, gamma = log(m)/L; with a tree, every prefix product
    along every leaf word is checked against sqrt(kappa).

    kappa_sharp = (q * kappa_V)^2 where q bounds ||.^{+-1}|| of the partial
    products inside single layer segments: every iterate of a point of the
    tree's limit set is such a partial product times a checkpoint in V.
    """
    if eps < 0:
        raise InputError("eps must be nonnegative")
    if L < 1:
        raise InputError("L must be positive")
    nu, nui = V.norm_bounds()
    if not (math.isfinite(nu) and math.isfinite(nui)):
        raise InputError("V is unbounded in norm")
    M = max(A.sup_norm() + eps, 1.0)
    kV = max(nu, nui)
    lk = 2 * (L * math.log(M) + math.log(kV))
    kappa = math.exp(lk) if lk < 700 else math.inf
    rep = BoundReport(kappa, math.log(m) / L, M, kV, L, m, eps)
    if tree is None:
        return rep
    cache = _SegmentCache(A)
    root = math.sqrt(kappa)
    worst, q, checked = 1.0, 1.0, 0
    for nd in tree.nodes():
        if nd.i == 0:
            continue
        par = tree.levels[nd.i - 1][nd.j // tree.m]
        pre = cache.prefixes(nd.segment)
        full = pre @ par.product
        tw = np.maximum(B.norms(full), B.norms(B.inverses(full)))
        worst = max(worst, float(tw.max()))
        q = max(q, float(np.maximum(B.norms(pre), B.norms(B.inverses(pre))).max()))
        checked += len(full)
    rep.max_prefix = worst
    rep.checked = checked
    rep.ok = worst <= root
    rep.kappa_sharp = (q * kV) ** 2
    return rep


def embed_prefix(tree: BranchTree, s) -> tuple:
    """Word of the node reached by j_i = m j_(i-1) + s_i."""
    s = list(s)
    if len(s) > tree.depth:
        raise InputError("sequence longer than the tree depth")
    j = 0
    for c in s:
        if not 0 <= c < tree.m:
            raise InputError(f"symbol {c} outside 0..{tree.m - 1}")
        j = tree.m * j + c
    return tree.levels[len(s)][j].word


@dataclass
class WordCountReport:
    N: int
    count: int
    threshold: int
    passed: bool


def word_count_lower(tree: BranchTree, N: int) -> WordCountReport:
    """Distinct length-N factors of leaf words read at checkpoint offsets."""
    gaps = [nd.n - tree.levels[nd.i - 1][nd.j // tree.m].n for nd in tree.nodes() if nd.i > 0]
    if N < 1:
        raise InputError("N must be positive")
    if N > tree.depth * min(gaps):
        raise InputError(f"N = {N} exceeds depth * min gap = {tree.depth * min(gaps)}")
    seen = set()
    for leaf in tree.leaves():
        w = leaf.word
        offs, nd = [], leaf
        while nd is not None:
            offs.append(nd.n)
            nd = tree.levels[nd.i - 1][nd.j // tree.m] if nd.i > 0 else None
        for o in offs:
            if o + N <= len(w):
                seen.add(w[o:o + N])
    thr = tree.m ** (N // tree.L)
    return WordCountReport(N, len(seen), thr, len(seen) >= thr)


# ---------------------------------------------------------------- perturbations

def _all_values(A):
    out = []
    lev = A
    while lev is not None:
        out.extend(lev.table.values())
        lev = lev.fallback
    return out


def _norm_path(A, w):
    """Norms of the successive factors along w."""
    width = 2 * A.k + 1
    return np.array([B.norms(A.value(w[t:t + width])) for t in range(len(w) - width)])


def delta_safe(A: LocallyConstantCocycle, tree: BranchTree) -> dict:
    """Safe radius for entrywise table perturbations ||phi' - phi|| <= delta.

    'formula' is min margin / (2 L M^L); 'rigorous' bounds the checkpoint
    drift through the whole tree (telescoping per segment, accumulated over
    the levels) and is found by bisection.  'delta' is the smaller one.
    """
    M = max(A.sup_norm(), 1.0)
    L = tree.L
    lm = L * math.log(M)
    formula = tree.min_margin() / (2 * L * math.exp(lm)) if lm < 700 else 0.0
    cinv = B.norms(B.inverses(tree.V.centers()))
    segs = {}
    for nd in tree.nodes():
        if nd.i > 0 and nd.segment not in segs:
            segs[nd.segment] = _norm_path(A, nd.segment)

    def ok(delta):
        err = {(0, 0): 0.0}
        for nd in tree.nodes():
            if nd.i == 0:
                continue
            pkey = (nd.i - 1, nd.j // tree.m)
            par = tree.levels[nd.i - 1][nd.j // tree.m]
            f = segs[nd.segment]
            hi = float(np.prod(f + delta))
            dS = hi - float(np.prod(f))
            e = hi * err[pkey] + dS * float(B.norms(par.product))
            err[(nd.i, nd.j)] = e
            if not cinv[nd.region] * e < nd.margin:
                return False
        return True

    lo, hi = 0.0, max(formula, 1e-12) * 4
    while ok(hi) and hi < 1:
        lo, hi = hi, hi * 2
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return {"formula": formula, "rigorous": lo, "delta": min(formula, lo)}


def perturb_table(A: LocallyConstantCocycle, delta: float, rng) -> LocallyConstantCocycle:
    """Same-window perturbation with every entry moved by at most delta.

    SL values are moved to v exp(X), X traceless with ||v|| (e^||X|| - 1) <= delta,
    which stays in SL; GL values get an additive perturbation.
    """
    def move(v):
        d = v.shape[0]
        X = rng.normal(size=(d, d))
        if A.group == "SL":
            X -= np.trace(X) / d * np.eye(d)
            t = math.log1p(delta * rng.uniform() / B.norms(v))
            X *= t / B.norms(X)
            return v @ B.expm_stack(X[None])[0]
        return v + X * (delta * rng.uniform() / B.norms(X))

    return _map_levels(A, move)


def _map_levels(A, f):
    fb = _map_levels(A.fallback, f) if A.fallback is not None else None
    return LocallyConstantCocycle(A.base, A.k, {w: f(v) for w, v in A.table.items()}, A.group, fb)


def scale_entry(A: LocallyConstantCocycle, window, factor: float) -> LocallyConstantCocycle:
    """Copy of A with one table value multiplied by a scalar (group becomes GL)."""
    window = as_word(window)
    lev, chain = A, []
    while lev is not None:
        chain.append(lev)
        lev = lev.fallback
    fb = None
    for lev in reversed(chain):
        table = dict(lev.table)
        if window in table:
            table[window] = table[window] * factor
        fb = LocallyConstantCocycle(lev.base, lev.k, table, "GL", fb)
    return fb


def most_used_window(A: LocallyConstantCocycle, tree: BranchTree) -> tuple:
    """The table window met most often along the tree segments."""
    width = 2 * A.k + 1
    counts = {}
    for nd in tree.nodes():
        for t in range(len(nd.segment) - width):
            w = nd.segment[t:t + width]
            lev = A
            while lev is not None:
                cut = A.k - lev.k
                key = w[cut:len(w) - cut]
                if key in lev.table:
                    counts[key] = counts.get(key, 0) + 1
                    break
                lev = lev.fallback
    return max(counts, key=counts.get)
