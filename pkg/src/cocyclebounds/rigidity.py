"""Upper bounds from forbidden cylinders, necessary tests for isometric
conjugacy, and a continuous bounded cocycle that is not conjugate to an
isometric one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _batch as B
from .cocycle import TIE_SLACK, LocallyConstantCocycle, iterate_on_periodic, spectral_norm
from .errors import InputError
from .sft import (TransitionSystem, Word, admissible_words, as_word, avoid_word_system,
                  is_admissible, lind_gap_sweep, topological_entropy)

EIG_TOL = 1e-8
BAND_TOL = 8.0
NODE_CAP = 200_000


class PrecisionError(InputError):
    """The point is not specified far enough to evaluate what was asked."""


# ---------------------------------------------------------------- forbidden cylinders

@dataclass
class _Level:
    k: int
    table: dict
    keys: np.ndarray | None   # sparse levels only
    vals: list | None


def _levels(A: LocallyConstantCocycle) -> list[_Level]:
    out, cur = [], A
    while cur is not None:
        if cur.fallback is None:
            out.append(_Level(cur.k, cur.table, None, None))
        else:
            ws = list(cur.table)
            keys = np.array(ws, dtype=np.int16).reshape(len(ws), 2 * cur.k + 1)
            out.append(_Level(cur.k, cur.table, keys, [cur.table[w] for w in ws]))
        cur = cur.fallback
    return out


def _resolve(levels, known, c):
    """Value at centre c if the known symbols already determine it, else None.

    Unknown positions act as wildcards, so a sparse key that agrees with
    every known symbol of its window keeps the value undetermined.
    """
    n = len(known)
    for lev in levels:
        lo, hi = c - lev.k, c + lev.k
        if lo >= 0 and hi < n:
            v = lev.table.get(known[lo:hi + 1])
            if v is not None:
                return v
            if lev.keys is None:
                raise InputError(f"no value for window {known[lo:hi + 1]}")
            continue
        if lev.keys is None:
            return None
        a, b = max(lo, 0), min(hi, n - 1)
        if a <= b:
            seg = np.asarray(known[a:b + 1], dtype=np.int16)
            hit = (lev.keys[:, a - lo:b - lo + 1] == seg).all(axis=1).any()
        else:
            hit = len(lev.keys) > 0
        if hit:
            return None
    raise InputError("cocycle chain ended without a complete level")


def _all_extensions_exceed(A, levels, w, N, start, thr, budget):
    """True when every admissible right extension of w gives ||A_N|| > thr
    for the N steps with centres start, ..., start + N - 1."""
    ts = A.base
    reach = start + N - 1 + levels[0].k

    def dfs(known, step, prod):
        budget[0] -= 1
        if budget[0] < 0:
            return False
        while step < N:
            v = _resolve(levels, known, start + step)
            if v is None:
                if len(known) > reach:
                    return False          # undetermined from the left: give up
                for b in ts.successors(known[-1]):
                    if not dfs(known + (b,), step, prod):
                        return False
                return True
            prod = v @ prod
            step += 1
        return spectral_norm(prod) > thr * (1.0 + TIE_SLACK)   # clear of rounding ties

    return dfs(tuple(w), 0, np.eye(A.dim))


@dataclass
class ForbiddenCylinder:
    word: Word
    N: int
    start: int
    kappa: float
    threshold: float
    level: str
    bound: float                  # entropy of the system avoiding word
    base_entropy: float
    empty: bool
    searched: int

    @property
    def gap(self) -> float:
        return self.base_entropy - self.bound


def forbidden_cylinder_upper(A: LocallyConstantCocycle, kappa: float, horizon: int,
                             level: str = "interval", max_len: int | None = None,
                             candidates=None, node_cap: int = NODE_CAP):
    """Search for a word w and N <= horizon such that every continuation of w
    has an N-step product of norm above the threshold.

    level="interval" uses kappa^2: a point of B(A, kappa) has every interval
    product bounded by kappa^2, so no such point contains w anywhere and the
    bounded set sits inside the system avoiding w.  level="point" uses kappa
    itself and only excludes the cylinder at the chosen offset.
    Words are tried by length, then N, then lexicographically; ``candidates``
    replaces the exhaustive word list.  Returns None when nothing is found.
    """
    if kappa < 1:
        raise InputError("kappa must be at least 1")
    if level not in ("interval", "point"):
        raise InputError("level must be 'interval' or 'point'")
    thr = kappa ** 2 if level == "interval" else kappa
    ts = A.base
    levels = _levels(A)
    k_min = levels[-1].k
    h = topological_entropy(ts)
    sup = A.sup_norm()
    if candidates is None:
        top = max_len if max_len is not None else horizon + 2 * levels[0].k + 1
        pool = ((L, w) for L in range(1, top + 1) for w in admissible_words(ts, L))
    else:
        pool = sorted(((len(w), as_word(w)) for w in candidates), key=lambda t: (t[0], t[1]))
    searched = 0
    for L, w in pool:
        if not is_admissible(ts, w):
            continue
        for N in range(1, horizon + 1):
            if sup ** N <= thr:
                continue
            for start in range(min(k_min, L - 1), L):
                searched += 1
                budget = [node_cap]
                if _all_extensions_exceed(A, levels, w, N, start, thr, budget):
                    av = avoid_word_system(ts, w)
                    bound = av.entropy()
                    return ForbiddenCylinder(w, N, start, kappa, thr, level, bound, h,
                                             av.empty, searched)
    return None


def verify_forbidden(A: LocallyConstantCocycle, fc: ForbiddenCylinder, node_cap: int = NODE_CAP) -> bool:
    budget = [node_cap]
    ok = _all_extensions_exceed(A, _levels(A), fc.word, fc.N, fc.start, fc.threshold, budget)
    if not ok:
        return False
    bound = avoid_word_system(A.base, fc.word).entropy()
    return bound == fc.bound or abs(bound - fc.bound) <= 1e-12


# ---------------------------------------------------------------- isometric test

@dataclass
class ConjugacyVerdict:
    period: int
    tested: int
    failures: list = field(default_factory=list)   # (word, modulus)
    tol: float = EIG_TOL

    @property
    def passed(self) -> bool:
        return not self.failures

    def __bool__(self):
        return self.passed

    def summary(self) -> str:
        if self.passed:
            return (f"no obstruction up to period {self.period} ({self.tested} periodic words, "
                    f"tol {self.tol:g}); this is a necessary condition only")
        w, mod = self.failures[0]
        return (f"not conjugate into O(d): return over {w} has an eigenvalue of modulus {mod:.12g} "
                f"({len(self.failures)} failures up to period {self.period})")


def _least_rotation(w):
    return min(w[i:] + w[:i] for i in range(len(w)))


def eigen_moduli(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape == (2, 2):
        # closed form, exact on unipotent input where eigvals would split by sqrt(eps)
        tr, det = m[0, 0] + m[1, 1], m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        disc = tr * tr - 4 * det
        if disc <= 0:
            r = math.sqrt(abs(det))
            return np.array([r, r])
        s = math.sqrt(disc)
        return np.abs(np.array([(tr + s) / 2, (tr - s) / 2]))
    return np.abs(np.linalg.eigvals(m))


def isometric_necessary(A: LocallyConstantCocycle, max_period: int, tol: float = EIG_TOL) -> ConjugacyVerdict:
    """Every periodic return must be conjugate into O(d), so all eigenvalue
    moduli of A_{|q|}(q) must be 1.  Periodic words are taken up to rotation."""
    if max_period < 1:
        raise InputError("max_period must be positive")
    ts = A.base
    fails, tested = [], 0
    for n in range(1, max_period + 1):
        seen = set()
        for w in admissible_words(ts, n):
            if not ts.allowed(w[-1], w[0]):
                continue
            r = _least_rotation(w)
            if r in seen:
                continue
            seen.add(r)
            tested += 1
            mods = eigen_moduli(iterate_on_periodic(A, r, n))
            bad = mods[np.abs(mods - 1.0) > tol]
            if bad.size:
                fails.append((r, float(bad[np.argmax(np.abs(bad - 1.0))])))
    return ConjugacyVerdict(max_period, tested, fails, tol)


# ---------------------------------------------------------------- non-rigid example

def default_sequence(k: int) -> float:
    return math.cos(math.log(k + 1))


def _unbordered_pair(ts: TransitionSystem, ell: int):
    """Words v != w of length ell with every concatenation admissible and v
    occurring in a concatenation only at block boundaries."""
    words = admissible_words(ts, ell)
    for v in words:
        for w in words:
            if v == w:
                continue
            if not all(ts.allowed(x[-1], y[0]) for x in (v, w) for y in (v, w)):
                continue
            ok = True
            for x in (v, w):
                for y in (v, w):
                    xy = x + y
                    if any(xy[j:j + ell] == v for j in range(1, ell)):
                        ok = False
            if ok:
                return v, w
    raise InputError(f"no suitable pair of words of length {ell}")


@dataclass
class BlockPoint:
    """x_0 x_1 ... = blocks[0] blocks[1] ... followed by tail repeated forever.

    Blocks are 0 for v and 1 for w; tail None means unspecified beyond the
    listed blocks.
    """
    blocks: tuple
    tail: int | None = None

    def block(self, i: int):
        if i < len(self.blocks):
            return self.blocks[i]
        if self.tail is None:
            raise PrecisionError(f"point specified to {len(self.blocks)} blocks, block {i} requested")
        return self.tail


def x_k(k: int) -> BlockPoint:
    """v^k followed by w forever; shifting by k blocks lands on w^infinity."""
    return BlockPoint((0,) * k, 1)


@dataclass
class TruncatedCocycle:
    """A(x) = [[1, phi(s^l x) - phi(x)], [0, 1]] with phi = a_k on the cylinder
    of v^k w (k >= 1) and 0 elsewhere, evaluated through the depth-D truncation

        phi_D = a_k on v^k w for k <= D,  a_D on v^(D+1),  0 elsewhere.

    phi_D is locally constant, and sup |phi - phi_D| <= ``phi_error`` for every
    point whose v-runs have length at most ``probe`` (or are infinite).
    """
    base: TransitionSystem
    ell: int
    a: Callable[[int], float]
    D: int
    v: Word
    w: Word
    probe: int = 10_000
    phi_error: float = field(init=False)
    checks: dict = field(init=False)

    def __post_init__(self):
        ks = np.arange(1, self.probe + 2)
        seq = np.array([self.a(int(k)) for k in ks])
        self._seq = seq
        self.phi_error = self.phi_error_upto(self.probe + 1, infinite=True)
        diff = np.abs(np.diff(seq))
        tail_env = np.maximum.accumulate(diff[::-1])[::-1]
        self.checks = {
            "max_abs": float(np.max(np.abs(seq))),
            "bounded": bool(np.max(np.abs(seq)) <= 1.0),
            "diff_at_D": float(tail_env[self.D - 1]) if self.D - 1 < diff.size else 0.0,
            "diff_tail_end": float(tail_env[-1]),
            "spread": float(seq.max() - seq.min()),
            "probe": self.probe,
        }

    def phi_error_upto(self, max_run: int, infinite: bool = False) -> float:
        """sup |phi - phi_D| over points whose finite v-runs are at most max_run;
        ``infinite`` adds points with an infinite v-run (phi = 0 there)."""
        aD = self.a(self.D)
        deep = np.array([self.a(m) for m in range(self.D + 1, max_run + 1)])
        err = float(np.max(np.abs(deep - aD))) if deep.size else 0.0
        return max(err, abs(aD)) if infinite else err

    # a point is a sequence of blocks so x_{i l + j} = block_i[j]
    def symbols(self, x: BlockPoint, n_blocks: int) -> Word:
        out = []
        for i in range(n_blocks):
            out.extend(self.v if x.block(i) == 0 else self.w)
        return tuple(out)

    def _run(self, x: BlockPoint, i: int, cap: int):
        """(run length of v-blocks from block i, capped at cap; next block or None)."""
        m = 0
        while m < cap:
            if x.tail == 0 and i + m >= len(x.blocks):
                return cap, None
            if x.block(i + m) != 0:
                return m, x.block(i + m)
            m += 1
        return m, None

    def phi_D(self, x: BlockPoint, i: int) -> float:
        """phi_D at the shift of x by i blocks (block-aligned positions only;
        the other offsets give 0 because v only occurs at block boundaries)."""
        m, nxt = self._run(x, i, self.D + 1)
        if m == 0:
            return 0.0
        if m > self.D:
            return self.a(self.D)
        return self.a(m) if nxt == 1 else 0.0

    def phi(self, x: BlockPoint, i: int) -> float:
        """Exact phi, for points whose run from block i is resolvable."""
        m, nxt = self._run(x, i, self.probe + 1)
        if m > self.probe:
            if x.tail == 0:
                return 0.0
            raise PrecisionError("v-run longer than the probed range")
        return self.a(m) if (m and nxt == 1) else 0.0

    def phi_at(self, x: BlockPoint, t: int, exact: bool = False) -> float:
        i, r = divmod(t, self.ell)
        if r:
            return 0.0
        return self.phi(x, i) if exact else self.phi_D(x, i)

    def value(self, x: BlockPoint, t: int, exact: bool = False) -> np.ndarray:
        """A at the shift of x by t symbols."""
        off = self.phi_at(x, t + self.ell, exact) - self.phi_at(x, t, exact)
        return np.array([[1.0, off], [0.0, 1.0]])

    def iterate(self, x: BlockPoint, n: int, start: int = 0, exact: bool = False) -> np.ndarray:
        out = np.eye(2)
        for t in range(start, start + n):
            out = self.value(x, t, exact) @ out
        return out

    def iterate_norms(self, x: BlockPoint, n_max: int, exact: bool = False) -> np.ndarray:
        out, cur = np.empty(n_max), np.eye(2)
        for t in range(n_max):
            cur = self.value(x, t, exact) @ cur
            out[t] = spectral_norm(cur)
        return out

    def telescoped(self, x: BlockPoint, k: int, exact: bool = True) -> np.ndarray:
        off = self.phi_at(x, k * self.ell, exact) - self.phi_at(x, 0, exact)
        return np.array([[1.0, off], [0.0, 1.0]])

    def remainder_factor(self) -> float:
        """C_l: the largest norm of a product of at most l steps, over all
        positions of every pair of length-(D+3) block words."""
        best = 1.0
        from itertools import product as iproduct
        span = self.D + 3
        for bl in iproduct((0, 1), repeat=min(span, 16)):
            x = BlockPoint(bl, None)
            for t0 in range(self.ell):
                cur = np.eye(2)
                for r in range(self.ell):
                    try:
                        cur = self.value(x, t0 + r) @ cur
                    except PrecisionError:
                        break
                    best = max(best, spectral_norm(cur))
        return best

    def sample_point(self, rng, n_blocks: int, p_v: float = 0.5) -> BlockPoint:
        bl = tuple(int(b) for b in (rng.random(n_blocks) >= p_v))
        return BlockPoint(bl, int(rng.integers(0, 2)))


def example_cocycle(ell: int = 3, a: Callable[[int], float] | None = None, D: int = 12,
                    base: TransitionSystem | None = None, probe: int = 10_000) -> TruncatedCocycle:
    if ell < 1 or D < 1:
        raise InputError("ell and D must be positive")
    base = base if base is not None else TransitionSystem.golden_mean()
    v, w = _unbordered_pair(base, ell)
    return TruncatedCocycle(base, ell, a if a is not None else default_sequence, D, v, w, probe)


@dataclass
class NonconjugacyReport:
    beta: float
    beta2: float
    spread: tuple
    T: np.ndarray
    trace: float
    det: float
    orth_defect: float
    conclusive: bool
    message: str


def nonconjugacy_witness(ell: int, a: Callable[[int], float], ks1: Sequence[int], ks2: Sequence[int],
                         min_gap: float = 0.1, cocycle: TruncatedCocycle | None = None) -> NonconjugacyReport:
    """Limits beta, beta' of a along two subsequences give T = [[1, beta - beta'], [0, 1]].

    T is conjugate to a limit of S^-1 S' for S, S' in O(2), so a continuous
    conjugacy into O(2) would force T into O(2); but the only trace-2
    element of O(2) is Id.  With ``cocycle`` the products along x^(k) are
    evaluated and their offsets used for the limits.
    """
    def tail_vals(ks):
        ks = list(ks)
        if cocycle is not None:
            vals = [-cocycle.iterate(x_k(k), k * cocycle.ell, exact=True)[0, 1] for k in ks]
        else:
            vals = [a(k) for k in ks]
        tail = vals[len(vals) // 2:] or vals
        return float(tail[-1]), float(max(tail) - min(tail))

    beta, s1 = tail_vals(ks1)
    beta2, s2 = tail_vals(ks2)
    d = beta - beta2
    T = np.array([[1.0, d], [0.0, 1.0]])
    defect = spectral_norm(T.T @ T - np.eye(2))
    conclusive = abs(d) >= min_gap and abs(d) > 2 * max(s1, s2)
    if conclusive:
        msg = (f"T = [[1, {d:.6g}], [0, 1]] has trace 2 and ||T^T T - Id|| = {defect:.6g} > 0, "
               f"so T is not orthogonal and no continuous conjugacy into O(2) exists "
               f"(lag {ell}, limit spread {max(s1, s2):.3g})")
    else:
        msg = (f"inconclusive: limit gap {abs(d):.3g} is below {min_gap:g} "
               f"or within the subsequence spread {max(s1, s2):.3g}")
    return NonconjugacyReport(beta, beta2, (s1, s2), T, float(np.trace(T)), float(np.linalg.det(T)),
                              defect, conclusive, msg)


def peak_subsequences(count: int = 3, start: int = 1):
    """Indices where log(k+1) is near 2 pi j and near 2 pi j + pi, so the
    default sequence approaches +1 and -1 respectively."""
    ks1 = [int(round(math.exp(2 * math.pi * j))) - 1 for j in range(start, start + count)]
    ks2 = [int(round(math.exp(2 * math.pi * j + math.pi))) - 1 for j in range(start, start + count)]
    return ks1, ks2


# ---------------------------------------------------------------- Lind scaling

@dataclass
class LindReport:
    rows: list
    rho: float
    band_ratio: float
    tol: float
    positive: bool
    decreasing: bool

    @property
    def ok(self) -> bool:
        return self.positive and self.band_ratio <= self.tol

    def csv(self) -> str:
        lines = ["n,gap,normalized"]
        lines += [f"{r.n},{r.gap:.17g},{r.normalized:.17g}" for r in self.rows]
        return "\n".join(lines) + "\n"


def runs(symbol: int, n_range) -> list:
    return [(symbol,) * n for n in n_range]


def lind_scaling_report(ts: TransitionSystem, words, n_range=None, tol: float = BAND_TOL) -> LindReport:
    """gap_n and gap_n * rho^n per word; the band tolerance is an engineering
    default (the constants in the gap estimate are only known to exist)."""
    if callable(words):
        if n_range is None:
            raise InputError("n_range is required with a word generator")
        words = [words(n) for n in n_range]
    sweep = lind_gap_sweep(ts, words)
    positive = all(r.gap > 0 for r in sweep.rows)
    return LindReport(sweep.rows, sweep.rho, sweep.band_ratio(), tol, positive, sweep.monotone)
