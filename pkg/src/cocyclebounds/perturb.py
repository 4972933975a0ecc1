"""C0-small perturbations: from an identity return to the covering condition,
a localized hyperbolic twist that forces a forbidden cylinder, and the full
lower/upper bound pipeline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import logm

from . import _batch as B
from .cocycle import LocallyConstantCocycle, iterate_on_periodic, spectral_norm
from .errors import CocycleError, InputError, VerificationError
from .covering import SAFETY
from .sft import (Word, admissible_words, as_word, distinct_transitions_detail, is_admissible,
                  topological_entropy)

ROOT_TOL = 1e-10
RETURN_TOL = 1e-9


class RootUnavailable(CocycleError):
    pass


class Infeasible(CocycleError):
    pass


# ---------------------------------------------------------------- identity returns and roots

def find_identity_return(A: LocallyConstantCocycle, max_period: int, tol: float = RETURN_TOL):
    """Least period, then lexicographically least, periodic word q with A_|q|(q) = Id."""
    ts = A.base
    eye = np.eye(A.dim)
    for n in range(1, max_period + 1):
        for w in admissible_words(ts, n):
            if not ts.allowed(w[-1], w[0]):
                continue
            if spectral_norm(iterate_on_periodic(A, w, n) - eye) <= tol:
                return w
    return None


def matrix_nth_root(g, N: int, special: bool | None = None, info: dict | None = None) -> np.ndarray:
    """exp(log(g) / N) with the principal logarithm.

    For det g = 1 the logarithm is projected to trace zero so that the root
    stays special linear; the removed trace goes into ``info``.
    """
    g = np.asarray(g, dtype=float)
    if N < 1:
        raise InputError("N must be positive")
    d = g.shape[0]
    ev = np.linalg.eigvals(g)
    if np.any((np.abs(ev.imag) <= 1e-12 * max(1.0, np.abs(ev).max())) & (ev.real <= 0)):
        raise RootUnavailable(f"eigenvalues {ev} meet the closed negative axis")
    X = logm(g)
    if np.iscomplexobj(X):
        if np.abs(X.imag).max() > 1e-9:
            raise RootUnavailable("no real principal logarithm")
        X = X.real
    if special is None:
        special = abs(np.linalg.det(g) - 1.0) <= 1e-9
    dev = 0.0
    if special:
        dev = float(np.trace(X)) / d
        X = X - dev * np.eye(d)
    r = B.expm_stack(X[None] / N)[0]
    err = spectral_norm(np.linalg.matrix_power(r, N) - g)
    if info is not None:
        info.update(trace_removed=dev, power_error=err)
    if err > ROOT_TOL:
        raise RootUnavailable(f"root re-powers with error {err:.3g}")
    return r


# ---------------------------------------------------------------- covering perturbation

@dataclass
class PerturbationPlan:
    p: Word
    p_tilde: Word
    w_tilde: list
    sources: list            # the transition words u_i with w_i = u_i minus the leading p
    ell: int
    ell1: int
    ell2: int
    N: int
    lead: int                # p~ blocks in front of v_i in the covering word
    k: int                   # window radius of the perturbed cocycle
    letter: Word
    targets: list
    roots: list
    conj: dict               # (i, m) -> factor inserted at the m-th perturbed step
    patterns: dict           # (i, j) -> p~^j w~_i p~^(N - j)
    words: list              # covering words, one per target
    eps: float
    distance: float = 0.0
    product_errors: list = field(default_factory=list)
    spurious: list = field(default_factory=list)
    root_info: list = field(default_factory=list)

    @property
    def v(self) -> list:
        return [self.p_tilde * self.N + wt + self.p_tilde * self.N for wt in self.w_tilde]

    def affected(self) -> list:
        return list(self.patterns.values())


def _steps(A, W, kk):
    """A-values of the steps of W read with window radius kk."""
    k = A.k
    return [A.value(W[s + kk - k:s + kk + k + 1]) for s in range(len(W) - 2 * kk - 1)]


def _prefixes(vals, d):
    out, cur = [], np.eye(d)
    for v in vals:
        out.append(cur)
        cur = v @ cur
    out.append(cur)
    return out


def _source_words(ts, p, t):
    """t words u_i in T(p, p) whose blocks w~_i = (u_i minus the leading p, then p)^l2
    avoid p^infinity and occur in p~^2 w~_j p~^2 only as w~_j itself at the
    aligned slot.  That rules out every unintended hit of a perturbed
    cylinder along the covering words."""
    n = len(p)
    ask = 4 * t + n
    while True:
        det = distinct_transitions_detail(ts, p, p, ask, len(p) + 1)
        us = [u for u in det.words if u[:n] == p and u[-n:] == p]
        L = det.length
        ell = n * L // math.gcd(n, L)
        pt = p * (ell // n)
        pinf = p * (ell // n + 3)
        chosen, blocks = [], []
        for u in us:
            wt = (u[n:] + p) * (ell // L)
            if _is_subword(wt, pinf):
                continue
            ok = _occurrences(wt, pt * 2 + wt + pt * 2) == [2 * ell]
            for b in blocks:
                if not ok:
                    break
                ok = not _occurrences(wt, pt * 2 + b + pt * 2) and \
                    not _occurrences(b, pt * 2 + wt + pt * 2)
            if ok:
                chosen.append(u)
                blocks.append(wt)
                if len(chosen) == t:
                    return chosen, ell
        if ask > 64 * (t + n):
            raise Infeasible("not enough transition words with unambiguous blocks")
        ask *= 2


def _occurrences(w, text):
    m = len(w)
    return [i for i in range(len(text) - m + 1) if text[i:i + m] == w]


def _is_subword(w, text):
    m = len(w)
    return any(text[i:i + m] == w for i in range(len(text) - m + 1))


def covering_perturbation(A: LocallyConstantCocycle, p, targets, eps: float,
                          N_cap: int = 400, completion_cap: int = 1 << 16):
    """Perturb A on the cylinders of p~^j w~_i p~^(N-j) so that the covering word
    built around v_i = p~^N w~_i p~^N has product exactly g_i.

    Returns (A2, plan).  A2 is a sparse table on the affected windows with A
    as fallback.  N is the least value with ||A2 - A|| <= eps/2 on every
    affected window.
    """
    p = as_word(p)
    ts = A.base
    if eps <= 0:
        raise InputError("eps must be positive")
    targets = [np.asarray(g, dtype=float) for g in targets]
    if not targets:
        raise InputError("no targets")
    n = len(p)
    if not is_admissible(ts, p) or not ts.allowed(p[-1], p[0]):
        raise InputError(f"{p} is not a periodic word")
    if spectral_norm(iterate_on_periodic(A, p, n) - np.eye(A.dim)) > RETURN_TOL:
        raise InputError(f"A has no identity return over {p}")
    t = len(targets)
    us, ell = _source_words(ts, p, t)
    L = len(us[0])
    ell1, ell2 = ell // n, ell // L
    pt = p * ell1
    wts = [(u[n:] + p) * ell2 for u in us]
    special = A.group == "SL"
    d = A.dim
    letter_of = lambda k2: (p * (2 * k2 // n + 2))[:2 * k2 + 1]
    for N in range(1, N_cap + 1):
        k2 = -(-(N + 1) * ell // 2) + A.k
        width = 2 * k2 + 1
        lead = max(0, -(-width // ell) - N)
        letter = letter_of(k2)
        tail = letter
        words, conj, roots, infos = [], {}, [], []
        worst = 0.0
        for i, (wt, g) in enumerate(zip(wts, targets)):
            W = pt * (lead + N) + wt + pt * N + tail
            vals = _steps(A, W, k2)
            pre = _prefixes(vals, d)
            C = pre[-1]
            info = {}
            r = matrix_nth_root(np.linalg.solve(C, g), N, special, info)
            roots.append(r)
            infos.append(info)
            for m in range(1, N + 1):
                s = (lead + m) * ell
                X = pre[s]
                Y = np.linalg.solve(X, r @ X)
                conj[(i, m)] = Y
                worst = max(worst, spectral_norm(vals[s] @ Y - vals[s]))
            words.append(W)
        if worst <= eps / 2:
            break
    else:
        raise Infeasible(f"no N <= {N_cap} brings the perturbation below eps/2 = {eps / 2:g}")
    # table on every admissible completion of the affected patterns
    patterns = {}
    table = {}
    cl = width - (N + 1) * ell
    for i, wt in enumerate(wts):
        for j in range(N):
            pat = pt * j + wt + pt * (N - j)
            patterns[(i, j)] = pat
            Y = conj[(i, N - j)]
            comps = _completions(ts, pat, cl, completion_cap)
            for c in comps:
                win = pat + c
                table[win] = A.value(win[k2 - A.k:k2 + A.k + 1]) @ Y
    A2 = LocallyConstantCocycle(ts, k2, table, A.group, A)
    plan = PerturbationPlan(p, pt, wts, us, ell, ell1, ell2, N, lead, k2, letter, targets, roots,
                            conj, patterns, words, eps, root_info=infos)
    plan.distance = c0_distance(A, A2)
    plan.product_errors = [spectral_norm(_product(A2, W) - g) for W, g in zip(words, targets)]
    plan.spurious = spurious_matches(A2, plan)
    return A2, plan


def _completions(ts, pat, cl, cap):
    out = [()]
    for _ in range(cl):
        nxt = []
        for c in out:
            last = c[-1] if c else pat[-1]
            nxt.extend(c + (b,) for b in ts.successors(last))
        out = nxt
        if len(out) > cap:
            raise Infeasible(f"more than {cap} window completions")
    return out


def _product(A, W):
    from .cocycle import product_over_transition
    return product_over_transition(A, W)


def spurious_matches(A2, plan) -> list:
    """Steps of the covering words that hit a perturbed window other than the
    intended ones, as (word index, step)."""
    width = 2 * plan.k + 1
    want = {(plan.lead + m) * plan.ell for m in range(1, plan.N + 1)}
    out = []
    for i, W in enumerate(plan.words):
        for s in range(len(W) - width):
            hit = W[s:s + width] in A2.table
            if hit != (s in want):
                out.append((i, s))
    return out


def patterns_disjoint(patterns) -> bool:
    """All-pairs check: equal-length distinct words give disjoint cylinders."""
    pats = list(patterns)
    lens = {len(x) for x in pats}
    if len(lens) > 1:
        return False
    for a in range(len(pats)):
        for b in range(a + 1, len(pats)):
            if pats[a] == pats[b]:
                return False
    return True


def _chain(A):
    out, cur = [], A
    while cur is not None:
        out.append(cur)
        cur = cur.fallback
    return out


def c0_distance(A: LocallyConstantCocycle, A2: LocallyConstantCocycle) -> float:
    """sup_x ||A2(x) - A(x)||, both read on a common window.

    Every window of A2 not listed in a sparse level falls through to the
    bottom level, so the sup is taken over all sparse keys plus the bottom
    table against A.
    """
    best = 0.0
    chain = _chain(A2)
    for lev in chain:
        for w, v in lev.table.items():
            c = len(w) // 2
            best = max(best, spectral_norm(v - A.value(w[c - A.k:c + A.k + 1]))) \
                if lev.k >= A.k else best
        if lev.k < A.k:
            raise InputError("the perturbed chain reads fewer symbols than A")
    return best


# ---------------------------------------------------------------- twist for the upper bound

@dataclass
class TwistPlan:
    word: Word               # periodic word carrying the twist
    k: int                   # radius of the twist windows
    lam: float
    windows: list
    distance: float
    candidates: list         # words handed to the forbidden-cylinder search


def _used_windows(words, kh):
    seen = set()
    span = 2 * kh + 1
    for W in words:
        for s in range(len(W) - span + 1):
            seen.add(W[s:s + span])
    return seen


def lyapunov_twist(A2: LocallyConstantCocycle, A: LocallyConstantCocycle, used_words, eps: float,
                   horizon: int, lam: float | None = None, max_period: int = 10, max_k: int = 8):
    """Insert A(x) P_t H P_t^-1 on the windows of a periodic word c with
    A_|c|(c) = Id, where P_t is the t-step product along c and
    H = diag(lam, 1/lam).  Along c the n-step products become P_n H^n, so a
    short piece of c is a forbidden cylinder.  The twist windows avoid every
    subword of ``used_words`` so that certified products are unchanged.
    """
    ts = A.base
    d = A.dim
    lam = lam if lam is not None else 1.0 + 0.9 * eps
    cache = {}
    chain_top = [lev for lev in _chain(A2) if lev is not A]
    for q in range(1, max_period + 1):
        for c in admissible_words(ts, q):
            if not ts.allowed(c[-1], c[0]) or len(set(c[i:] + c[:i] for i in range(q))) < q:
                continue
            if spectral_norm(iterate_on_periodic(A, c, q) - np.eye(d)) > RETURN_TOL:
                continue
            for kh in range(max(A.k, 1), max_k + 1):
                if kh not in cache:
                    cache[kh] = _used_windows(used_words, kh)
                span = 2 * kh + 1
                o = q * (kh // q + 1)
                cinf = c * (2 * span // q + 4)
                wins = [cinf[o + t - kh:o + t + kh + 1] for t in range(q)]
                if len(set(wins)) < q or any(w in cache[kh] for w in wins):
                    continue
                plan = _twist_plan(A, A2, chain_top, c, kh, wins, lam, eps, horizon)
                if plan is not None:
                    return plan
    raise Infeasible("no periodic word with an identity return avoids the used words")


def _twist_plan(A, A2, chain_top, c, kh, wins, lam, eps, horizon):
    d = A.dim
    q = len(c)
    for _ in range(40):
        H = np.eye(d)
        H[0, 0], H[1, 1] = lam, 1.0 / lam
        table = {}
        for t, win in enumerate(wins):
            P = iterate_on_periodic(A, c, t)
            table[win] = A.value(win[kh - A.k:kh + A.k + 1]) @ P @ H @ np.linalg.inv(P)
        dist = max(spectral_norm(v - A.value(w[kh - A.k:kh + A.k + 1])) for w, v in table.items())
        if dist < eps:
            break
        lam = 1.0 + 0.5 * (lam - 1.0)
    else:
        return None
    twist = LocallyConstantCocycle(A.base, kh, table, A.group, A)
    top = chain_top[0]
    A3 = LocallyConstantCocycle(A.base, top.k, top.table, top.group, twist)
    cinf = c * ((horizon + 2 * kh + 1) // q + 3)
    cands = sorted({cinf[o:o + L] for o in range(q) for L in range(1, horizon + 2 * kh + 2)},
                   key=lambda w: (len(w), w))
    return A3, TwistPlan(c, kh, lam, wins, dist, cands)


# ---------------------------------------------------------------- pipeline

def default_targets(A, U_radius: float = 0.2, h: float = 0.05, pool_radius: float = 0.3,
                    pool_spacing: float = 0.08):
    """A greedy covering family for U = B_r drawn from inverses of a net of a
    larger ball; every target sits near the identity so its root exists.

    Returns (U, targets, certificate, pool size).
    """
    from .covering import Region, build_net, greedy_family
    group = A.group if A.group == "SL" else "GL"
    U = Region.ball(U_radius, A.dim, group)
    pool_net = build_net(Region.ball(pool_radius, A.dim, group), pool_spacing)
    pool = [(("net", i), np.linalg.inv(x)) for i, x in enumerate(pool_net.points)]
    chosen, cert = greedy_family(pool, U, h)
    return U, [g for _, g in chosen], cert, len(pool)


@dataclass
class PipelineReport:
    ok: bool
    stages: list                              # (name, status, detail)
    constants: dict
    failed_stage: str | None = None
    files: dict = field(default_factory=dict)
    objects: dict = field(default_factory=dict)

    def text(self) -> str:
        lines = ["pipeline: " + ("certified" if self.ok else f"failed at {self.failed_stage}")]
        for name, status, detail in self.stages:
            lines.append(f"  {name}: {status}" + (f" ({detail})" if detail else ""))
        lines.append("constants:")
        for k in sorted(self.constants):
            v = self.constants[k]
            lines.append(f"  {k} = {v:.17g}" if isinstance(v, float) else f"  {k} = {v}")
        if self.files:
            lines.append("files:")
            lines += [f"  {k}: {v}" for k, v in sorted(self.files.items())]
        return "\n".join(lines) + "\n"


class _Stages:
    def __init__(self):
        self.items = []

    def add(self, name, status, detail=""):
        self.items.append((name, status, detail))


def theorem_a_pipeline(A: LocallyConstantCocycle, eps: float, depth: int = 8, horizon: int = 12,
                       U_radius: float = 0.2, h: float = 0.05, pool_radius: float = 0.3,
                       pool_spacing: float = 0.08, max_period: int = 12, out=None,
                       seed: int = 0) -> PipelineReport:
    """Identity return -> covering perturbation -> covering certificate ->
    two-layer multiple covering -> branching tree (kappa, gamma) -> twist and
    forbidden cylinder (gamma').  ``seed`` is recorded; the pipeline is
    deterministic."""
    from .branching import build_tree, kappa_bound, verify_tree
    from .covering import cocycle_multi_cover, verify_covering, verify_multi_cover
    from .rigidity import forbidden_cylinder_upper

    st = _Stages()
    consts = {"eps": float(eps), "depth": depth, "horizon": horizon, "U_radius": float(U_radius),
              "h": float(h), "seed": seed, "pool_radius": float(pool_radius),
              "pool_spacing": float(pool_spacing), "max_period": max_period,
              "root_tol": ROOT_TOL, "return_tol": RETURN_TOL, "covering_safety": SAFETY}
    objs = {"A": A}

    def fail(stage, msg):
        st.add(stage, "failed", msg)
        return PipelineReport(False, st.items, consts, stage, {}, objs)

    p = find_identity_return(A, max_period)
    if p is None:
        return fail("identity-return", f"no identity return up to period {max_period}; "
                    "produce one first (a non-dominated cocycle admits such a perturbation)")
    st.add("identity-return", "found", f"p = {p}")
    consts["period"] = len(p)
    try:
        U, targets, gcert, npool = default_targets(A, U_radius, h, pool_radius, pool_spacing)
    except CocycleError as e:
        return fail("targets", str(e))
    if not gcert.certified:
        return fail("targets", gcert.message)
    st.add("targets", "certified", f"{len(targets)} targets from {npool} net inverses")
    try:
        A2, plan = covering_perturbation(A, p, targets, eps)
    except CocycleError as e:
        return fail("covering-perturbation", str(e))
    objs.update(A2=A2, plan=plan)
    consts.update(N=plan.N, ell=plan.ell, k_perturbed=plan.k, targets=len(targets),
                  max_product_error=float(max(plan.product_errors)))
    if plan.spurious or max(plan.product_errors) > ROOT_TOL or not patterns_disjoint(plan.affected()):
        return fail("covering-perturbation", "plan checks failed")
    st.add("covering-perturbation", "built", f"N = {plan.N}, l = {plan.ell}, d_C0 = {plan.distance:.6g}")
    fam = [(W, _product(A2, W)) for W in plan.words]
    cov = verify_covering(fam, U, h)
    objs["covering"] = cov
    if not cov.certified:
        return fail("covering", cov.message)
    st.add("covering", "certified", f"min margin {cov.min_margin:.6g}")
    try:
        mc = cocycle_multi_cover(A2, [plan.letter], U, h, candidates={plan.letter: plan.words})
    except CocycleError as e:
        return fail("multi-cover", str(e))
    objs["multi"] = mc
    chk = verify_multi_cover(A2, mc)
    if not chk:
        return fail("multi-cover", str(chk.failures[:1]))
    st.add("multi-cover", "certified", f"m = {mc.m}")
    try:
        tree = build_tree(A2, mc, depth)
    except CocycleError as e:
        return fail("tree", str(e))
    tc = verify_tree(A2, tree)
    if not tc:
        return fail("tree", str(tc.failures[:1]))
    rep = kappa_bound(A2, mc.union, tree.L, m=mc.m, tree=tree)
    objs.update(tree=tree, bound=rep)
    kappa = rep.kappa_sharp
    gamma = rep.gamma
    consts.update(m=mc.m, L=tree.L, kappa=float(kappa), kappa_formula=float(rep.kappa),
                  gamma=float(gamma), tree_min_margin=float(tc.min_margin))
    st.add("tree", "verified", f"depth {depth}, L = {tree.L}, kappa = {kappa:.6g}")
    used = [w for ws in mc.layers.values() for w in ws] + list(plan.words) + plan.affected()
    try:
        A3, twist = lyapunov_twist(A2, A, used, eps, horizon)
    except CocycleError as e:
        return fail("twist", str(e))
    objs.update(A_final=A3, twist=twist)
    if not verify_multi_cover(A3, mc) or not verify_tree(A3, tree):
        return fail("twist", "twist changed a certified product")
    st.add("twist", "built", f"c = {twist.word}, radius {twist.k}, lambda = {twist.lam:.6g}")
    fc = forbidden_cylinder_upper(A3, kappa, horizon, candidates=twist.candidates)
    if fc is None:
        return fail("forbidden-cylinder", f"none found up to horizon {horizon}")
    objs["forbidden"] = fc
    gamma2 = fc.bound
    htop = topological_entropy(A.base)
    dist = c0_distance(A, A3)
    consts.update(gamma_upper=float(gamma2), forbidden_N=fc.N, forbidden_len=len(fc.word),
                  h_top=float(htop), d_C0=float(dist))
    st.add("forbidden-cylinder", "found", f"w = {fc.word}, N = {fc.N}, gamma' = {gamma2:.12g}")
    ok = 0 < gamma <= gamma2 < htop and dist < eps
    st.add("sandwich", "ok" if ok else "failed",
           f"0 < {gamma:.6g} <= {gamma2:.12g} < {htop:.12g}, d_C0 = {dist:.6g} < {eps:g}")
    report = PipelineReport(ok, st.items, consts, None if ok else "sandwich", {}, objs)
    if out is not None:
        from .io import write_pipeline
        report.files = write_pipeline(report, out)
    return report
