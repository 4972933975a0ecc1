"""Locally constant linear cocycles over an SFT and their word products."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DegenerateError, InputError
from .sft import TransitionSystem, Word, admissible_words, as_word, is_admissible

DET_FLOOR = 1e-12
SL_TOL = 1e-9
JACOBI_TOL = 1e-15
# products that hit a bound exactly (e.g. D^4 times rotations) round to either
# side of it; bounded-language tests accept up to this relative excess
TIE_SLACK = 1e-12


# ---------------------------------------------------------------- matrices

def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def hyperbolic(lam: float = 2.0) -> np.ndarray:
    return np.diag([lam, 1.0 / lam])


def _jacobi_sigma_max(m: np.ndarray) -> float:
    """Largest singular value by one-sided Jacobi rotations on the columns."""
    a = np.array(m, dtype=float, copy=True)
    d = a.shape[1]
    for _ in range(60):
        off = 0.0
        for p in range(d - 1):
            for q in range(p + 1, d):
                alpha = a[:, p] @ a[:, p]
                beta = a[:, q] @ a[:, q]
                gamma = a[:, p] @ a[:, q]
                if gamma == 0.0 or alpha == 0.0 or beta == 0.0:
                    continue
                off = max(off, abs(gamma) / math.sqrt(alpha) / math.sqrt(beta))
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                ap = a[:, p].copy()
                a[:, p] = c * ap - s * a[:, q]
                a[:, q] = s * ap + c * a[:, q]
        if off < JACOBI_TOL:
            break
    return float(np.sqrt((a * a).sum(axis=0)).max())


def spectral_norm(m: np.ndarray) -> float:
    """Operator 2-norm (largest singular value)."""
    m = np.asarray(m, dtype=float)
    if m.shape == (2, 2):
        # half the sum of the conformal and anticonformal parts; no cancellation
        a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
        return 0.5 * (math.hypot(a + d, b - c) + math.hypot(a - d, b + c))
    if m.size == 0:
        return 0.0
    return _jacobi_sigma_max(m)


def inverse(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape == (2, 2):
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) < DET_FLOOR:
            raise DegenerateError("singular matrix")
        return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
    if abs(np.linalg.det(m)) < DET_FLOOR:
        raise DegenerateError("singular matrix")
    return np.linalg.inv(m)


def inverse_norm(m: np.ndarray) -> float:
    return spectral_norm(inverse(m))


def two_sided_norm(m: np.ndarray) -> float:
    """max(||M||, ||M^-1||)."""
    return max(spectral_norm(m), inverse_norm(m))


def condition_number(m: np.ndarray) -> float:
    return spectral_norm(m) * inverse_norm(m)


# ---------------------------------------------------------------- cocycles

GROUP_TAGS = ("GL", "SL")


@dataclass(eq=False)
class LocallyConstantCocycle:
    """A cocycle x -> phi(x[-k..k]) given by a table on admissible windows.

    ``fallback`` lets a sparse table sit on top of another cocycle of the same
    base and smaller radius: windows missing from ``table`` are evaluated by
    the fallback on their central sub-window.
    """
    base: TransitionSystem
    k: int
    table: dict
    group: str = "GL"
    fallback: "LocallyConstantCocycle | None" = None
    dim: int = field(init=False)

    def __post_init__(self):
        if self.k < 0:
            raise InputError("window radius must be nonnegative")
        if self.group not in GROUP_TAGS:
            raise InputError(f"unknown group tag {self.group!r}")
        self.table = {as_word(w): np.asarray(v, dtype=float) for w, v in self.table.items()}
        dims = {v.shape for v in self.table.values()}
        if self.fallback is not None:
            dims.add((self.fallback.dim, self.fallback.dim))
            if self.fallback.k > self.k:
                raise InputError("fallback radius exceeds cocycle radius")
        if len(dims) != 1:
            raise InputError(f"inconsistent matrix shapes {dims}")
        shape = dims.pop()
        if len(shape) != 2 or shape[0] != shape[1]:
            raise InputError("cocycle values must be square matrices")
        self.dim = shape[0]
        width = 2 * self.k + 1
        for w, v in self.table.items():
            if len(w) != width:
                raise InputError(f"window {w} has length {len(w)}, expected {width}")
            if not is_admissible(self.base, w):
                raise InputError(f"window {w} is not admissible")
            self._check_value(w, v)
        if self.fallback is None:
            missing = [w for w in admissible_words(self.base, width) if w not in self.table] \
                if self.base.alphabet_size ** width <= 1 << 20 else []
            if missing:
                raise InputError(f"table is missing windows, e.g. {missing[0]}")

    def _check_value(self, w, v):
        det = float(np.linalg.det(v))
        if abs(det) < DET_FLOOR:
            raise DegenerateError(f"value at {w} is singular")
        if self.group == "SL" and abs(det - 1.0) > SL_TOL:
            raise InputError(f"value at {w} has det {det}, not 1")

    # construction helpers
    @classmethod
    def from_function(cls, base: TransitionSystem, k: int, f: Callable[[Word], np.ndarray],
                      group: str = "GL") -> "LocallyConstantCocycle":
        table = {w: f(w) for w in admissible_words(base, 2 * k + 1)}
        return cls(base, k, table, group)

    @classmethod
    def from_symbols(cls, base: TransitionSystem, values: Mapping[int, np.ndarray] | Sequence,
                     group: str = "GL") -> "LocallyConstantCocycle":
        """k = 0 cocycle with one matrix per symbol (a dict or a 1-based list)."""
        if not isinstance(values, Mapping):
            values = {i + 1: v for i, v in enumerate(values)}
        return cls(base, 0, {(a,): values[a] for a in base.alphabet}, group)

    @classmethod
    def constant(cls, base: TransitionSystem, m: np.ndarray, k: int = 0,
                 group: str = "GL") -> "LocallyConstantCocycle":
        return cls.from_function(base, k, lambda w: m, group)

    def value(self, window: Sequence[int]) -> np.ndarray:
        w = as_word(window)
        v = self.table.get(w)
        if v is not None:
            return v
        if self.fallback is not None and len(w) == 2 * self.k + 1:
            cut = self.k - self.fallback.k
            return self.fallback.value(w[cut:len(w) - cut])
        raise InputError(f"no value for window {w}")

    def windows(self) -> list[Word]:
        return sorted(self.table)

    def values(self) -> list[np.ndarray]:
        return [self.table[w] for w in self.windows()]

    def sup_norm(self) -> float:
        """sup over values of max(||A||, ||A^-1||), including the fallback."""
        vals = [two_sided_norm(v) for v in self.table.values()]
        if self.fallback is not None:
            vals.append(self.fallback.sup_norm())
        return max(vals)

    def map_values(self, f: Callable[[np.ndarray], np.ndarray], group: str = "GL") -> "LocallyConstantCocycle":
        fb = self.fallback.map_values(f, group) if self.fallback is not None else None
        table = {w: f(v) for w, v in self.table.items()}
        return LocallyConstantCocycle(self.base, self.k, table, group, fb)


def _check_word(A: LocallyConstantCocycle, w: Word) -> None:
    if len(w) < 2 * A.k + 2:
        raise InputError(f"word of length {len(w)} is shorter than one window plus a step "
                         f"({2 * A.k + 2})")
    if not is_admissible(A.base, w):
        raise InputError(f"word {w} is not admissible")


def iterate_count(A: LocallyConstantCocycle, w: Sequence[int]) -> int:
    """Number of cocycle steps taken along the transition word w."""
    return len(w) - (2 * A.k + 1)


def product_over_transition(A: LocallyConstantCocycle, w: Sequence[int]) -> np.ndarray:
    """phi(window_{n}) ... phi(window_1) over all windows of w except the last."""
    w = as_word(w)
    _check_word(A, w)
    width = 2 * A.k + 1
    out = np.eye(A.dim)
    for i in range(len(w) - width):
        out = A.value(w[i:i + width]) @ out
    return out


def prefix_products(A: LocallyConstantCocycle, w: Sequence[int]) -> list[np.ndarray]:
    """Products after 1, 2, ..., |w| - 2k - 1 steps along w."""
    w = as_word(w)
    _check_word(A, w)
    width = 2 * A.k + 1
    out, cur = [], np.eye(A.dim)
    for i in range(len(w) - width):
        cur = A.value(w[i:i + width]) @ cur
        out.append(cur)
    return out


def check_composition(A: LocallyConstantCocycle, w: Sequence[int], w2: Sequence[int],
                      rtol: float = 1e-10) -> bool:
    """product(w amalgamated with w2 over a window) == product(w2) product(w)."""
    from .sft import amalgamate
    joined = amalgamate(w, w2, 2 * A.k + 1)
    lhs = product_over_transition(A, joined)
    rhs = product_over_transition(A, w2) @ product_over_transition(A, w)
    scale = max(1.0, spectral_norm(product_over_transition(A, w2)) * spectral_norm(product_over_transition(A, w)))
    return spectral_norm(lhs - rhs) <= rtol * scale


def periodic_window_word(p: Sequence[int], start: int, length: int) -> Word:
    """x_start .. x_{start+length-1} for the periodic point x with x_0 = p_1."""
    m = len(p)
    return tuple(p[(start + i) % m] for i in range(length))


def check_periodic(ts: TransitionSystem, p: Sequence[int]) -> None:
    p = as_word(p)
    if not p or not is_admissible(ts, p) or not ts.allowed(p[-1], p[0]):
        raise InputError(f"{p} is not a periodic word (wrap transition forbidden)")


def iterate_on_periodic(A: LocallyConstantCocycle, p: Sequence[int], n: int) -> np.ndarray:
    """A_n(x) for the periodic point x = ...ppp... with x_0 = p_1."""
    p = as_word(p)
    check_periodic(A.base, p)
    if n == 0:
        return np.eye(A.dim)
    w = periodic_window_word(p, -A.k, n + 2 * A.k + 1)
    return product_over_transition(A, w)


# ---------------------------------------------------------------- bounded languages

MODES = ("forward-prefix", "all-intervals")


@dataclass
class BoundedLanguage:
    kappa: float
    n: int
    words: list
    mode: str

    @property
    def count(self) -> int:
        return len(self.words)


def bounded_words(A: LocallyConstantCocycle, n: int, kappa: float, mode: str = "forward-prefix") -> BoundedLanguage:
    """Depth-first enumeration of length-n words meeting the boundedness test.

    forward-prefix: every prefix product P (one step or more) has
    ||P|| <= kappa and ||P^-1|| <= kappa.
    all-intervals: every product over a sub-interval of steps has norm
    <= kappa^2.  Both tests are prefix-closed, so a failing prefix prunes
    its whole subtree.
    """
    if kappa < 1:
        raise InputError("kappa < 1 is vacuous: the identity already has norm 1")
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}")
    width = 2 * A.k + 1
    if n < width + 1:
        raise InputError(f"n must be at least {width + 1}")
    ts = A.base
    succ = [ts.successors(a) for a in ts.alphabet]
    bound = (kappa * kappa if mode == "all-intervals" else kappa) * (1.0 + TIE_SLACK)
    out: list[Word] = []

    def accept(state, factor):
        if mode == "forward-prefix":
            p = factor @ state
            if spectral_norm(p) > bound or inverse_norm(p) > bound:
                return None
            return p
        new = [factor @ s for s in state] + [factor]
        for s in new:
            if spectral_norm(s) > bound:
                return None
        return new

    init = np.eye(A.dim) if mode == "forward-prefix" else []

    def dfs(w, state):
        if len(w) == n:
            out.append(w)
            return
        for b in succ[w[-1] - 1]:
            w2 = w + (b,)
            if len(w2) > width:
                st = accept(state, A.value(w2[len(w2) - width - 1:len(w2) - 1]))
                if st is None:
                    continue
            else:
                st = state
            dfs(w2, st)

    for a in ts.alphabet:
        dfs((a,), init)
    return BoundedLanguage(kappa, n, out, mode)


def _completion_counts(ts: TransitionSystem, n: int) -> list[list[int]]:
    """c[r][a - 1] = number of ways to append r symbols after symbol a (exact ints)."""
    succ = [ts.successors(a) for a in ts.alphabet]
    c = [[1] * ts.alphabet_size]
    for _ in range(n):
        prev = c[-1]
        c.append([sum(prev[b - 1] for b in succ[a]) for a in range(ts.alphabet_size)])
    return c


def bounded_count(A: LocallyConstantCocycle, n: int, kappa: float, mode: str = "all-intervals") -> int:
    """Size of bounded_words(A, n, kappa, mode) without listing the words.

    A subtree is counted in one go once the worst case over its completions
    (every new factor of norm at most the sup over values) cannot break the
    bound.
    """
    if kappa < 1:
        raise InputError("kappa < 1 is vacuous: the identity already has norm 1")
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}")
    width = 2 * A.k + 1
    if n < width + 1:
        raise InputError(f"n must be at least {width + 1}")
    ts = A.base
    succ = [ts.successors(a) for a in ts.alphabet]
    comp = _completion_counts(ts, n)
    vals = list(A.table.values())
    fb = A.fallback
    while fb is not None:
        vals.extend(fb.table.values())
        fb = fb.fallback
    S = max(1.0, max(spectral_norm(v) for v in vals))
    Si = max(1.0, max(inverse_norm(v) for v in vals))
    bound = (kappa * kappa if mode == "all-intervals" else kappa) * (1.0 + TIE_SLACK)
    total_factors = n - width

    def safe(state, done):
        rem = total_factors - done
        grow = S ** rem
        if mode == "forward-prefix":
            p = state
            return spectral_norm(p) * grow <= bound and inverse_norm(p) * Si ** rem <= bound
        worst = max([spectral_norm(m) for m in state] + [1.0])
        return worst * grow <= bound

    count = 0
    stack = []
    init = np.eye(A.dim) if mode == "forward-prefix" else []
    for a in ts.alphabet:
        stack.append(((a,), init))
    while stack:
        w, state = stack.pop()
        done = max(0, len(w) - width)
        if len(w) == n:
            count += 1
            continue
        if safe(state, done):
            count += comp[n - len(w)][w[-1] - 1]
            continue
        for b in succ[w[-1] - 1]:
            w2 = w + (b,)
            if len(w2) > width:
                f = A.value(w2[len(w2) - width - 1:len(w2) - 1])
                if mode == "forward-prefix":
                    st = f @ state
                    if spectral_norm(st) > bound or inverse_norm(st) > bound:
                        continue
                else:
                    st = [f @ m for m in state] + [f]
                    if any(spectral_norm(m) > bound for m in st):
                        continue
            else:
                st = state
            stack.append((w2, st))
    return count


def bounded_entropy_upper(A: LocallyConstantCocycle, kappa: float, n: int) -> float:
    """(1/n) log of the all-intervals bounded word count; -inf if there are none."""
    c = bounded_count(A, n, kappa, "all-intervals")
    if c == 0:
        return -math.inf
    return math.log(c) / n


@dataclass
class HolderSeminorm:
    value: float
    exact: bool
    witness: tuple | None


def holder_seminorm(A: LocallyConstantCocycle, alpha: float) -> HolderSeminorm:
    """max ||phi(u) - phi(v)|| 2^(alpha a(u,v)) over distinct admissible windows.

    a(u, v) is the smallest |i| with u_i != v_i, positions indexed -k..k.
    Exact on full shifts; otherwise an upper bound (flagged by ``exact``).
    """
    if alpha <= 0:
        raise InputError("alpha must be positive")
    k = A.k
    wins = admissible_words(A.base, 2 * k + 1)
    best, witness = 0.0, None
    for i, u in enumerate(wins):
        for v in wins[i + 1:]:
            a = min(abs(j - k) for j in range(2 * k + 1) if u[j] != v[j])
            val = spectral_norm(A.value(u) - A.value(v)) * 2.0 ** (alpha * a)
            if val > best:
                best, witness = val, (u, v)
    full = bool(A.base.matrix.all())
    return HolderSeminorm(best, full, witness)
