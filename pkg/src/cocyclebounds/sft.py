"""Subshifts of finite type: words, transitions, entropy, block graphs.

Symbols are 1-based integers and words are tuples of symbols.  Matrix
entries are addressed with ``H[a - 1, b - 1]``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (AmalgamationError, DegenerateError, InputError,
                     LanguageEmptyError, StructureError)

Word = tuple

POWER_TOL = 1e-12
POWER_CAP = 100_000
CROSSCHECK_MAX_ALPHABET = 8


def as_word(w: Iterable[int]) -> Word:
    return tuple(int(s) for s in w)


@dataclass(frozen=True, eq=False)
class TransitionSystem:
    """A 0/1 transition matrix over the alphabet {1, ..., n}.

    ``empty`` marks a system whose bi-infinite language is empty; such a
    system has alphabet size 0.
    """
    matrix: np.ndarray
    empty: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputError(f"transition matrix must be square, got shape {m.shape}")
        if m.size and not np.all((m == 0) | (m == 1)):
            raise InputError("transition matrix entries must be 0 or 1")
        if m.shape[0] == 0 and not self.empty:
            raise InputError("alphabet must be nonempty")
        m = m.astype(np.int64)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def full_shift(cls, q: int) -> "TransitionSystem":
        return cls(np.ones((q, q), dtype=np.int64))

    @classmethod
    def cycle(cls, q: int) -> "TransitionSystem":
        m = np.zeros((q, q), dtype=np.int64)
        for i in range(q):
            m[i, (i + 1) % q] = 1
        return cls(m)

    @classmethod
    def golden_mean(cls) -> "TransitionSystem":
        return cls(np.array([[1, 1], [1, 0]]))

    @classmethod
    def empty_system(cls) -> "TransitionSystem":
        return cls(np.zeros((0, 0), dtype=np.int64), empty=True)

    @property
    def alphabet_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def alphabet(self) -> range:
        return range(1, self.alphabet_size + 1)

    def allowed(self, a: int, b: int) -> bool:
        return bool(self.matrix[a - 1, b - 1])

    def successors(self, a: int) -> list[int]:
        return [int(b) + 1 for b in np.flatnonzero(self.matrix[a - 1])]

    def is_irreducible(self) -> bool:
        if self.alphabet_size == 0:
            return False
        n, _ = connected_components(self.matrix, directed=True, connection="strong")
        return n == 1 and bool(self.matrix.any())

    def __eq__(self, other):
        return (isinstance(other, TransitionSystem) and self.empty == other.empty
                and np.array_equal(self.matrix, other.matrix))

    def __hash__(self):
        return hash((self.matrix.tobytes(), self.matrix.shape, self.empty))

    def __repr__(self):
        return f"TransitionSystem({self.matrix.tolist()})"


def _check_symbols(ts: TransitionSystem, w: Sequence[int]) -> None:
    for s in w:
        if not 1 <= int(s) <= ts.alphabet_size:
            raise InputError(f"symbol {s} outside alphabet 1..{ts.alphabet_size}")


def is_admissible(ts: TransitionSystem, w: Sequence[int]) -> bool:
    _check_symbols(ts, w)
    return all(ts.allowed(a, b) for a, b in zip(w, w[1:]))


def admissible_words(ts: TransitionSystem, n: int) -> list[Word]:
    """All admissible words of length ``n`` in lexicographic order."""
    if n < 1:
        raise InputError("word length must be at least 1")
    succ = [ts.successors(a) for a in ts.alphabet]
    out: list[Word] = []
    stack: list[Word] = [(a,) for a in reversed(ts.alphabet)]
    while stack:
        w = stack.pop()
        if len(w) == n:
            out.append(w)
            continue
        for b in reversed(succ[w[-1] - 1]):
            stack.append(w + (b,))
    return out


def word_count(ts: TransitionSystem, n: int) -> int:
    """Number of admissible words of length ``n`` via exact matrix powers."""
    if n < 1:
        raise InputError("word length must be at least 1")
    m = ts.matrix.astype(object)
    v = np.ones(ts.alphabet_size, dtype=object)
    for _ in range(n - 1):
        v = m.dot(v)
    return int(sum(v))


# ---------------------------------------------------------------- entropy

@dataclass
class EntropyInfo:
    value: float
    rho: float
    irreducible: bool
    iterations: int
    converged: bool
    crosscheck_rho: float | None = None
    notes: list[str] = field(default_factory=list)


def _perron_irreducible(block: np.ndarray) -> tuple[float, int, bool]:
    """Perron root of an irreducible nonnegative matrix.

    Power iteration runs on ``block + I`` which is primitive, so the
    iteration converges even for periodic blocks.  The stopping test is the
    Collatz-Wielandt bracket min(Bx/x) <= rho(B) <= max(Bx/x).
    """
    n = block.shape[0]
    b = block.astype(float) + np.eye(n)
    x = np.ones(n) / n
    lo, hi = 0.0, float("inf")
    best, stale, done = (float("inf"), 0.0), 0, False
    for it in range(1, POWER_CAP + 1):
        y = b @ x
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        x = y / y.sum()
        if hi - lo < best[0]:
            best, stale = (hi - lo, 0.5 * (lo + hi)), 0
        else:
            stale += 1
        scale = max(1.0, hi)
        # once within tolerance keep going to the rounding floor
        done = done or hi - lo <= POWER_TOL * scale
        if done and (hi - lo <= 8 * np.finfo(float).eps * scale or stale >= 20):
            return best[1] - 1.0, it, True
    return best[1] - 1.0, POWER_CAP, done


def charpoly(matrix: np.ndarray) -> list[int]:
    """Integer characteristic polynomial coefficients (leading 1 first).

    Faddeev-LeVerrier in exact rational arithmetic.
    """
    n = matrix.shape[0]
    a = [[Fraction(int(v)) for v in row] for row in matrix]
    coeffs = [Fraction(1)]
    mk = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{k-1} I
        prod = [[sum(a[i][t] * mk[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
        for i in range(n):
            prod[i][i] += coeffs[-1]
        mk = prod
        am = [[sum(a[i][t] * mk[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
        tr = sum(am[i][i] for i in range(n))
        coeffs.append(-tr / k)
    return [int(c) for c in coeffs]


def _charpoly_rho(matrix: np.ndarray) -> float:
    roots = np.roots(charpoly(matrix))
    return float(np.max(np.abs(roots))) if roots.size else 0.0


def entropy_info(ts: TransitionSystem) -> EntropyInfo:
    if ts.empty or ts.alphabet_size == 0:
        return EntropyInfo(-math.inf, 0.0, False, 0, True, notes=["empty system"])
    h = ts.matrix
    if not h.any():
        raise DegenerateError("zero transition matrix has no admissible transitions")
    ncomp, labels = connected_components(h, directed=True, connection="strong")
    rho, iters, converged = 0.0, 0, True
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        block = h[np.ix_(idx, idx)]
        if not block.any():
            continue
        r, it, ok = _perron_irreducible(block)
        iters += it
        converged &= ok
        rho = max(rho, float(r))
    irreducible = ncomp == 1
    notes = [] if irreducible else ["reducible matrix: rho is the max over strong components"]
    if not converged:
        notes.append("power iteration hit the iteration cap")
    cross = None
    if ts.alphabet_size <= CROSSCHECK_MAX_ALPHABET:
        cross = _charpoly_rho(h)
        if abs(cross - rho) > 1e-6 * max(1.0, rho):
            notes.append(f"characteristic polynomial root {cross!r} disagrees with power iteration")
    value = math.log(rho) if rho > 0 else -math.inf
    if rho <= 0:
        notes.append("nilpotent matrix: bi-infinite language is empty")
    return EntropyInfo(value, rho, irreducible, iters, converged, cross, notes)


def topological_entropy(ts: TransitionSystem) -> float:
    """log of the Perron root of the transition matrix, in nats."""
    return entropy_info(ts).value


@dataclass
class GrowthEstimate:
    values: list[float]
    subadditive: bool
    violations: list[tuple[int, int]]


def entropy_growth_estimate(counts: Sequence[int]) -> GrowthEstimate:
    """(1/n) log c_n for c_1, c_2, ... and a subadditivity check of log c_n."""
    if any(c <= 0 for c in counts):
        raise LanguageEmptyError("word counts must be positive")
    logs = [math.log(c) for c in counts]
    values = [lg / (i + 1) for i, lg in enumerate(logs)]
    violations = []
    n = len(counts)
    for a in range(1, n + 1):
        for b in range(a, n + 1 - a):
            if logs[a + b - 1] > logs[a - 1] + logs[b - 1] + 1e-12:
                violations.append((a, b))
    return GrowthEstimate(values, not violations, violations)


# ---------------------------------------------------------------- graphs

@dataclass(frozen=True, eq=False)
class BlockGraph:
    block_length: int
    vertices: tuple
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.vertices)})

    def index(self, v: Word) -> int:
        return self._index[as_word(v)]

    def out_neighbors(self, v: Word) -> list[Word]:
        return [self.vertices[j] for j in np.flatnonzero(self.adjacency()[self.index(v)])]

    def adjacency(self) -> np.ndarray:
        n = len(self.vertices)
        m = np.zeros((n, n), dtype=np.int64)
        for u, v in self.edges:
            m[self._index[u], self._index[v]] = 1
        return m

    def system(self) -> TransitionSystem:
        return TransitionSystem(self.adjacency())


def higher_block(ts: TransitionSystem, n: int) -> BlockGraph:
    """Graph on admissible n-words with an edge u -> v when u[1:] == v[:-1]."""
    verts = admissible_words(ts, n)
    by_prefix: dict[Word, list[Word]] = {}
    for v in verts:
        by_prefix.setdefault(v[:-1], []).append(v)
    edges = []
    for u in verts:
        if n == 1:
            edges.extend((u, (b,)) for b in ts.successors(u[0]))
        else:
            edges.extend((u, v) for v in by_prefix.get(u[1:], ()) if ts.allowed(u[-1], v[-1]))
    return BlockGraph(n, tuple(verts), tuple(edges))


def branching_vertex(g: BlockGraph) -> Word | None:
    """Lexicographically least vertex with out-degree at least two."""
    if not g.vertices:
        raise InputError("empty graph")
    deg = g.adjacency().sum(axis=1)
    for v, d in zip(g.vertices, deg):
        if d >= 2:
            return v
    return None


def _bfs(adj: list[list[int]], src: int) -> list[int]:
    dist = [-1] * len(adj)
    dist[src] = 0
    q = deque([src])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def directed_diameter(g: BlockGraph) -> int:
    m = g.adjacency()
    adj = [list(np.flatnonzero(row)) for row in m]
    diam = 0
    for s in range(len(adj)):
        dist = _bfs(adj, s)
        if min(dist) < 0:
            raise StructureError("graph is not strongly connected")
        diam = max(diam, max(dist))
    return diam


def shortest_path(g: BlockGraph, src: Word, dst: Word) -> list[Word] | None:
    """Vertex sequence of a shortest path src -> dst (lex-least among ties)."""
    m = g.adjacency()
    n = len(g.vertices)
    s, t = g.index(src), g.index(dst)
    adj = [list(np.flatnonzero(row)) for row in m]
    parent = [-1] * n
    seen = [False] * n
    seen[s] = True
    q = deque([s])
    while q:
        u = q.popleft()
        if u == t:
            break
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                q.append(v)
    if not seen[t]:
        return None
    path = [t]
    while path[-1] != s:
        path.append(parent[path[-1]])
    return [g.vertices[i] for i in reversed(path)]


# ---------------------------------------------------------------- words

@dataclass(frozen=True)
class Cylinder:
    """Sequences x with x[anchor : anchor + |word|] == word."""
    anchor: int
    word: Word

    def contains(self, x_window: dict[int, int]) -> bool:
        return all(x_window.get(self.anchor + i) == s for i, s in enumerate(self.word))

    def intersects(self, other: "Cylinder") -> bool:
        lo = max(self.anchor, other.anchor)
        hi = min(self.anchor + len(self.word), other.anchor + len(other.word))
        return all(self.word[i - self.anchor] == other.word[i - other.anchor] for i in range(lo, hi))


def amalgamate(w: Sequence[int], w2: Sequence[int], t: int) -> Word:
    """The t-amalgamated concatenation: w followed by w2 with t symbols shared."""
    w, w2 = as_word(w), as_word(w2)
    if not 0 <= t <= min(len(w), len(w2)):
        raise AmalgamationError(f"overlap {t} out of range for lengths {len(w)}, {len(w2)}")
    if t and w[len(w) - t:] != w2[:t]:
        raise AmalgamationError(f"suffix {w[len(w) - t:]} does not match prefix {w2[:t]}")
    return w + w2[t:]


def amalgamate_many(words: Sequence[Sequence[int]], t: int) -> Word:
    out = as_word(words[0])
    for w in words[1:]:
        out = amalgamate(out, w, t)
    return out


def _distances_to(ts: TransitionSystem, target: int) -> list[float]:
    """d[a] = fewest steps from symbol a to symbol target."""
    pred = [[] for _ in ts.alphabet]
    for a in ts.alphabet:
        for b in ts.successors(a):
            pred[b - 1].append(a)
    d = [math.inf] * ts.alphabet_size
    d[target - 1] = 0
    q = deque([target])
    while q:
        b = q.popleft()
        for a in pred[b - 1]:
            if d[a - 1] == math.inf:
                d[a - 1] = d[b - 1] + 1
                q.append(a)
    return d


def transitions(ts: TransitionSystem, a: Sequence[int], b: Sequence[int], max_len: int) -> list[Word]:
    """Admissible words of length <= max_len starting with a and ending with b.

    Sorted by length, then lexicographically.
    """
    a, b = as_word(a), as_word(b)
    if not is_admissible(ts, a) or not is_admissible(ts, b):
        raise InputError("endpoints of a transition must be admissible")
    dist = _distances_to(ts, b[-1])
    out: list[Word] = []
    stack = [a]
    while stack:
        w = stack.pop()
        if len(w) >= len(b) and w[len(w) - len(b):] == b:
            out.append(w)
        if len(w) >= max_len:
            continue
        for s in ts.successors(w[-1]):
            if len(w) + 1 + dist[s - 1] <= max_len:
                stack.append(w + (s,))
    out.sort(key=lambda w: (len(w), w))
    return out


def iter_transitions(ts: TransitionSystem, a: Sequence[int], b: Sequence[int], max_len: int,
                     min_len: int = 1):
    """Lazily yield T(a, b) in (length, lex) order, lengths in [min_len, max_len]."""
    a, b = as_word(a), as_word(b)
    if not is_admissible(ts, a) or not is_admissible(ts, b):
        raise InputError("endpoints of a transition must be admissible")
    H = ts.matrix.astype(bool)
    reach = [np.eye(ts.alphabet_size, dtype=bool)]  # reach[n][s, t]: path of exactly n steps
    for n in range(max(len(a), len(b), min_len, 1), max_len + 1):
        start = n - len(b)  # position of b inside the word
        if start < 0:
            continue
        overlap = len(a) - start  # n >= |a| keeps overlap <= |b|
        if overlap > 0:
            if a[start:] == b[:overlap] and is_admissible(ts, a + b[overlap:]):
                yield a + b[overlap:]
            continue
        gap = start - len(a)  # free symbols between a and b
        while len(reach) <= gap + 1:
            reach.append((reach[-1].astype(np.int64) @ H.astype(np.int64)) > 0)
        target = b[0] - 1
        if not reach[gap + 1][a[-1] - 1, target]:
            continue
        stack = [(a, gap)]
        out = []
        while stack:
            w, left = stack.pop()
            if left == 0:
                if ts.allowed(w[-1], b[0]):
                    out.append(w + b)
                continue
            for s in reversed(ts.successors(w[-1])):
                if reach[left][s - 1, target]:
                    stack.append((w + (s,), left - 1))
        yield from out


def shortest_transition(ts: TransitionSystem, a: Sequence[int], b: Sequence[int],
                        min_len: int = 1) -> Word:
    """Shortest (then lex-least) word in T(a, b) of length >= min_len."""
    a, b = as_word(a), as_word(b)
    limit = max(len(a), len(b), min_len) + ts.alphabet_size + len(b) + 1
    for cand in transitions(ts, a, b, limit):
        if len(cand) >= min_len:
            return cand
    raise StructureError(f"no transition from {a} to {b}")


# ---------------------------------------------------------------- avoidance

def _failure_automaton(w: Word, alphabet_size: int) -> list[list[int]]:
    """KMP automaton: delta[s][c - 1] = longest prefix of w that is a suffix of w[:s] + c."""
    m = len(w)
    fail = [0] * (m + 1)
    k = 0
    for i in range(1, m):
        while k and w[i] != w[k]:
            k = fail[k]
        if w[i] == w[k]:
            k += 1
        fail[i + 1] = k
    delta = [[0] * alphabet_size for _ in range(m)]
    for s in range(m):
        for c in range(1, alphabet_size + 1):
            if w[s] == c:
                delta[s][c - 1] = s + 1
            elif s:
                delta[s][c - 1] = delta[fail[s]][c - 1]
    return delta


@dataclass
class AvoidSystem:
    """SFT presentation of the sequences avoiding a word.

    ``system`` is the essential part of the product of the symbol graph with
    the failure automaton, so its bi-infinite paths are exactly the avoiding
    sequences.  ``labels`` gives (symbol, automaton state) per vertex.
    The untrimmed product is kept to count finite avoiding words.
    """
    base: TransitionSystem
    word: Word
    system: TransitionSystem
    labels: list[tuple[int, int]]
    product_matrix: np.ndarray
    product_labels: list[tuple[int, int]]
    start: np.ndarray

    @property
    def empty(self) -> bool:
        return self.system.empty

    def entropy(self) -> float:
        return topological_entropy(self.system)

    def count_words(self, n: int) -> int:
        """Admissible words of length n (finite) with no occurrence of the word."""
        m = self.product_matrix.astype(object)
        v = self.start.astype(object)
        for _ in range(n - 1):
            v = v.dot(m)
        return int(sum(v))

    def project(self, path: Sequence[int]) -> Word:
        return tuple(self.labels[i - 1][0] for i in path)


def _essential(matrix: np.ndarray) -> np.ndarray:
    keep = np.ones(matrix.shape[0], dtype=bool)
    while True:
        sub = matrix[np.ix_(keep, keep)]
        ok = (sub.sum(axis=0) > 0) & (sub.sum(axis=1) > 0)
        if ok.all():
            return np.flatnonzero(keep)
        idx = np.flatnonzero(keep)
        keep[idx[~ok]] = False


def avoid_word_system(ts: TransitionSystem, w: Sequence[int]) -> AvoidSystem:
    w = as_word(w)
    if not w:
        raise InputError("cannot avoid the empty word")
    _check_symbols(ts, w)
    q = ts.alphabet_size
    delta = _failure_automaton(w, q)
    mlen = len(w)
    labels = [(a, s) for a in ts.alphabet for s in range(mlen)]
    index = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    prod = np.zeros((n, n), dtype=np.int64)
    for (a, s), i in index.items():
        for b in ts.successors(a):
            s2 = delta[s][b - 1]
            if s2 < mlen:
                prod[i, index[(b, s2)]] = 1
    start = np.zeros(n, dtype=np.int64)
    for a in ts.alphabet:
        s2 = delta[0][a - 1]
        if s2 < mlen:
            start[index[(a, s2)]] = 1
    # drop vertices that are not reachable from any valid start; they encode impossible histories
    reach = start.astype(bool).copy()
    frontier = reach.copy()
    while frontier.any():
        nxt = (frontier.astype(np.int64) @ prod > 0) & ~reach
        reach |= nxt
        frontier = nxt
    ridx = np.flatnonzero(reach)
    prod_r = prod[np.ix_(ridx, ridx)]
    labels_r = [labels[i] for i in ridx]
    start_r = start[ridx]
    ess = _essential(prod_r)
    if ess.size == 0:
        system = TransitionSystem.empty_system()
        ess_labels = []
    else:
        system = TransitionSystem(prod_r[np.ix_(ess, ess)])
        ess_labels = [labels_r[i] for i in ess]
    return AvoidSystem(ts, w, system, ess_labels, prod_r, labels_r, start_r)


def contains_word(x: Sequence[int], w: Sequence[int]) -> bool:
    m = len(w)
    w = tuple(w)
    return any(tuple(x[i:i + m]) == w for i in range(len(x) - m + 1))


def lind_gap(ts: TransitionSystem, w: Sequence[int]) -> float:
    """Entropy drop h(ts) - h(ts avoiding w)."""
    h = topological_entropy(ts)
    h2 = avoid_word_system(ts, w).entropy()
    if h2 == -math.inf:
        return math.inf
    return h - h2


@dataclass
class GapRow:
    n: int
    word: Word
    gap: float
    normalized: float


@dataclass
class GapSweep:
    rows: list[GapRow]
    rho: float
    monotone: bool
    flagged: list[int]

    def band_ratio(self) -> float:
        vals = [r.normalized for r in self.rows if r.normalized > 0 and math.isfinite(r.normalized)]
        return max(vals) / min(vals) if vals else math.inf


def lind_gap_sweep(ts: TransitionSystem, words: Sequence[Sequence[int]]) -> GapSweep:
    """Gap and gap * rho^|w| for a list of words of increasing length.

    Lengths at which the gap fails to decrease are reported in ``flagged``
    rather than rejected; no threshold length is assumed.
    """
    info = entropy_info(ts)
    rows = []
    for w in words:
        w = as_word(w)
        g = lind_gap(ts, w)
        rows.append(GapRow(len(w), w, g, g * info.rho ** len(w)))
    flagged = [rows[i].n for i in range(1, len(rows)) if not rows[i].gap < rows[i - 1].gap]
    return GapSweep(rows, info.rho, not flagged, flagged)


# ---------------------------------------------------------------- multiplicity

@dataclass
class DistinctTransitions:
    length: int
    words: list[Word]
    branch: int
    cycles: tuple[Word, Word]
    blocks: tuple[Word, Word]
    head: Word
    tail: Word
    repeats: int


def distinct_transitions_detail(ts: TransitionSystem, p: Sequence[int], p2: Sequence[int],
                                t: int, L: int) -> DistinctTransitions:
    p, p2 = as_word(p), as_word(p2)
    if t < 1:
        raise InputError("t must be positive")
    if not ts.is_irreducible():
        raise StructureError("transition system must be transitive")
    q = branching_vertex(higher_block(ts, 1))
    if q is None:
        raise StructureError("no branching vertex: the system has zero entropy")
    q = q[0]
    s1, s2 = ts.successors(q)[:2]
    c1 = shortest_transition(ts, (q, s1), (q,), min_len=2)
    c2 = shortest_transition(ts, (q, s2), (q,), min_len=2)
    l1, l2 = len(c1) - 1, len(c2) - 1
    g1 = amalgamate_many([c1] * l2, 1)
    g2 = amalgamate_many([c2] * l1, 1)
    head = shortest_transition(ts, p, (q,), min_len=len(p))
    tail = shortest_transition(ts, (q,), p2, min_len=len(p2))
    block = l1 * l2
    r = max(0, math.ceil(math.log2(t))) if t > 1 else 0
    while len(head) + r * block + len(tail) - 1 <= L:
        r += 1
    words = []
    for bits in iproduct((0, 1), repeat=r):
        if len(words) == t:
            break
        parts = [head] + [g1 if b == 0 else g2 for b in bits] + [tail]
        words.append(amalgamate_many(parts, 1))
    length = len(head) + r * block + len(tail) - 1
    return DistinctTransitions(length, words, q, (c1, c2), (g1, g2), head, tail, r)


def distinct_transitions(ts: TransitionSystem, p: Sequence[int], p2: Sequence[int],
                         t: int, L: int) -> tuple[int, list[Word]]:
    """At least t distinct words of one common length > L, all in T(p, p2)."""
    d = distinct_transitions_detail(ts, p, p2, t, L)
    return d.length, d.words
