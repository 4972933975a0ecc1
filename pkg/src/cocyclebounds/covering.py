"""Regions in matrix groups and net-plus-margin covering certificates.

An atom (c, r) is the left-translated ball c*B_r = {g : ||c^-1 g - Id|| < r};
a Region with slack R is (union of atoms)*B_R.  Inclusions of a closed set in
an open one are certified on a finite net with a Lipschitz margin, so a
"certified" answer is a proof while "inconclusive" only means the net was too
coarse.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _batch as B
from .sft import as_word
from .errors import (BudgetExceeded, DegenerateError, InputError, StructureError,
                     VerificationError)

SAFETY = 1e-6
DET_TOL = 1e-9
REFUTE_TOL = 1e-9
SQ2 = math.sqrt(2.0)
MAX_NET = 3_000_000

CERTIFIED, REFUTED, INCONCLUSIVE = "certified", "refuted", "inconclusive"


def inverse_ball_bound(rho: float, d: int, group: str) -> float:
    """sup ||b^-1|| over the closed ball ||b - Id|| <= rho in the group."""
    if group == "SL" and d == 2:
        return 1.0 + rho  # ||b^-1|| = ||b|| in SL(2)
    return 1.0 / (1.0 - rho) if rho < 1 else math.inf


# ---------------------------------------------------------------- regions

@dataclass(frozen=True, eq=False)
class Region:
    atoms: tuple
    slack: float = 0.0
    group: str = "SL"

    def __post_init__(self):
        atoms = []
        for c, r in self.atoms:
            c = np.array(c, dtype=float)
            r = float(r)
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise InputError("atom centers must be square matrices")
            if not r > 0:
                raise InputError(f"atom radius must be positive, got {r}")
            det = float(np.linalg.det(c))
            if abs(det) < 1e-12:
                raise DegenerateError("atom center is singular")
            if self.group == "SL" and abs(det - 1) > DET_TOL:
                raise InputError(f"atom center has det {det}, not in SL")
            c.setflags(write=False)
            atoms.append((c, r))
        if not atoms:
            raise InputError("a region needs at least one atom")
        if len({c.shape for c, _ in atoms}) != 1:
            raise InputError("atoms of different dimensions")
        if self.slack < 0:
            raise InputError("slack must be nonnegative")
        if self.group not in ("SL", "GL"):
            raise InputError(f"unknown group tag {self.group!r}")
        object.__setattr__(self, "atoms", tuple(atoms))
        object.__setattr__(self, "slack", float(self.slack))

    @classmethod
    def ball(cls, r: float, d: int = 2, group: str = "SL", center=None) -> "Region":
        c = np.eye(d) if center is None else center
        return cls(((c, r),), 0.0, group)

    @property
    def dim(self) -> int:
        return self.atoms[0][0].shape[0]

    def __len__(self):
        return len(self.atoms)

    def centers(self) -> np.ndarray:
        return np.stack([c for c, _ in self.atoms])

    def radii(self) -> np.ndarray:
        return np.array([r for _, r in self.atoms])

    def witness_radii(self) -> np.ndarray:
        """rho with c*B_rho inside the region, one per atom."""
        return np.maximum(self.radii(), self.slack)

    def with_slack(self, R: float) -> "Region":
        return Region(self.atoms, R, self.group)

    def atom(self, i: int) -> "Region":
        return Region((self.atoms[i],), self.slack, self.group)

    def margins(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Best rho_c - ||c^-1 x - Id|| over atoms and the atom achieving it.

        A positive value proves membership (c is in the region, so is c*B_rho).
        """
        x = B.stack(x)
        cinv = B.inverses(self.centers())
        rho = self.witness_radii()
        m = rho[None, :] - B.dist_to_identity(np.einsum("aij,njk->naik", cinv, x))
        idx = np.argmax(m, axis=1)
        return m[np.arange(len(x)), idx], idx

    def contains(self, x) -> bool:
        return bool(self.margins(x)[0][0] > 0)

    def norm_bounds(self) -> tuple[float, float]:
        """Upper bounds for sup ||u|| and sup ||u^-1|| over the closed region."""
        d, sup, supi = self.dim, 0.0, 0.0
        for c, r in self.atoms:
            sup = max(sup, B.norms(c) * (1 + r) * (1 + self.slack))
            supi = max(supi, B.norms(B.inverses(c)) * inverse_ball_bound(r, d, self.group)
                       * inverse_ball_bound(self.slack, d, self.group))
        return float(sup), float(supi)


# ---------------------------------------------------------------- nets

@dataclass(eq=False)
class Net:
    region: Region
    requested: float
    spacing: float
    points: np.ndarray

    def __len__(self):
        return len(self.points)


def _sl2_chart(wr, wi, ph):
    w = wr + 1j * wi
    z = np.sqrt(1 + wr * wr + wi * wi) * np.exp(1j * ph)
    return z, w


def _project(coords, r, dist_fn, iters=60):
    """Move chart points along the ray to the chart origin into the closed ball."""
    lo = np.zeros(len(coords[0]))
    hi = np.ones(len(coords[0]))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = dist_fn(*[c * mid for c in coords]) <= r
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return [c * lo for c in coords]


def _sl2_grid(r, target, max_points, levels=2):
    tmax = r + target
    lam = tmax / math.sqrt(1 + tmax * tmax)
    ha = target / (2 * (1 + lam) * SQ2)
    hb = target / (2 * math.sqrt(1 + tmax * tmax))
    kw = math.ceil(r / (2 * ha))
    if r < 1:
        kp = math.ceil(math.asin(r) / (2 * hb))
        phis = np.arange(-kp, kp + 1) * 2 * hb
    else:
        nphi = 2 * math.ceil(math.pi / (2 * hb))
        hb = math.pi / nphi
        phis = np.arange(nphi) * 2 * hb
        phis = np.where(phis > math.pi, phis - 2 * math.pi, phis)
    estimate = (2 * kw + 1) ** 2 * len(phis) * 0.8
    if estimate > max_points:
        raise BudgetExceeded(f"net of B_{r} at spacing {target:.3g} needs ~{estimate:.3g} cells")
    g = np.arange(-kw, kw + 1) * 2 * ha
    wr, wi = np.meshgrid(g, g, indexing="ij")
    keep = np.hypot(wr, wi) - SQ2 * ha <= r
    wr, wi = wr[keep], wi[keep]
    wr = np.repeat(wr, len(phis))
    wi = np.repeat(wi, len(phis))
    ph = np.tile(phis, keep.sum())

    def dist(a, b, c):
        return B.zw_dist(*_sl2_chart(a, b, c))

    pts, spacing = [], 0.0
    for level in range(levels + 1):
        s = dist(wr, wi, ph)
        t = np.hypot(wr, wi) + SQ2 * ha
        rt = np.sqrt(1 + t * t)
        dcell = (1 + t / rt) * SQ2 * ha + rt * hb
        inside = s <= r
        if inside.any():
            pts.append((wr[inside], wi[inside], ph[inside]))
            spacing = max(spacing, float(dcell[inside].max()))
        bnd = (~inside) & (s <= r + dcell)
        wr, wi, ph, dcell = wr[bnd], wi[bnd], ph[bnd], dcell[bnd]
        if not len(wr):
            break
        if level == levels:
            pr, pi_, pp = _project((wr, wi, ph), r, dist)
            z0, w0 = _sl2_chart(wr, wi, ph)
            z1, w1 = _sl2_chart(pr, pi_, pp)
            moved = np.abs(z1 - z0) + np.abs(w1 - w0)
            pts.append((pr, pi_, pp))
            spacing = max(spacing, float((dcell + moved).max()))
            break
        ha, hb = ha / 2, hb / 2
        offs = np.array(list(itertools.product((-1, 1), repeat=3)), dtype=float)
        wr = (wr[:, None] + offs[None, :, 0] * ha).ravel()
        wi = (wi[:, None] + offs[None, :, 1] * ha).ravel()
        ph = (ph[:, None] + offs[None, :, 2] * hb).ravel()
        if len(wr) > max_points:
            raise BudgetExceeded("boundary refinement exceeds the net budget")
    wr = np.concatenate([p[0] for p in pts])
    wi = np.concatenate([p[1] for p in pts])
    ph = np.concatenate([p[2] for p in pts])
    return B.from_zw(*_sl2_chart(wr, wi, ph)), spacing


def lie_basis(d: int, group: str) -> np.ndarray:
    """Frobenius-orthonormal basis of gl(d) or sl(d)."""
    basis = []
    for i in range(d):
        for j in range(d):
            if i != j:
                e = np.zeros((d, d))
                e[i, j] = 1
                basis.append(e)
    if group == "GL":
        for i in range(d):
            e = np.zeros((d, d))
            e[i, i] = 1
            basis.append(e)
    else:
        for k in range(1, d):
            v = np.zeros(d)
            v[:k] = 1
            v[k] = -k
            basis.append(np.diag(v / np.linalg.norm(v)))
    return np.array(basis)


def _exp_grid(r, target, d, group, max_points):
    if r >= 1:
        raise InputError("the exponential-chart net needs radius < 1 outside SL(2)")
    basis = lie_basis(d, group)
    D = len(basis)
    rho = -math.log(1 - r)
    ymax = math.sqrt(d) * rho
    hc = target / (math.sqrt(D) * math.exp(rho + target))
    n = math.ceil(ymax / (2 * hc))
    if (2 * n + 1) ** D > max_points * 4:
        raise BudgetExceeded(f"exponential-chart net needs ~{(2 * n + 1) ** D:.3g} cells")
    ax = np.arange(-n, n + 1) * 2 * hc
    y = np.array(list(itertools.product(ax, repeat=D)))
    y = y[np.linalg.norm(y, axis=1) <= ymax + math.sqrt(D) * hc]

    def mats(yy):
        return np.einsum("nk,kij->nij", yy, basis)

    def dist(*cols):
        return B.dist_to_identity(B.expm_stack(mats(np.stack(cols, axis=1))))

    pts, spacing = [], 0.0
    for level in range(2):
        x = mats(y)
        s = B.dist_to_identity(B.expm_stack(x))
        dcell = math.sqrt(D) * hc * np.exp(B.norms(x) + math.sqrt(D) * hc)
        inside = s <= r
        if inside.any():
            pts.append(y[inside])
            spacing = max(spacing, float(dcell[inside].max()))
        bnd = (~inside) & (s <= r + dcell)
        y, dcell = y[bnd], dcell[bnd]
        if not len(y):
            break
        if level == 1:
            proj = np.stack(_project(list(y.T), r, dist), axis=1)
            moved = B.norms(B.expm_stack(mats(proj)) - B.expm_stack(mats(y)))
            pts.append(proj)
            spacing = max(spacing, float((dcell + moved).max()))
            break
        hc /= 2
        offs = np.array(list(itertools.product((-1, 1), repeat=D)), dtype=float)
        if len(y) * len(offs) > max_points * 4:
            raise BudgetExceeded("boundary refinement exceeds the net budget")
        y = (y[:, None, :] + offs[None] * hc).reshape(-1, D)
    return B.expm_stack(mats(np.concatenate(pts))), spacing


def _ball_net(r, h, d, group, max_points):
    """Net of the closed identity ball: (points, proven spacing <= h)."""
    scale = 0.9
    for _ in range(6):
        if d == 2 and group == "SL":
            pts, sp = _sl2_grid(r, scale * h, max_points)
        else:
            pts, sp = _exp_grid(r, scale * h, d, group, max_points)
        if sp <= h:
            return pts, sp
        scale *= 0.8
    raise VerificationError(f"could not reach spacing {h} for B_{r}")


def build_net(region: Region, h: float, max_points: int = MAX_NET) -> Net:
    """Finite net of the closed region whose covering radius is proven <= h."""
    if not h > 0:
        raise InputError("net spacing must be positive")
    d, group, R = region.dim, region.group, region.slack
    if h > region.radii().min() or (R > 0 and h > R):
        warnings.warn(f"net spacing {h} exceeds a region radius; the net is degenerate",
                      stacklevel=2)
    chunks, spacing = [], 0.0
    for c, r in region.atoms:
        cn = float(B.norms(c))
        if R > 0:
            n1, s1 = _ball_net(r, h / (2 * cn * (1 + R)), d, group, max_points)
            n2, s2 = _ball_net(R, h / (2 * cn * (1 + r)), d, group, max_points)
            if len(n1) * len(n2) > max_points:
                raise BudgetExceeded(f"product net needs {len(n1) * len(n2)} points")
            pts = np.einsum("ij,ajk,bkl->abil", c, n1, n2).reshape(-1, d, d)
            sp = cn * ((1 + R) * s1 + (1 + r) * s2)
        else:
            n1, s1 = _ball_net(r, h / cn, d, group, max_points)
            pts = c @ n1
            sp = cn * s1
        chunks.append(c[None])
        chunks.append(pts)
        spacing = max(spacing, sp)
    points = np.concatenate(chunks)
    if len(points) > max_points:
        raise BudgetExceeded(f"net has {len(points)} points")
    return Net(region, h, spacing, points)


# ---------------------------------------------------------------- covering

def as_family(family) -> tuple[list, np.ndarray]:
    """(labels, stacked matrices) from matrices, (label, matrix) pairs or a dict."""
    if isinstance(family, dict):
        items = list(family.items())
    else:
        items = list(family)
        if items and not (isinstance(items[0], tuple) and len(items[0]) == 2
                          and np.ndim(items[0][1]) == 2):
            items = [(i, m) for i, m in enumerate(items)]
    if not items:
        raise InputError("the family is empty")
    labels = [lab for lab, _ in items]
    mats = B.stack([m for _, m in items])
    return labels, mats


@dataclass(eq=False)
class CoveringCertificate:
    """Per net point v: family index g, target atom c, raw margin and Lipschitz constant.

    raw = rho_c - ||c^-1 g v - Id|| and lip = ||c^-1|| ||g||; the point's
    h-ball is mapped into the target when raw - lip*h > 0.
    """
    status: str
    labels: list
    family: np.ndarray
    region: Region
    target: Region
    h: float
    net_spacing: float
    points: np.ndarray
    choice: np.ndarray
    witness: np.ndarray
    raw: np.ndarray
    lip: np.ndarray
    safety: float = SAFETY
    message: str = ""

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def __bool__(self):
        return self.certified

    @property
    def margins(self) -> np.ndarray:
        return self.raw - self.lip * self.h

    @property
    def min_margin(self) -> float:
        return float(self.margins.min()) if len(self.raw) else -math.inf

    def used(self) -> list[int]:
        return sorted(set(int(i) for i in self.choice if i >= 0))


def _score(G, gnorm, V, Cinv, cinvnorm, rho, gi, wi, pi, h):
    M = Cinv[wi] @ G[gi] @ V[pi]
    raw = rho[wi] - B.dist_to_identity(M)
    lip = cinvnorm[wi] * gnorm[gi]
    return raw, lip, raw - lip * h


def _brute(G, gnorm, V, Cinv, cinvnorm, rho, idx, h, chunk=2_000_000):
    """Exhaustive best (slack, raw, g, w) for the points idx; also max raw."""
    ng, nw = len(G), len(Cinv)
    best = np.full(len(idx), -np.inf)
    best_raw = np.full(len(idx), -np.inf)
    best_lip = np.zeros(len(idx))
    best_g = np.full(len(idx), -1)
    best_w = np.zeros(len(idx), dtype=int)
    max_raw = np.full(len(idx), -np.inf)
    step = max(1, chunk // (ng * nw))
    gg, ww = np.meshgrid(np.arange(ng), np.arange(nw), indexing="ij")
    gg, ww = gg.ravel(), ww.ravel()
    for s in range(0, len(idx), step):
        part = idx[s:s + step]
        pi = np.repeat(part, len(gg))
        gi = np.tile(gg, len(part))
        wi = np.tile(ww, len(part))
        raw, lip, sl = _score(G, gnorm, V, Cinv, cinvnorm, rho, gi, wi, pi, h)
        raw, lip, sl = (a.reshape(len(part), -1) for a in (raw, lip, sl))
        j = np.argmax(sl, axis=1)
        rows = np.arange(len(part))
        best[s:s + step] = sl[rows, j]
        best_raw[s:s + step] = raw[rows, j]
        best_lip[s:s + step] = lip[rows, j]
        best_g[s:s + step] = gg[j]
        best_w[s:s + step] = ww[j]
        max_raw[s:s + step] = raw.max(axis=1)
    return best, best_raw, best_lip, best_g, best_w, max_raw


def verify_covering(family, U: Region, h: float, target: Region | None = None,
                    net: Net | None = None, max_points: int = MAX_NET,
                    safety: float = SAFETY, k_near: int = 8) -> CoveringCertificate:
    """Certify closure(U) inside the union of g^-1 target over the family.

    target defaults to U.  Candidates come from a k-d tree on the family
    (nearest to c v^-1) with an exhaustive fallback for points that fail.
    """
    labels, G = as_family(family)
    target = U if target is None else target
    if G.shape[1] != U.dim or target.dim != U.dim:
        raise InputError("family and region dimensions differ")
    empty = np.zeros(0, dtype=int)
    if net is None:
        try:
            net = build_net(U, h, max_points)
        except BudgetExceeded as exc:
            return CoveringCertificate(INCONCLUSIVE, labels, G, U, target, h, math.nan,
                                       np.zeros((0, U.dim, U.dim)), empty, empty,
                                       np.zeros(0), np.zeros(0), safety,
                                       f"budget exceeded: {exc}")
    V = net.points
    n = len(V)
    C = target.centers()
    Cinv = B.inverses(C)
    rho = target.witness_radii()
    gnorm = B.norms(G)
    cinvnorm = B.norms(Cinv)

    best = np.full(n, -np.inf)
    best_raw = np.full(n, -np.inf)
    best_lip = np.zeros(n)
    best_g = np.full(n, -1)
    best_w = np.zeros(n, dtype=int)
    if len(G) * len(C) <= 16:
        todo = np.arange(n)
    else:
        tree = cKDTree(G.reshape(len(G), -1))
        kq = min(k_near, len(G))
        Vinv = B.inverses(V)
        for w in range(len(C)):
            guess = (C[w] @ Vinv).reshape(n, -1)
            _, nb = tree.query(guess, k=kq)
            nb = nb.reshape(n, kq)
            pi = np.repeat(np.arange(n), kq)
            raw, lip, sl = _score(G, gnorm, V, Cinv, cinvnorm, rho, nb.ravel(),
                                  np.full(n * kq, w), pi, h)
            sl = sl.reshape(n, kq)
            j = np.argmax(sl, axis=1)
            rows = np.arange(n)
            better = sl[rows, j] > best
            best = np.where(better, sl[rows, j], best)
            best_raw = np.where(better, raw.reshape(n, kq)[rows, j], best_raw)
            best_lip = np.where(better, lip.reshape(n, kq)[rows, j], best_lip)
            best_g = np.where(better, nb[rows, j], best_g)
            best_w = np.where(better, w, best_w)
        todo = np.flatnonzero(best <= safety)
    max_raw = np.full(n, np.inf)
    if len(todo):
        b, br, bl, bg, bw, mr = _brute(G, gnorm, V, Cinv, cinvnorm, rho, todo, h)
        best[todo], best_raw[todo], best_lip[todo] = b, br, bl
        best_g[todo], best_w[todo] = bg, bw
        max_raw[todo] = mr
    bad = np.flatnonzero(best <= safety)
    if not len(bad):
        status, msg = CERTIFIED, f"all {n} net points certified"
    else:
        outside = bad[max_raw[bad] <= REFUTE_TOL]
        if len(outside) and target.slack == 0:
            i = int(outside[0])
            status = REFUTED
            msg = (f"net point {i} of closure(U) is mapped outside the target by every "
                   f"family member (best raw margin {max_raw[i]:.3g})")
        else:
            status = INCONCLUSIVE
            msg = (f"{len(bad)} of {n} net points lack a margin; "
                   f"retry with spacing {h / 2:g}")
    return CoveringCertificate(status, labels, G, U, target, h, net.spacing, V, best_g,
                               best_w, best_raw, best_lip, safety, msg)


def recheck(cert: CoveringCertificate, rebuild_net: bool = False) -> bool:
    """Re-evaluate the stored witnesses (and optionally the net) without searching."""
    if not cert.certified or not len(cert.points):
        return False
    if (cert.choice < 0).any():
        return False
    if not cert.net_spacing <= cert.h:
        return False
    C = cert.target.centers()
    Cinv = B.inverses(C)
    rho = cert.target.witness_radii()
    G = cert.family
    M = Cinv[cert.witness] @ G[cert.choice] @ cert.points
    raw = rho[cert.witness] - B.dist_to_identity(M)
    lip = B.norms(Cinv)[cert.witness] * B.norms(G)[cert.choice]
    if not np.all(raw - lip * cert.h > cert.safety):
        return False
    if rebuild_net:
        net = build_net(cert.region, cert.h)
        if net.points.shape != cert.points.shape or not np.allclose(net.points, cert.points,
                                                                    rtol=0, atol=1e-12):
            return False
    return True


MAX_TABLE = 200_000_000


def greedy_family(pool, U: Region, h: float, target: Region | None = None,
                  safety: float = SAFETY, chunk: int = 4_000_000):
    """Greedy set cover of the net of closure(U) by pool members with certified slack.

    Returns (chosen (label, matrix) pairs, certificate).
    """
    labels, G = as_family(pool)
    target = U if target is None else target
    net = build_net(U, h)
    V = net.points
    C, rho = target.centers(), target.witness_radii()
    Cinv = B.inverses(C)
    gnorm, cinvnorm = B.norms(G), B.norms(Cinv)
    if len(G) * len(V) > MAX_TABLE:
        raise BudgetExceeded(f"pool x net = {len(G)} x {len(V)} exceeds {MAX_TABLE} cells; "
                             "coarsen the pool or the net")
    ok = np.zeros((len(G), len(V)), dtype=bool)
    step = max(1, chunk // (len(V) * len(C)))
    for s in range(0, len(G), step):
        part = np.arange(s, min(s + step, len(G)))
        for w in range(len(C)):
            M = np.einsum("ij,gjk,vkl->gvil", Cinv[w], G[part], V)
            sl = rho[w] - B.dist_to_identity(M) - (cinvnorm[w] * gnorm[part])[:, None] * h
            ok[part] |= sl > safety
    covered = np.zeros(len(V), dtype=bool)
    chosen = []
    while not covered.all():
        gain = (ok & ~covered).sum(axis=1)
        i = int(np.argmax(gain))
        if gain[i] == 0:
            raise VerificationError(f"pool cannot cover {int((~covered).sum())} net points")
        chosen.append(i)
        covered |= ok[i]
    fam = [(labels[i], G[i]) for i in chosen]
    return fam, verify_covering(fam, U, h, target=target, net=net, safety=safety)


def greedy_subcover(cert: CoveringCertificate) -> list[tuple[np.ndarray, float]]:
    """Balls B(v, margin/Lip) around net points, taken by decreasing margin until
    every net point lies in one of them."""
    marg = cert.raw / cert.lip
    order = np.argsort(-marg)
    covered = np.zeros(len(cert.points), dtype=bool)
    balls = []
    flat = cert.points.reshape(len(cert.points), -1)
    d = cert.points.shape[-1]
    reach = d * math.sqrt(d)  # entrywise l1 <= d^1.5 * operator norm
    for i in order:
        if covered[i] or marg[i] <= 0:
            continue
        radius = float(marg[i])
        balls.append((cert.points[i], radius))
        near = np.abs(flat - flat[i]).sum(axis=1) < reach * radius
        cand = np.flatnonzero(near & ~covered)
        if len(cand):
            dist = B.norms(cert.points[cand] - cert.points[i])
            covered[cand[dist < radius]] = True
    return balls


def eta(U: Region, S, r: float) -> float:
    """1 + (r+1) beta^3 with beta bounding ||.^{+-1}|| over S and closure(U).

    Guarantees U B_r inside s U B_eta for each s in S.
    """
    S = B.stack(S)
    dets = np.linalg.det(S)
    if np.any(np.abs(dets) < 1e-12):
        raise InputError("S contains a singular matrix")
    beta = max(float(B.norms(S).max()), float(B.norms(B.inverses(S)).max()), *U.norm_bounds())
    return 1.0 + (r + 1.0) * beta ** 3 + 1e-9


# ---------------------------------------------------------------- uniform delta (SL(2))
#
# Claim certified: for every R in [R_lo, R_hi], U B_{R+delta} lies in
# G^-1 U B_{R-delta}.  Writing x = u b, the base covering gives g with
# ||c^-1 g u - Id|| <= rho_c - eps0.  If ||b - Id|| >= R - delta a shrinker e
# with ||e - Id|| < eps1 and ||e^-1 b - Id|| <= ||b - Id|| - 2 delta exists,
# and g x = (g u e)(e^-1 b) with g u e still in U.  Shrinkers are certified
# on the slice {(sqrt(1+p^2) e^{i phi}, p)}: every b is a rotation conjugate
# of a slice point and both sides of the shrink inequality are conjugation
# invariant.

def shrinkers(eps: float, n_t: int = 8, n_psi: int = 24, scales=(1.0, 0.5)):
    """SL(2) elements (z, w) with ||e - Id|| <= eps spread over the size-eps sphere."""
    zs, ws = [], []
    for sc in scales:
        e = eps * sc
        tm = e * (2 + e) / (2 * (1 + e))
        for t in np.linspace(0.0, tm, n_t):
            rt = math.sqrt(1 + t * t)
            a = max(e - t, 0.0)
            cos = min(1.0, (2 + t * t - a * a) / (2 * rt))
            chi = math.acos(cos)
            psis = [0.0] if t == 0 else 2 * math.pi * np.arange(n_psi) / n_psi
            for sign in ((1, -1) if chi > 0 else (1,)):
                for psi in psis:
                    zs.append(rt * np.exp(1j * sign * chi))
                    ws.append(t * np.exp(1j * psi))
    z, w = np.array(zs), np.array(ws)
    keep = B.zw_dist(z, w) <= eps * (1 + 1e-12)
    return z[keep], w[keep]


def _slice_gain(p, phi, ze, we):
    """||b - Id|| - ||e^-1 b - Id|| for slice points b(p, phi) and shrinkers e."""
    zb = np.sqrt(1 + p * p) * np.exp(1j * phi)
    sb = np.abs(zb - 1) + p
    cz = np.conj(ze)[None, :]
    z2 = cz * zb[:, None] - we[None, :] * p[:, None]
    w2 = cz * p[:, None] - we[None, :] * np.conj(zb)[:, None]
    return sb[:, None] - (np.abs(z2 - 1) + np.abs(w2)), sb


def _cell_radius(p, hp, hphi):
    t = p + hp
    rt = np.sqrt(1 + t * t)
    return (1 + t / rt) * hp + rt * hphi


@dataclass(eq=False)
class SliceCells:
    """Certified leaf cells (p, phi, hp, hphi) with the shrinker used in each."""
    cells: np.ndarray
    choice: np.ndarray
    value: np.ndarray
    evaluated: int
    ok: bool
    message: str = ""


def certify_slice(delta, R_lo, R_hi, ze, we, max_cells=4_000_000, chunk=4096,
                  max_depth=18, hp0=0.025, nphi0=256) -> SliceCells:
    """Cover the slice {R_lo - delta <= s <= R_hi + delta} by cells in which some
    shrinker gains at least 2 delta (gain - Lip * cell radius >= 2 delta)."""
    lip = 1 + np.abs(ze) + np.abs(we)
    pmax = R_hi + delta
    npc = max(1, math.ceil(pmax / (2 * hp0)))
    hp = pmax / (2 * npc)
    hphi = math.pi / nphi0
    pc, fc = np.meshgrid((np.arange(npc) + 0.5) * 2 * hp,
                         -math.pi + (np.arange(nphi0) + 0.5) * 2 * hphi, indexing="ij")
    cur = np.stack([pc.ravel(), fc.ravel(), np.full(pc.size, hp), np.full(pc.size, hphi)], 1)
    leaves, choices, values, evaluated = [], [], [], 0
    for depth in range(max_depth + 1):
        r = _cell_radius(cur[:, 0], cur[:, 2], cur[:, 3])
        zb = np.sqrt(1 + cur[:, 0] ** 2) * np.exp(1j * cur[:, 1])
        sc = np.abs(zb - 1) + cur[:, 0]
        rel = (sc + r >= R_lo - delta) & (sc - r <= R_hi + delta)
        cur, r = cur[rel], r[rel]
        if not len(cur):
            return SliceCells(_cat(leaves, 4), _cat(choices), _cat(values), evaluated, True)
        best = np.empty(len(cur))
        arg = np.empty(len(cur), dtype=int)
        for s in range(0, len(cur), chunk):
            g, _ = _slice_gain(cur[s:s + chunk, 0], cur[s:s + chunk, 1], ze, we)
            v = g - lip[None, :] * r[s:s + chunk, None]
            arg[s:s + chunk] = np.argmax(v, axis=1)
            best[s:s + chunk] = v[np.arange(len(v)), arg[s:s + chunk]]
        evaluated += len(cur)
        ok = best >= 2 * delta
        leaves.append(cur[ok])
        choices.append(arg[ok])
        values.append(best[ok])
        cur = cur[~ok]
        if not len(cur):
            return SliceCells(_cat(leaves, 4), _cat(choices), _cat(values), evaluated, True)
        if depth == max_depth or evaluated + 4 * len(cur) > max_cells:
            break
        q = np.repeat(cur, 4, axis=0)
        sgn = np.tile(np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]], dtype=float), (len(cur), 1))
        q[:, 2] /= 2
        q[:, 3] /= 2
        q[:, 0] += sgn[:, 0] * q[:, 2]
        q[:, 1] += sgn[:, 1] * q[:, 3]
        cur = q
    p, f = cur[0, 0], cur[0, 1]
    return SliceCells(_cat(leaves, 4), _cat(choices), _cat(values), evaluated, False,
                      f"{len(cur)} cells unresolved, e.g. near p={p:.4g}, phi={f:.4g}")


def _cat(parts, width=None):
    if not parts:
        return np.zeros((0, width)) if width else np.zeros(0)
    return np.concatenate(parts)


@dataclass(eq=False)
class DeltaCertificate:
    status: str
    delta: float
    R_lo: float
    R_hi: float
    eps0: float
    eps1: float
    shrink_z: np.ndarray
    shrink_w: np.ndarray
    slice: SliceCells | None
    base: CoveringCertificate
    attempts: list = field(default_factory=list)
    message: str = ""

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def __bool__(self):
        return self.certified

    def __float__(self):
        return float(self.delta)

    def r_grid(self) -> np.ndarray:
        """R values at step delta/2; the certificate covers all of [R_lo, R_hi]."""
        n = max(1, math.ceil((self.R_hi - self.R_lo) / (self.delta / 2)))
        return np.linspace(self.R_lo, self.R_hi, n + 1)


def base_slack(cert: CoveringCertificate) -> tuple[float, float]:
    """(eps0, eps1): every u in closure(U) has ||c^-1 g u - Id|| <= rho_c - eps0, and
    multiplying g u on the right by e with ||e - Id|| < eps1 stays in the target."""
    m = cert.margins
    rho = cert.target.witness_radii()[cert.witness]
    eps0 = float(m.min())
    eps1 = float(np.min(m / (1 + rho - m))) * (1 - 1e-9)
    return eps0, eps1


def uniform_delta(family, U: Region, R_lo: float, R_hi: float, h: float,
                  base: CoveringCertificate | None = None, floor: float = 1e-6,
                  max_cells: int = 4_000_000) -> DeltaCertificate:
    if U.dim != 2 or U.group != "SL":
        raise InputError("uniform_delta is implemented for SL(2) regions")
    if not 0 < R_lo <= R_hi:
        raise InputError("need 0 < R_lo <= R_hi")
    if U.slack != 0:
        raise InputError("U must be a plain union of atoms")
    if base is None:
        base = verify_covering(family, U, h)
    empty = np.zeros(0, complex)
    if not base.certified:
        return DeltaCertificate(INCONCLUSIVE, 0.0, R_lo, R_hi, math.nan, math.nan, empty, empty,
                                None, base, [], f"base covering not certified: {base.message}")
    eps0, eps1 = base_slack(base)
    ze, we = shrinkers(0.98 * eps1)
    # gain estimate on a coarse grid plus the worst spot -Id
    pp, ff = np.meshgrid(np.linspace(0, R_hi, 60), np.linspace(-math.pi, math.pi, 121))
    pp = np.append(pp.ravel(), 0.0)
    ff = np.append(ff.ravel(), math.pi)
    g, sb = _slice_gain(pp, ff, ze, we)
    rel = (sb >= R_lo) & (sb <= R_hi)
    if not rel.any():
        rel[-1] = True
    gmin = float(g.max(axis=1)[rel].min())
    attempts = []
    delta = 0.3 * gmin
    while delta >= floor:
        cells = certify_slice(delta, R_lo, R_hi, ze, we, max_cells=max_cells)
        attempts.append((delta, cells.ok, cells.evaluated))
        if cells.ok:
            return DeltaCertificate(CERTIFIED, delta, R_lo, R_hi, eps0, eps1, ze, we, cells,
                                    base, attempts, f"{len(cells.cells)} slice cells certified")
        delta /= 2
    return DeltaCertificate(INCONCLUSIVE, 0.0, R_lo, R_hi, eps0, eps1, ze, we, None, base,
                            attempts, f"no delta >= {floor} certified; retry with spacing {h / 2:g}")


def recheck_delta(dc: DeltaCertificate) -> bool:
    """Recompute eps1 from the base margins and re-run the slice certification."""
    if not dc.certified or not recheck(dc.base):
        return False
    eps0, eps1 = base_slack(dc.base)
    if not np.all(B.zw_dist(dc.shrink_z, dc.shrink_w) < eps1):
        return False
    if not np.allclose(np.abs(dc.shrink_z) ** 2 - np.abs(dc.shrink_w) ** 2, 1, atol=1e-12):
        return False
    cells = certify_slice(dc.delta, dc.R_lo, dc.R_hi, dc.shrink_z, dc.shrink_w)
    return cells.ok


# ---------------------------------------------------------------- family multi-cover

@dataclass(eq=False)
class FamilyMultiCover:
    """Layers {prefix} x G^m covering V = U B_R0 (one layer per prefix)."""
    labels: list
    family: np.ndarray
    U: Region
    V: Region
    k0: int
    m: int
    R0: float
    eta: float
    eta_scope: str
    delta: float
    prefixes: list
    base: CoveringCertificate
    delta_cert: DeltaCertificate

    @property
    def k(self) -> int:
        return self.k0 + self.m

    @property
    def layers(self) -> list:
        """Symbolic layers: (prefix tuple, number of free letters)."""
        return [(w, self.m) for w in self.prefixes]

    def prefix_product(self, w) -> np.ndarray:
        out = np.eye(self.U.dim)
        for a in w:
            out = out @ self.family[a]
        return out


def _k0_products(G, k0, limit=1_000_000):
    n = len(G)
    if n ** k0 > limit:
        return None
    P = G.copy()
    for _ in range(k0 - 1):
        P = np.einsum("aij,bjk->abik", P, G).reshape(-1, G.shape[1], G.shape[1])
    return P


def multi_cover_from_cover(family, U: Region, n_layers: int, h: float,
                           base: CoveringCertificate | None = None,
                           delta_cert: DeltaCertificate | None = None) -> FamilyMultiCover:
    labels, G = as_family(family)
    if len(G) < 2:
        raise InputError("need at least two maps to form disjoint layers")
    if n_layers < 1:
        raise InputError("n_layers must be positive")
    if base is None:
        base = verify_covering((list(zip(labels, G))), U, h)
    if not base.certified:
        raise VerificationError(f"covering not certified: {base.message}")
    k0 = 1
    while len(G) ** k0 < n_layers:
        k0 += 1
    prefixes = list(itertools.islice(itertools.product(range(len(G)), repeat=k0), n_layers))
    P = _k0_products(G, k0)
    if P is None:
        scope = "chosen prefixes"
        P = np.stack([np.linalg.multi_dot([np.eye(U.dim)] + [G[a] for a in w]) for w in prefixes])
    else:
        scope = "all k0-fold products"
    et = eta(U, B.inverses(P), 1.0)
    R0 = et + 1e-6 * max(1.0, et)
    if delta_cert is None:
        delta_cert = uniform_delta(None, U, 1.0, R0, h, base=base)
    if not delta_cert.certified:
        raise VerificationError(f"uniform delta not certified: {delta_cert.message}")
    delta = delta_cert.delta
    m = max(1, math.floor((R0 - 1) / delta))
    while R0 - m * delta >= 1:
        m += 1
    while m > 1 and R0 - (m - 1) * delta < 1:
        m -= 1
    return FamilyMultiCover(labels, G, U, U.with_slack(R0), k0, m, R0, et, scope, delta,
                            prefixes, base, delta_cert)


@dataclass
class MultiCoverCheck:
    ok: bool
    failures: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def _verify_family_multi(mc: FamilyMultiCover) -> MultiCoverCheck:
    fails = []
    if len(mc.family) < 2:
        fails.append(("family", "fewer than two maps"))
    if not recheck(mc.base):
        fails.append(("base", "base covering certificate does not re-check"))
    if not recheck_delta(mc.delta_cert) or mc.delta_cert.delta != mc.delta:
        fails.append(("delta", "uniform delta certificate does not re-check"))
    if not (mc.delta_cert.R_lo <= 1.0 and mc.delta_cert.R_hi >= mc.R0):
        fails.append(("delta", "delta certified on a range not containing [1, R0]"))
    P = _k0_products(mc.family, mc.k0)
    if P is None:
        P = np.stack([mc.prefix_product(w) for w in mc.prefixes])
    et = eta(mc.U, B.inverses(P), 1.0)
    if not mc.R0 > et:
        fails.append(("eta", f"R0 = {mc.R0} is not above eta = {et}"))
    if not (mc.R0 - mc.m * mc.delta < 1 <= mc.R0 - (mc.m - 1) * mc.delta):
        fails.append(("m", "m is not the least integer with R0 - m delta < 1"))
    if len(set(mc.prefixes)) != len(mc.prefixes) or any(len(w) != mc.k0 for w in mc.prefixes):
        fails.append(("layers", "prefixes are not distinct k0-words"))
    if not mc.prefixes:
        fails.append(("layers", "no layers"))
    return MultiCoverCheck(not fails, fails)


@dataclass
class SampleReport:
    n: int
    min_margin: float
    failures: int
    steps: int
    active_steps: int
    max_drift: float

    @property
    def ok(self) -> bool:
        return self.failures == 0


def sample_closure(region: Region, n: int, rng, outer: float | None = None):
    """Chart-uniform samples u*b with u in closure of the atoms and ||b - Id|| <= outer."""
    if region.dim != 2 or region.group != "SL":
        raise InputError("sampling is implemented for SL(2)")

    def ball(r, k):
        out_z, out_w = [], []
        got = 0
        phimax = math.asin(r) if r < 1 else math.pi
        while got < k:
            q = 4 * (k - got) + 16
            rad = r * np.sqrt(rng.uniform(size=q))
            ang = rng.uniform(0, 2 * math.pi, size=q)
            z, w = _sl2_chart(rad * np.cos(ang), rad * np.sin(ang), rng.uniform(-phimax, phimax, q))
            ok = B.zw_dist(z, w) <= r
            out_z.append(z[ok])
            out_w.append(w[ok])
            got += int(ok.sum())
        return np.concatenate(out_z)[:k], np.concatenate(out_w)[:k]

    which = rng.integers(len(region), size=n)
    u = np.empty((n, 2, 2))
    for i, (c, r) in enumerate(region.atoms):
        sel = np.flatnonzero(which == i)
        if len(sel):
            u[sel] = c @ B.from_zw(*ball(r, len(sel)))
    R = region.slack if outer is None else outer
    if R > 0:
        return u, B.from_zw(*ball(R, n))
    return u, np.broadcast_to(np.eye(2), (n, 2, 2)).copy()


def sample_multi_cover(mc: FamilyMultiCover, n_samples: int = 10_000, seed: int = 0,
                       settle: float = 0.5, k_near: int = 4) -> SampleReport:
    """Run the explicit witness chain on random points of closure(V) for every layer.

    Each step applies the base covering map and, while ||b - Id|| >= settle, a
    shrinker; after m steps the layer prefix is applied and membership in V is
    tested with a positive margin.
    """
    rng = B.make_rng(seed)
    base, G = mc.base, mc.family
    u, b = sample_closure(mc.U, n_samples, rng, outer=mc.R0)
    y = u @ b
    tree = cKDTree(base.points.reshape(len(base.points), -1))
    Cinv = B.inverses(base.target.centers())
    rho = base.target.witness_radii()
    ze, we = mc.delta_cert.shrink_z, mc.delta_cert.shrink_w
    zb, wb = B.to_zw(b)
    fails = np.zeros(n_samples, dtype=bool)
    active_steps = 0
    rows = np.arange(n_samples)
    for _ in range(mc.m):
        _, nb = tree.query(u.reshape(n_samples, -1), k=k_near)
        gi, ci = base.choice[nb], base.witness[nb]
        a = Cinv[ci] @ (G[gi] @ u[:, None])
        raw = rho[ci] - B.dist_to_identity(a)
        j = np.argmax(raw, axis=1)
        fails |= raw[rows, j] <= 0
        g = G[gi[rows, j]]
        c = ci[rows, j]
        a = a[rows, j]
        gu = g @ u
        y = g @ y
        act = np.flatnonzero(B.zw_dist(zb, wb) >= settle)
        if len(act):
            active_steps += 1
            kap = np.where(np.abs(wb[act]) > 0, np.conj(wb[act]) / np.maximum(np.abs(wb[act]), 1e-300), 1)
            p = np.abs(wb[act])
            phi = np.angle(zb[act])
            gain, _ = _slice_gain(p, phi, ze, we)
            # shrinker in the sample's own frame and the resulting U-membership
            wep = np.conj(kap)[:, None] * we[None, :]
            za, wa = B.to_zw(a[act])
            z2, w2 = B.zw_mul(za[:, None], wa[:, None], ze[None, :], wep)
            ok = B.zw_dist(z2, w2) < rho[c[act]][:, None] - 1e-12
            gain = np.where(ok, gain, -np.inf)
            e = np.argmax(gain, axis=1)
            zsel = ze[e]
            wsel = wep[np.arange(len(act)), e]
            good = np.isfinite(gain[np.arange(len(act)), e])
            zsel = np.where(good, zsel, 1.0)
            wsel = np.where(good, wsel, 0.0)
            emat = B.from_zw(zsel, wsel)
            gu[act] = gu[act] @ emat
            zi, wi = B.zw_inv(zsel, wsel)
            zb[act], wb[act] = B.zw_mul(zi, wi, zb[act], wb[act])
        u = gu
    recon = u @ B.from_zw(zb, wb)
    drift = float(np.max(B.norms(recon - y) / B.norms(y)))
    worst = math.inf
    for w in mc.prefixes:
        marg, _ = mc.V.margins(mc.prefix_product(w) @ y)
        fails |= marg <= 0
        worst = min(worst, float(marg.min()))
    return SampleReport(n_samples, worst, int(fails.sum()), mc.m, active_steps, drift)


# ---------------------------------------------------------------- cocycle multi-cover

@dataclass(eq=False)
class MultiCoverCertificate:
    """Layer words Lambda^j_i(a) with recorded products and covering certificates.

    Keys of ``layers``, ``products`` and ``certificates`` are (a, i, j) with a a
    letter (window word), i an atom index of ``union`` and j in 1..m.
    """
    k: int
    letters: list
    union: Region
    m: int
    layers: dict
    products: dict
    certificates: dict
    detours: dict
    base: dict
    h: float
    constants: dict = field(default_factory=dict)

    @property
    def regions(self) -> list:
        return [self.union.atom(i) for i in range(len(self.union))]

    def layer_union(self, a, i) -> list:
        return [w for j in range(1, self.m + 1) for w in self.layers.get((a, i, j), [])]

    def max_iterates(self) -> int:
        width = 2 * self.k + 1
        return max(len(w) - width for ws in self.layers.values() for w in ws)


def is_antichain(words) -> bool:
    """No word is a prefix of another (duplicates included): all-pairs test."""
    ws = list(words)
    for i, u in enumerate(ws):
        for j, v in enumerate(ws):
            if i != j and len(u) <= len(v) and v[:len(u)] == u:
                return False
    return True


def _branch_stem(ts, b):
    """Shortest extension of b ending in a symbol with at least two successors."""
    b = as_word(b)
    seen = {b[-1]}
    frontier = [b]
    while frontier:
        nxt = []
        for w in frontier:
            if len(ts.successors(w[-1])) >= 2:
                return w
            for s in ts.successors(w[-1]):
                if s not in seen:
                    seen.add(s)
                    nxt.append(w + (s,))
        frontier = nxt
    return None


def detour_candidates(A, b, letters, branch: int, max_extra: int, limit: int):
    """Words b ... c_branch ... ending in a letter, shortest first.

    The words for branch 0 and branch 1 first differ right after the common stem,
    so any choice of one word per branch is an anti-chain pair.
    """
    from .sft import iter_transitions
    ts = A.base
    stem = _branch_stem(ts, b)
    if stem is None:
        raise StructureError("no branching vertex: the base has zero entropy")
    succ = ts.successors(stem[-1])
    head = stem + (succ[branch],)
    width = 2 * A.k + 1
    gens = [iter_transitions(ts, head, ltr, len(head) + len(ltr) + max_extra,
                             min_len=max(len(head), width + 1)) for ltr in letters]
    out = []
    pending = [next(g, None) for g in gens]
    while len(out) < limit and any(p is not None for p in pending):
        i = min((i for i, p in enumerate(pending) if p is not None),
                key=lambda i: (len(pending[i]), pending[i]))
        out.append(pending[i])
        pending[i] = next(gens[i], None)
    return out


def cocycle_multi_cover(A, letters, U: Region, h: float, max_len: int | None = None,
                        candidates: dict | None = None, max_candidates: int = 2000,
                        max_extra: int = 24, detour_pool: int = 4096, detour_tries: int = 32,
                        diameter_limit: int = 4096) -> MultiCoverCertificate:
    """Two-layer multiple covering from a certified cocycle covering condition.

    For each letter a the covering words w (transitions from a to letters
    whose products certify closure(U) inside the union of A_w^-1 U) are
    extended by detours w^1(b), w^2(b) through a branching vertex; layer j of
    atom i is {w v w^j(b_w)}.  Detours are tried in order of ||A_detour - Id||
    so that the shifted families still certify against U itself.
    """
    from .cocycle import product_over_transition, two_sided_norm
    from .sft import (amalgamate, as_word, directed_diameter, higher_block, is_admissible,
                      iter_transitions)
    ts, width = A.base, 2 * A.k + 1
    letters = [as_word(a) for a in letters]
    if not letters:
        raise InputError("no letters")
    for a in letters:
        if len(a) != width or not is_admissible(ts, a):
            raise InputError(f"letter {a} is not an admissible word of length {width}")
    # precondition: the cocycle covering condition
    base, words = {}, {}
    for a in letters:
        if candidates is not None and a in candidates:
            cand = [as_word(w) for w in candidates[a]]
        else:
            if max_len is None:
                raise InputError("give candidate words or max_len")
            cand = []
            for b in letters:
                cand.extend(itertools.islice(iter_transitions(ts, a, b, max_len, width + 1),
                                             max_candidates))
        cand = [w for w in cand if len(w) >= width + 1 and w[:width] == a and w[-width:] in letters]
        if not cand:
            raise VerificationError(f"no transition words from letter {a}")
        fam = [(w, product_over_transition(A, w)) for w in cand]
        cert = verify_covering(fam, U, h)
        if not cert.certified:
            raise VerificationError(f"covering condition not certified for letter {a}: "
                                    f"{cert.message}")
        base[a] = cert
        words[a] = [cand[i] for i in cert.used()]
    # detours: for each branch try the t-th candidate of every end letter at once
    ends = sorted({w[-width:] for ws in words.values() for w in ws})
    detours = {b: [None, None] for b in ends}
    layers, products, certs = {}, {}, {}
    for j in (1, 2):
        cands = {}
        for b in ends:
            pool = detour_candidates(A, b, letters, j - 1, max_extra, detour_pool)
            near = B.dist_to_identity(np.stack([product_over_transition(A, d) for d in pool]))
            order = sorted(range(len(pool)), key=lambda q: (near[q], len(pool[q]), pool[q]))
            cands[b] = [pool[q] for q in order[:detour_tries]]
        last = ""
        for t in range(max(len(c) for c in cands.values())):
            choice = {b: c[min(t, len(c) - 1)] for b, c in cands.items()}
            trial, ok = {}, True
            for a in letters:
                for i in range(len(U)):
                    lw = [amalgamate(w, choice[w[-width:]], width) for w in words[a]]
                    prods = np.stack([product_over_transition(A, w) for w in lw])
                    cert = verify_covering(list(zip(lw, prods)), U.atom(i), h, target=U)
                    if not cert.certified:
                        ok, last = False, cert.message
                        break
                    trial[(a, i, j)] = (lw, prods, cert)
                if not ok:
                    break
            if ok:
                for b in ends:
                    detours[b][j - 1] = choice[b]
                for key, (lw, prods, cert) in trial.items():
                    layers[key], products[key], certs[key] = lw, prods, cert
                break
        else:
            raise VerificationError(f"no detour on branch {j} certifies the layers ({last})")
    for a in letters:
        for i in range(len(U)):
            if not is_antichain(layers[(a, i, 1)] + layers[(a, i, 2)]):
                raise VerificationError(f"layers of ({a}, {i}) are not an anti-chain")
    # diagnostics of the existence argument (not used by the construction)
    consts = {}
    sup = A.sup_norm()
    svals = [product_over_transition(A, d) for pair in detours.values() for d in pair]
    consts["detour_beta"] = max(two_sided_norm(s) for s in svals)
    consts["eta_detours"] = eta(U, svals, 1.0)
    try:
        if ts.alphabet_size ** width <= diameter_limit:
            ell = directed_diameter(higher_block(ts, width))
            consts["diameter"] = ell
            consts["crude_S_bound"] = sup ** (2 * ell + 1)
            consts["eta_crude"] = 1.0 + 2.0 * max(consts["crude_S_bound"], *U.norm_bounds()) ** 3
    except StructureError:
        consts["diameter"] = None
    return MultiCoverCertificate(A.k, letters, U, 2, layers, products, certs,
                                 {b: tuple(v) for b, v in detours.items()}, base, h, consts)


def _verify_cocycle_multi(A, cert: MultiCoverCertificate, h: float | None,
                          full: bool) -> MultiCoverCheck:
    from .cocycle import product_over_transition
    from .sft import is_admissible
    width = 2 * A.k + 1
    fails = []
    if A.k != cert.k:
        fails.append((None, None, None, "window radius differs from the certificate"))
    if cert.m < 2:
        fails.append((None, None, None, "fewer than two layers"))
    letters = set(cert.letters)
    for a in cert.letters:
        for i in range(len(cert.union)):
            for j in range(1, cert.m + 1):
                key = (a, i, j)
                lw = cert.layers.get(key, [])
                if not lw:
                    fails.append((a, i, j, "empty layer"))
                    continue
                bad = [w for w in lw if len(w) < width + 1 or tuple(w[:width]) != a
                       or tuple(w[-width:]) not in letters or not is_admissible(A.base, w)]
                if bad:
                    fails.append((a, i, j, f"word {bad[0]} is not a transition between letters"))
                    continue
                prods = np.stack([product_over_transition(A, w) for w in lw])
                rec = cert.products.get(key)
                if rec is None or rec.shape != prods.shape or \
                        not np.allclose(rec, prods, rtol=1e-12, atol=1e-12):
                    fails.append((a, i, j, "recorded products differ from recomputation"))
                    continue
                c = cert.certificates.get(key)
                if full:
                    c = verify_covering(list(zip(lw, prods)), cert.union.atom(i),
                                        cert.h if h is None else h, target=cert.union)
                    ok = c.certified
                else:
                    ok = c is not None and np.allclose(c.family, prods, rtol=0, atol=0) \
                        and recheck(c)
                if not ok:
                    fails.append((a, i, j, "covering inclusion does not re-verify"))
            if not is_antichain(cert.layer_union(a, i)):
                fails.append((a, i, None, "layer union is not an anti-chain"))
    return MultiCoverCheck(not fails, fails)


def verify_multi_cover(A, cert, h: float | None = None, full: bool = False) -> MultiCoverCheck:
    """Re-verify a multiple covering certificate; truthy iff every check passes.

    For a FamilyMultiCover A is ignored.  full=True re-runs the covering
    search instead of re-evaluating the stored witnesses.
    """
    if isinstance(cert, FamilyMultiCover):
        return _verify_family_multi(cert)
    return _verify_cocycle_multi(A, cert, h, full)
