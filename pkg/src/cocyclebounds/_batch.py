"""Vectorized helpers for stacks of small matrices.

2x2 real matrices are also handled in the conformal/anticonformal split
M v = z v + w conj(v), where ||M|| = |z| + |w| and det M = |z|^2 - |w|^2.
"""
import numpy as np


def stack(mats) -> np.ndarray:
    arr = np.asarray(mats, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"expected a stack of square matrices, got shape {arr.shape}")
    return arr


def norms(m) -> np.ndarray:
    """Operator 2-norms over the last two axes."""
    m = np.asarray(m, dtype=float)
    if m.shape[-1] == 2 and m.shape[-2] == 2:
        a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
        return 0.5 * (np.hypot(a + d, c - b) + np.hypot(a - d, b + c))
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


def inverses(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape[-1] == 2:
        a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
        det = a * d - b * c
        out = np.empty_like(m)
        out[..., 0, 0] = d / det
        out[..., 0, 1] = -b / det
        out[..., 1, 0] = -c / det
        out[..., 1, 1] = a / det
        return out
    return np.linalg.inv(m)


def dist_to_identity(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return norms(m - np.eye(m.shape[-1]))


def expm_stack(x) -> np.ndarray:
    """exp of each matrix in a stack: Taylor series with scaling and squaring."""
    x = np.asarray(x, dtype=float)
    nrm = np.max(np.abs(x).sum(axis=-1), axis=-1) if x.size else np.zeros(x.shape[:-2])
    s = np.maximum(0, np.ceil(np.log2(np.maximum(nrm, 1e-300) / 0.25))).astype(int)
    s = np.where(nrm > 0.25, s, 0)
    y = x / (2.0 ** s)[..., None, None]
    eye = np.broadcast_to(np.eye(x.shape[-1]), x.shape)
    term = eye.copy()
    out = eye.copy()
    for n in range(1, 18):
        term = term @ y / n
        out = out + term
    for k in range(int(s.max()) if s.size else 0):
        sq = s > k
        out[sq] = out[sq] @ out[sq]
    return out


# ---------------------------------------------------------------- 2x2 complex form

def to_zw(m):
    m = np.asarray(m, dtype=float)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    return 0.5 * ((a + d) + 1j * (c - b)), 0.5 * ((a - d) + 1j * (b + c))


def from_zw(z, w) -> np.ndarray:
    z, w = np.asarray(z), np.asarray(w)
    out = np.empty(z.shape + (2, 2))
    out[..., 0, 0] = z.real + w.real
    out[..., 0, 1] = -z.imag + w.imag
    out[..., 1, 0] = z.imag + w.imag
    out[..., 1, 1] = z.real - w.real
    return out


def zw_mul(z1, w1, z2, w2):
    return z1 * z2 + w1 * np.conj(w2), z1 * w2 + w1 * np.conj(z2)


def zw_inv(z, w):
    det = (np.abs(z) ** 2 - np.abs(w) ** 2)
    return np.conj(z) / det, -w / det


def zw_dist(z, w):
    """||M - Id||."""
    return np.abs(z - 1) + np.abs(w)


def zw_norm(z, w):
    return np.abs(z) + np.abs(w)


def make_rng(seed: int = 0) -> np.random.Generator:
    """Counter-based generator; the seed alone fixes every draw."""
    return np.random.Generator(np.random.Philox(int(seed) % 2**64))
