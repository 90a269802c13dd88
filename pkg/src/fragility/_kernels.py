"""Hot inner loops, in two flavours.

Every kernel exists as a pure-numpy implementation (``*_np``) and, when numba
imports, as an ``@njit`` twin (``*_nb``).  The public names at the bottom of the
module are bound once at import time according to ``FRAGILITY_BACKEND``
(``numba`` | ``numpy``; default ``numba`` if available).

Subsets of ``n`` coordinates are encoded as bitmasks ``0 .. 2**n - 1``, bit ``i``
standing for coordinate ``i``.  All tables are indexed by mask.
"""

from __future__ import annotations

import functools
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_ROW_CHUNK_ELEMS = 1 << 22


def _requested_backend() -> str:
    want = os.environ.get("FRAGILITY_BACKEND", "").strip().lower()
    if want in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if want not in ("numba", "numpy"):
        raise ValueError(f"FRAGILITY_BACKEND must be 'numba' or 'numpy', got {want!r}")
    if want == "numba" and not HAVE_NUMBA:
        raise ImportError("FRAGILITY_BACKEND=numba but numba is not importable")
    return want


BACKEND = _requested_backend()


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


# below this many coordinates one product with the mask-bit matrix beats the doubling loop for sums
_SMALL_N = 11


@functools.lru_cache(maxsize=None)
def _mask_bits(n: int) -> np.ndarray:
    bits = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(float)
    bits.setflags(write=False)
    return bits


def subset_sums_np(v: np.ndarray) -> np.ndarray:
    n = v.shape[0]
    if n < _SMALL_N:
        return _mask_bits(n) @ v
    out = np.zeros(1 << n)
    for i in range(n):
        h = 1 << i
        out[h : 2 * h] = out[:h] + v[i]
    return out


def subset_maxes_np(v: np.ndarray) -> np.ndarray:
    n = v.shape[0]
    out = np.zeros(1 << n)
    for i in range(n):
        h = 1 << i
        np.maximum(out[:h], v[i], out=out[h : 2 * h])
    return out


def weighted_subset_max_np(z: np.ndarray, p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``out[mask] = sum_r p[r] * max_{i in mask} w[i] * z[r, i]`` (0 for the empty mask)."""
    n_rows, n = z.shape
    size = 1 << n
    out = np.zeros(size)
    chunk = max(1, _ROW_CHUNK_ELEMS // size)
    for start in range(0, n_rows, chunk):
        wz = z[start : start + chunk] * w
        pc = p[start : start + chunk]
        table = np.zeros((size, wz.shape[0]))
        for i in range(n):
            h = 1 << i
            np.maximum(table[:h], wz[:, i], out=table[h : 2 * h])
        out += table @ pc
    return out


def subset_zeta_np(h: np.ndarray) -> np.ndarray:
    """``out[K] = sum_{T subset of K} h[T]``."""
    f = np.array(h, dtype=float, copy=True)
    n = f.shape[0].bit_length() - 1
    for i in range(n):
        blk = 1 << i
        view = f.reshape(-1, 2, blk)
        view[:, 1, :] += view[:, 0, :]
    return f


def iid_uniform_subset_max_np(b: np.ndarray) -> np.ndarray:
    """``out[mask] = E max_{i in mask} b[i] * U_i`` for iid Uniform(0,1) ``U_i``.

    Integrates the product of uniform cdfs piecewise between the sorted
    ``b`` values; zero entries contribute nothing.
    """
    n = b.shape[0]
    masks = np.arange(1 << n)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    vals = np.where(bits, b[None, :], 0.0)
    vals.sort(axis=1)
    top = vals[:, -1]
    pos = vals > 0
    logs = np.where(pos, np.log(np.where(pos, vals, 1.0)), 0.0)
    # suffix sums of logs and counts, from column j to the end
    suffix_log = np.cumsum(logs[:, ::-1], axis=1)[:, ::-1]
    n_from = np.arange(n, 0, -1)[None, :]
    prev = np.concatenate([np.zeros((vals.shape[0], 1)), vals[:, :-1]], axis=1)
    with np.errstate(divide="ignore"):
        log_hi = np.log(vals)
        log_lo = np.log(prev)
    upper = np.where(pos, vals * np.exp(n_from * log_hi - suffix_log), 0.0)
    lower = np.where(pos & (prev > 0), prev * np.exp(n_from * log_lo - suffix_log), 0.0)
    integral = ((upper - lower) / (n_from + 1)).sum(axis=1)
    out = top - integral
    out[0] = 0.0
    return out


def run_lengths_np(exceed: np.ndarray, start: int) -> np.ndarray:
    """Number of consecutive ``True`` after column ``start`` in each row."""
    tail = exceed[:, start + 1 :]
    if tail.shape[1] == 0:
        return np.zeros(exceed.shape[0], dtype=np.int64)
    return np.cumprod(tail, axis=1, dtype=np.int64).sum(axis=1)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def subset_sums_nb(v):
        n = v.shape[0]
        out = np.zeros(1 << n)
        for mask in range(1, 1 << n):
            low = mask & -mask
            i = 0
            while (1 << i) != low:
                i += 1
            out[mask] = out[mask ^ low] + v[i]
        return out

    @njit(cache=True)
    def subset_maxes_nb(v):
        n = v.shape[0]
        out = np.zeros(1 << n)
        for mask in range(1, 1 << n):
            low = mask & -mask
            i = 0
            while (1 << i) != low:
                i += 1
            out[mask] = max(out[mask ^ low], v[i])
        return out

    @njit(cache=True)
    def weighted_subset_max_nb(z, p, w):
        n_rows, n = z.shape
        size = 1 << n
        out = np.zeros(size)
        low_bit = np.zeros(size, dtype=np.int64)
        for mask in range(1, size):
            low = mask & -mask
            i = 0
            while (1 << i) != low:
                i += 1
            low_bit[mask] = i
        buf = np.zeros(size)
        wz = np.empty(n)
        for r in range(n_rows):
            for i in range(n):
                wz[i] = w[i] * z[r, i]
            pr = p[r]
            for mask in range(1, size):
                i = low_bit[mask]
                prev = buf[mask & (mask - 1)]
                v = wz[i] if wz[i] > prev else prev
                buf[mask] = v
                out[mask] += pr * v
        return out

    @njit(cache=True)
    def subset_zeta_nb(h):
        f = h.copy()
        size = f.shape[0]
        bit = 1
        while bit < size:
            for mask in range(size):
                if mask & bit:
                    f[mask] += f[mask ^ bit]
            bit <<= 1
        return f

    @njit(cache=True)
    def iid_uniform_subset_max_nb(b):
        n = b.shape[0]
        size = 1 << n
        out = np.zeros(size)
        vals = np.empty(n)
        for mask in range(1, size):
            m = 0
            for i in range(n):
                if (mask >> i) & 1 and b[i] > 0.0:
                    vals[m] = b[i]
                    m += 1
            if m == 0:
                continue
            srt = np.sort(vals[:m])
            integral = 0.0
            lo = 0.0
            for j in range(m):
                hi = srt[j]
                up = hi
                dn = lo
                for i in range(j, m):
                    up *= hi / srt[i]
                    dn *= lo / srt[i]
                integral += (up - dn) / (m - j + 1)
                lo = hi
            out[mask] = srt[m - 1] - integral
        return out

    @njit(cache=True)
    def run_lengths_nb(exceed, start):
        n_rows, d = exceed.shape
        out = np.zeros(n_rows, dtype=np.int64)
        for r in range(n_rows):
            k = 0
            j = start + 1
            while j < d and exceed[r, j]:
                k += 1
                j += 1
            out[r] = k
        return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if BACKEND == "numba":
    subset_sums = subset_sums_nb
    subset_maxes = subset_maxes_nb
    weighted_subset_max = weighted_subset_max_nb
    subset_zeta = subset_zeta_nb
    iid_uniform_subset_max = iid_uniform_subset_max_nb
    run_lengths = run_lengths_nb
else:
    subset_sums = subset_sums_np
    subset_maxes = subset_maxes_np
    weighted_subset_max = weighted_subset_max_np
    subset_zeta = subset_zeta_np
    iid_uniform_subset_max = iid_uniform_subset_max_np
    run_lengths = run_lengths_np
