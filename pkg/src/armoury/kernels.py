"""Hot loops of the key search, in numba and pure-numpy flavours.

Each public kernel dispatches on ``_accel.USE_NUMBA``; the ``*_numba`` and
``*_numpy`` variants are importable directly so the benchmark and tests can
compare them.  All words are int64 (every width here is at most 63 bits).
"""

from __future__ import annotations

import numpy as np

from . import _accel
from ._accel import njit

# ---------------------------------------------------------------- numba path


@njit(cache=True)
def _parity(x):
    x ^= x >> 32
    x ^= x >> 16
    x ^= x >> 8
    x ^= x >> 4
    x ^= x >> 2
    x ^= x >> 1
    return x & 1


@njit(cache=True)
def sco_batch_numba(keys, degrees, masks, n):
    d1 = degrees[0]
    d2 = degrees[1]
    d3 = degrees[2]
    m1, m2, m3 = masks[0], masks[1], masks[2]
    lo1 = (np.int64(1) << d1) - 1
    lo2 = (np.int64(1) << d2) - 1
    out = np.empty(keys.shape[0], dtype=np.int64)
    for i in range(keys.shape[0]):
        k = keys[i]
        s1 = k & lo1
        s2 = (k >> d1) & lo2
        s3 = k >> (d1 + d2)
        chunk = np.int64(0)
        for _ in range(n):
            b1 = s1 & 1
            b2 = s2 & 1
            b3 = s3 & 1
            s1 = (s1 >> 1) | (_parity(s1 & m1) << (d1 - 1))
            s2 = (s2 >> 1) | (_parity(s2 & m2) << (d2 - 1))
            s3 = (s3 >> 1) | (_parity(s3 & m3) << (d3 - 1))
            chunk = (chunk << 1) | ((b1 & b2) | (b1 & b3) | (b2 & b3))
        out[i] = chunk
    return out


@njit(cache=True)
def register_sequences_numba(degree, mask, n):
    size = np.int64(1) << degree
    out = np.empty(size, dtype=np.int64)
    for s0 in range(size):
        s = np.int64(s0)
        seq = np.int64(0)
        for _ in range(n):
            seq = (seq << 1) | (s & 1)
            s = (s >> 1) | (_parity(s & mask) << (degree - 1))
        out[s0] = seq
    return out


@njit(cache=True)
def _row_count(a, b, start, stop):
    c = 0
    for r2 in range(start, stop):
        c += (a & b[r2]) == 0
    return c


@njit(cache=True)
def _row_collect(a, b, start, stop, base, out, pos):
    # unconditional store, conditional advance: no branch in the loop
    for r2 in range(start, stop):
        out[pos] = base | r2
        pos += (a & b[r2]) == 0
    return pos


@njit(cache=True)
def scan_pairs_numba(seq1, seq2, target, g_lo, g_hi, d2):
    """Guess indices g = r1 << d2 | r2 in [g_lo, g_hi) with no forced-bit clash.

    A clash is a step where both R1 and R2 disagree with the target: the
    majority is then forced to the wrong value whatever R3 does.
    """
    b = seq2 ^ target
    cap = 1024
    hits = np.empty(cap, dtype=np.int64)
    count = 0
    n2 = np.int64(1) << d2
    r1_lo = g_lo >> d2
    r1_hi = (g_hi - 1) >> d2
    for r1 in range(r1_lo, r1_hi + 1):
        a = seq1[r1] ^ target
        base = np.int64(r1) << d2
        start = g_lo - base if r1 == r1_lo else 0
        stop = g_hi - base if r1 == r1_hi else n2
        # branch-free pass first so the common (no hit) row vectorizes
        c = _row_count(a, b, start, stop)
        if c == 0:
            continue
        if count + c + 1 > cap:
            cap = max(2 * cap, count + c + 1)
            grown = np.empty(cap, dtype=np.int64)
            grown[:count] = hits[:count]
            hits = grown
        count = _row_collect(a, b, start, stop, base, hits, count)
    return hits[:count].copy()


# ---------------------------------------------------------------- numpy path


def _parity_np(x):
    return np.bitwise_count(x).astype(np.int64) & 1


def sco_batch_numpy(keys, degrees, masks, n):
    keys = np.asarray(keys, dtype=np.int64)
    d1, d2, d3 = (int(d) for d in degrees)
    m1, m2, m3 = (np.int64(m) for m in masks)
    s1 = keys & ((1 << d1) - 1)
    s2 = (keys >> d1) & ((1 << d2) - 1)
    s3 = keys >> (d1 + d2)
    chunk = np.zeros_like(keys)
    for _ in range(int(n)):
        b1, b2, b3 = s1 & 1, s2 & 1, s3 & 1
        s1 = (s1 >> 1) | (_parity_np(s1 & m1) << (d1 - 1))
        s2 = (s2 >> 1) | (_parity_np(s2 & m2) << (d2 - 1))
        s3 = (s3 >> 1) | (_parity_np(s3 & m3) << (d3 - 1))
        chunk = (chunk << 1) | ((b1 & b2) | (b1 & b3) | (b2 & b3))
    return chunk


def register_sequences_numpy(degree, mask, n):
    degree = int(degree)
    s = np.arange(1 << degree, dtype=np.int64)
    seq = np.zeros_like(s)
    mask = np.int64(mask)
    for _ in range(int(n)):
        seq = (seq << 1) | (s & 1)
        s = (s >> 1) | (_parity_np(s & mask) << (degree - 1))
    return seq


def scan_pairs_numpy(seq1, seq2, target, g_lo, g_hi, d2):
    target = np.int64(target)
    b = seq2 ^ target
    n2 = 1 << int(d2)
    found = []
    for r1 in range(g_lo >> d2, ((g_hi - 1) >> d2) + 1):
        base = r1 << d2
        start = g_lo - base if base < g_lo else 0
        stop = min(g_hi - base, n2)
        ok = np.flatnonzero((b[start:stop] & (seq1[r1] ^ target)) == 0)
        if ok.size:
            found.append(ok.astype(np.int64) + (base + start))
    if not found:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(found)


# ---------------------------------------------------------------- dispatch


def sco_batch(keys, degrees, masks, n):
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    if _accel.USE_NUMBA:
        return sco_batch_numba(keys, np.asarray(degrees, dtype=np.int64),
                               np.asarray(masks, dtype=np.int64), np.int64(n))
    return sco_batch_numpy(keys, degrees, masks, n)


def register_sequences(degree, mask, n):
    if _accel.USE_NUMBA:
        return register_sequences_numba(np.int64(degree), np.int64(mask), np.int64(n))
    return register_sequences_numpy(degree, mask, n)


def scan_pairs(seq1, seq2, target, g_lo, g_hi, d2):
    if g_hi <= g_lo:
        return np.empty(0, dtype=np.int64)
    if _accel.USE_NUMBA:
        return scan_pairs_numba(seq1, seq2, np.int64(target), np.int64(g_lo),
                                np.int64(g_hi), np.int64(d2))
    return scan_pairs_numpy(seq1, seq2, target, g_lo, g_hi, d2)
