"""Numba-compiled similarity kernels over packed uint64 fingerprints.

Same contracts as kernels_numpy; results are bit-identical.  The popcount
is the 64-bit SWAR reduction, since numba does not expose a vectorized
bit count.
"""

from __future__ import annotations

import numpy as np
from numba import njit

BACKEND = "numba"

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_ONE = np.uint64(1)
_TWO = np.uint64(2)
_FOUR = np.uint64(4)
_S56 = np.uint64(56)


@njit(cache=True, nogil=True, inline="always")
def _popcnt64(x):
    x = x - ((x >> _ONE) & _M1)
    x = (x & _M2) + ((x >> _TWO) & _M2)
    x = (x + (x >> _FOUR)) & _M4
    return (x * _H01) >> _S56


@njit(cache=True, nogil=True)
def popcount(words):
    out = np.empty(words.shape, dtype=np.uint64)
    flat_in = words.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        flat_out[i] = _popcnt64(flat_in[i])
    return out


@njit(cache=True, nogil=True)
def tanimoto_pair(a, b):
    inter = np.uint64(0)
    union = np.uint64(0)
    for w in range(a.size):
        inter += _popcnt64(a[w] & b[w])
        union += _popcnt64(a[w] | b[w])
    if union == np.uint64(0):
        return 1.0
    return float(inter) / float(union)


@njit(cache=True, nogil=True)
def sims_one_to_many(query, mat):
    n = mat.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        inter = np.uint64(0)
        union = np.uint64(0)
        for w in range(mat.shape[1]):
            inter += _popcnt64(mat[i, w] & query[w])
            union += _popcnt64(mat[i, w] | query[w])
        if union == np.uint64(0):
            out[i] = 1.0
        else:
            out[i] = float(inter) / float(union)
    return out


@njit(cache=True, nogil=True)
def max_sims_to_targets(mat, targets):
    n = mat.shape[0]
    best = np.zeros(n, dtype=np.float64)
    for i in range(n):
        for t in range(targets.shape[0]):
            inter = np.uint64(0)
            union = np.uint64(0)
            for w in range(mat.shape[1]):
                inter += _popcnt64(mat[i, w] & targets[t, w])
                union += _popcnt64(mat[i, w] | targets[t, w])
            if union == np.uint64(0):
                sim = 1.0
            else:
                sim = float(inter) / float(union)
            if sim > best[i]:
                best[i] = sim
    return best


@njit(cache=True, nogil=True)
def sphere_exclusion_count(mat, threshold):
    n = mat.shape[0]
    if n == 0:
        return 0
    width = mat.shape[1]
    center_idx = np.empty(n, dtype=np.int64)
    center_idx[0] = 0
    n_centers = 1
    for i in range(1, n):
        is_center = True
        for c in range(n_centers):
            j = center_idx[c]
            inter = np.uint64(0)
            union = np.uint64(0)
            for w in range(width):
                inter += _popcnt64(mat[i, w] & mat[j, w])
                union += _popcnt64(mat[i, w] | mat[j, w])
            if union == np.uint64(0):
                sim = 1.0
            else:
                sim = float(inter) / float(union)
            if sim >= threshold:
                is_center = False
                break
        if is_center:
            center_idx[n_centers] = i
            n_centers += 1
    return n_centers
