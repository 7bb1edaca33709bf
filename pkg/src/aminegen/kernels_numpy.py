"""Pure-numpy similarity kernels over packed uint64 fingerprints.

Fallback path for environments without numba; selected explicitly with
AMINEGEN_KERNELS=numpy.  All functions take fingerprints packed as rows
of uint64 words (width/64 words per fingerprint).
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words)


def tanimoto_pair(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.bitwise_count(a & b).sum())
    union = int(np.bitwise_count(a | b).sum())
    if union == 0:
        return 1.0
    return inter / union


def sims_one_to_many(query: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """Tanimoto of one fingerprint against every row of ``mat``."""
    inter = np.bitwise_count(mat & query).sum(axis=1, dtype=np.int64)
    union = np.bitwise_count(mat | query).sum(axis=1, dtype=np.int64)
    out = np.ones(len(mat), dtype=np.float64)
    nz = union > 0
    out[nz] = inter[nz] / union[nz]
    return out


def max_sims_to_targets(mat: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per row of ``mat``, the maximum Tanimoto over all target rows."""
    best = np.zeros(len(mat), dtype=np.float64)
    for t in range(len(targets)):
        np.maximum(best, sims_one_to_many(targets[t], mat), out=best)
    return best


def sphere_exclusion_count(mat: np.ndarray, threshold: float) -> int:
    """Greedy leader scan in row order: a row becomes a center when its
    similarity to every existing center is below the threshold."""
    if len(mat) == 0:
        return 0
    centers = np.empty_like(mat[:1], shape=(len(mat), mat.shape[1]))
    centers[0] = mat[0]
    n_centers = 1
    for i in range(1, len(mat)):
        sims = sims_one_to_many(mat[i], centers[:n_centers])
        if np.all(sims < threshold):
            centers[n_centers] = mat[i]
            n_centers += 1
    return n_centers
