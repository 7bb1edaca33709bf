"""Hashed circular fingerprints, Tanimoto similarity, and sphere-exclusion
diversity.

Atom environments of radius 0..3 are hashed with 64-bit FNV-1a over their
invariant tuples and folded into a fixed-width bit vector (1024 bits by
default, the "diameter 6" setting).  Identical circular environments set
the same bit regardless of input atom ordering.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .molgraph import Molecule

__all__ = [
    "FingerprintBits",
    "ecfp",
    "tanimoto",
    "pack_matrix",
    "bulk_sims",
    "max_sims",
    "sphere_exclusion_diversity",
    "WidthMismatchError",
    "EmptyInputError",
]

DEFAULT_WIDTH = 1024
DEFAULT_RADIUS = 3

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class WidthMismatchError(ValueError):
    pass


class EmptyInputError(ValueError):
    pass


def _fnv64(values) -> int:
    """FNV-1a over a sequence of ints, each serialized as 8 LE bytes."""
    h = _FNV_OFFSET
    for v in values:
        for b in int(v & _MASK64).to_bytes(8, "little"):
            h ^= b
            h = (h * _FNV_PRIME) & _MASK64
    return h


_ELEMENT_CODE = {el: i for i, el in enumerate(
    ("H", "B", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I"))}


@dataclass(frozen=True)
class FingerprintBits:
    """Fixed-width bit vector packed into uint64 words."""

    words: np.ndarray  # shape (width // 64,), dtype uint64, read-only
    width: int
    popcount: int = field(default=0)

    @classmethod
    def from_bit_ids(cls, bit_ids, width: int) -> "FingerprintBits":
        words = np.zeros(width // 64, dtype=np.uint64)
        for bit in bit_ids:
            words[bit >> 6] |= np.uint64(1) << np.uint64(bit & 63)
        words.setflags(write=False)
        pop = int(np.bitwise_count(words).sum())
        return cls(words, width, pop)

    def bit_ids(self) -> list[int]:
        out = []
        for w, word in enumerate(self.words):
            word = int(word)
            while word:
                low = word & -word
                out.append(w * 64 + low.bit_length() - 1)
                word ^= low
        return out

    def hex(self) -> str:
        return "".join(f"{int(w):016x}" for w in self.words)


def _invariants(mol: Molecule) -> list[int]:
    ids = []
    for i, atom in enumerate(mol.atoms):
        ids.append(_fnv64((
            _ELEMENT_CODE[atom.element],
            mol.degree(i),
            mol.total_h(i),
            atom.charge & _MASK64,
            1 if mol.ring_atom_flags[i] else 0,
        )))
    return ids


def ecfp(mol: Molecule, radius: int = DEFAULT_RADIUS,
         width: int = DEFAULT_WIDTH) -> FingerprintBits:
    """Extended-connectivity fingerprint over circular neighborhoods of
    radius 0..radius, folded into ``width`` bits."""
    if width % 64 != 0 or width <= 0:
        raise ValueError("width must be a positive multiple of 64")
    ids = _invariants(mol)
    all_ids = list(ids)
    for r in range(1, radius + 1):
        nxt = []
        for i in range(mol.n_atoms()):
            parts = [r, ids[i]]
            for order, nid in sorted(
                    (mol.bond_order(i, j), ids[j]) for j in mol.neighbors[i]):
                parts.append(order)
                parts.append(nid)
            nxt.append(_fnv64(parts))
        ids = nxt
        all_ids.extend(ids)
    return FingerprintBits.from_bit_ids({h % width for h in all_ids}, width)


def tanimoto(a: FingerprintBits, b: FingerprintBits) -> float:
    """|a AND b| / |a OR b|; defined as 1.0 when both are empty."""
    if a.width != b.width:
        raise WidthMismatchError(f"widths differ: {a.width} vs {b.width}")
    return kernels.tanimoto_pair(a.words, b.words)


def pack_matrix(fps) -> np.ndarray:
    """Stack fingerprints into one (n, words) uint64 matrix for the kernels."""
    fps = list(fps)
    if not fps:
        raise EmptyInputError("no fingerprints")
    width = fps[0].width
    for fp in fps:
        if fp.width != width:
            raise WidthMismatchError("mixed widths in fingerprint batch")
    return np.stack([fp.words for fp in fps])


def bulk_sims(query: FingerprintBits, fps) -> np.ndarray:
    """Tanimoto of one query fingerprint against a batch."""
    return kernels.sims_one_to_many(query.words, pack_matrix(fps))


def max_sims(fps, targets) -> np.ndarray:
    """Per fingerprint, the maximum Tanimoto over the target batch."""
    return kernels.max_sims_to_targets(pack_matrix(fps), pack_matrix(targets))


def sphere_exclusion_diversity(mols, threshold: float = 0.65,
                               sample: int | None = None,
                               rng: random.Random | None = None,
                               radius: int = DEFAULT_RADIUS,
                               width: int = DEFAULT_WIDTH) -> float:
    """Fraction of a random sample selected as mutually dissimilar centers.

    A sampled molecule becomes a center when its Tanimoto to every
    existing center is below the threshold; the scan order is the sample
    order.  ``mols`` may be Molecules or precomputed FingerprintBits.
    """
    mols = list(mols)
    if not mols:
        raise EmptyInputError("sphere exclusion over empty input")
    if sample is None:
        sample = min(1000, len(mols))
    if sample > len(mols):
        raise ValueError("sample larger than input")
    rng = rng or random.Random(0)
    picked = rng.sample(range(len(mols)), sample)
    fps = []
    for idx in picked:
        item = mols[idx]
        if isinstance(item, FingerprintBits):
            fps.append(item)
        else:
            fps.append(ecfp(item, radius, width))
    centers = kernels.sphere_exclusion_count(pack_matrix(fps), threshold)
    return centers / sample
