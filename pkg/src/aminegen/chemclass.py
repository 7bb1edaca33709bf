"""Amine detection and classification.

A nitrogen counts as an amine site when it is neutral, carries only
single bonds, was not written as an aromatic atom, and has no neighboring
carbon double-bonded to O or S.  This excludes amides, imines, nitriles,
nitro groups, aromatic nitrogens, and protonated/quaternary nitrogens.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .molgraph import Molecule

__all__ = [
    "AmineType",
    "Restriction",
    "AmineSite",
    "find_amine_sites",
    "classify_amine",
    "matches_restriction",
]


class AmineType(enum.Enum):
    PRIMARY = "primary"
    SECONDARY = "secondary"
    TERTIARY = "tertiary"
    CYCLIC = "cyclic"
    POLY = "poly"
    NOT_AMINE = "not_amine"


class Restriction(enum.Enum):
    PRIMARY_SECONDARY = "primary_secondary"
    TERTIARY_CYCLIC_POLY = "tertiary_cyclic_poly"
    NONE = "none"


@dataclass(frozen=True)
class AmineSite:
    atom_index: int
    h_count: int
    in_ring: bool


def find_amine_sites(mol: Molecule) -> list[AmineSite]:
    """All nitrogen atoms that qualify as amine nitrogens."""
    sites = []
    for i, atom in enumerate(mol.atoms):
        if atom.element != "N" or atom.charge != 0 or atom.aromatic:
            continue
        if mol.degree(i) == 0:
            continue  # ammonia / bare N is not an amine
        if any(mol.bond_order(i, j) != 1 for j in mol.neighbors[i]):
            continue
        carbonyl_like = False
        for j in mol.neighbors[i]:
            if mol.atoms[j].element != "C":
                continue
            for k in mol.neighbors[j]:
                if k == i:
                    continue
                if mol.atoms[k].element in ("O", "S") and mol.bond_order(j, k) == 2:
                    carbonyl_like = True
                    break
            if carbonyl_like:
                break
        if carbonyl_like:
            continue
        sites.append(AmineSite(i, mol.total_h(i), mol.ring_atom_flags[i]))
    return sites


def classify_amine(mol: Molecule) -> AmineType:
    """Classify by amine sites.  Precedence: no sites -> NOT_AMINE; any
    ring site -> CYCLIC; several acyclic sites -> POLY; one site by its
    hydrogen count."""
    sites = find_amine_sites(mol)
    if not sites:
        return AmineType.NOT_AMINE
    if any(s.in_ring for s in sites):
        return AmineType.CYCLIC
    if len(sites) >= 2:
        return AmineType.POLY
    h = sites[0].h_count
    if h >= 2:
        return AmineType.PRIMARY
    if h == 1:
        return AmineType.SECONDARY
    return AmineType.TERTIARY


def matches_restriction(amine_type: AmineType, restriction: Restriction) -> bool:
    if amine_type is AmineType.NOT_AMINE:
        raise ValueError("restriction check requires an amine")
    if restriction is Restriction.NONE:
        return True
    if restriction is Restriction.PRIMARY_SECONDARY:
        return amine_type in (AmineType.PRIMARY, AmineType.SECONDARY)
    return amine_type in (AmineType.TERTIARY, AmineType.CYCLIC, AmineType.POLY)
