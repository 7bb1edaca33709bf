"""Shared test utilities: systematic molecule enumeration and corpora."""

from __future__ import annotations

import itertools
import random

from aminegen.chemclass import AmineType, classify_amine
from aminegen.genops import (MutationConfig, MutationKind, applicable_instances,
                             apply_instance, MutationRejected)
from aminegen.molgraph import (Atom, Bond, Molecule, ParseError,
                               canonical_smiles)


def enumerate_trees(max_atoms: int, elements=("C", "N", "O")) -> dict[str, Molecule]:
    """All distinct single-bond trees up to max_atoms, keyed by canonical
    SMILES (grown by attaching one atom at a time, deduplicated)."""
    current: dict[str, Molecule] = {}
    for el in elements:
        mol = Molecule.from_graph([Atom(el)], [])
        current[canonical_smiles(mol)] = mol
    out = dict(current)
    for _ in range(max_atoms - 1):
        nxt: dict[str, Molecule] = {}
        for parent in current.values():
            atoms, bonds = parent.to_graph()
            for j in range(len(atoms)):
                for el in elements:
                    try:
                        child = Molecule.from_graph(
                            atoms + [Atom(el)],
                            bonds + [Bond(j, len(atoms), 1)])
                    except ParseError:
                        continue
                    key = canonical_smiles(child)
                    if key not in nxt:
                        nxt[key] = child
        out.update(nxt)
        current = nxt
    return out


def ring_variants(mols, config: MutationConfig | None = None) -> dict[str, Molecule]:
    """Every distinct single ring closure of the given molecules."""
    config = config or MutationConfig()
    rng = random.Random(0)
    out: dict[str, Molecule] = {}
    for mol in mols:
        for inst in applicable_instances(mol, MutationKind.ADD_RING_BOND, config):
            try:
                child = apply_instance(mol, MutationKind.ADD_RING_BOND, inst,
                                       config, rng)
            except MutationRejected:
                continue
            key = canonical_smiles(child)
            if key not in out:
                out[key] = child
    return out


def amine_only(mols: dict[str, Molecule]) -> dict[str, Molecule]:
    return {c: m for c, m in mols.items()
            if classify_amine(m) is not AmineType.NOT_AMINE}


def random_chain_corpus(n: int, max_len: int = 60, seed: int = 0) -> list[Molecule]:
    """Distinct random C/N/O chains with lengths 2..max_len; heteroatoms
    only follow carbon, which keeps every chain valence-clean."""
    from aminegen.molgraph import parse_smiles

    rng = random.Random(seed)
    seen: dict[str, Molecule] = {}
    while len(seen) < n:
        length = rng.randint(2, max_len)
        prev = "C"
        parts = []
        for _ in range(length):
            el = rng.choice(("C", "N", "O") if prev == "C" else ("C",))
            parts.append(el)
            prev = el
        try:
            mol = parse_smiles("".join(parts))
        except ParseError:
            continue
        seen.setdefault(canonical_smiles(mol), mol)
    return list(seen.values())


def c4h11no_universe() -> tuple[dict[str, Molecule], dict[str, Molecule]]:
    """(neutral isomers, charged zwitterion/N-oxide variants) of C4H11NO."""
    from aminegen.molgraph import format_formula, molecular_formula

    results: dict[str, Molecule] = {}

    def build(atoms, bonds, remaining):
        if not remaining:
            try:
                mol = Molecule.from_graph(atoms, bonds)
            except ParseError:
                return
            results.setdefault(canonical_smiles(mol), mol)
            return
        seen = set()
        for i, el in enumerate(remaining):
            if el in seen:
                continue
            seen.add(el)
            rest = remaining[:i] + remaining[i + 1:]
            for j in range(len(atoms)):
                build(atoms + [Atom(el)], bonds + [Bond(j, len(atoms), 1)], rest)

    labels = ["C"] * 4 + ["N", "O"]
    for i, el in enumerate(sorted(set(labels))):
        rest = list(labels)
        rest.remove(el)
        build([Atom(el)], [], rest)
    neutral = {c: m for c, m in results.items()
               if format_formula(molecular_formula(m)) == "C4H11NO"}

    # charged variants: skeletons over 6 carbons, then N+/O- relabeling
    skeletons = {c: m for c, m in enumerate_trees(6, elements=("C",)).items()
                 if m.n_atoms() == 6}
    charged: dict[str, Molecule] = {}
    for skel in skeletons.values():
        for ni, oi in itertools.permutations(range(6), 2):
            deg_n = len(skel.neighbors[ni])
            deg_o = len(skel.neighbors[oi])
            if deg_o != 1 or deg_n > 4:
                continue
            atoms, bonds = skel.to_graph()
            atoms[ni] = Atom("N", 1, 4 - deg_n, False, True)
            atoms[oi] = Atom("O", -1, 0, False, True)
            try:
                mol = Molecule.from_graph(atoms, bonds)
            except ParseError:
                continue
            if format_formula(molecular_formula(mol)) != "C4H11NO":
                continue
            charged.setdefault(canonical_smiles(mol), mol)
    return neutral, charged
