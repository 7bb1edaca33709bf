"""Graph-edit diversification operators: atom-level mutations and
fragment-recombining crossover.

All operators work on validated Molecules and return validated Molecules;
products that fail valence, connectivity, or the heavy-atom cap are
rejected and the caller retries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .molgraph import (Atom, Bond, Molecule, ParseError, allowed_valences)

__all__ = [
    "MutationKind",
    "MutationConfig",
    "OpStats",
    "MutationRejected",
    "CrossoverRejected",
    "mutate",
    "crossover",
    "diversify_batch",
    "applicable_instances",
    "apply_instance",
]


class MutationKind(enum.Enum):
    APPEND_ATOM = "append_atom"
    INSERT_ATOM = "insert_atom"
    CHANGE_BOND_ORDER = "change_bond_order"
    ADD_RING_BOND = "add_ring_bond"
    REMOVE_RING_BOND = "remove_ring_bond"
    BRIDGE_BICYCLIC = "bridge_bicyclic"


@dataclass
class MutationConfig:
    weights: dict = field(default_factory=lambda: {k: 1.0 for k in MutationKind})
    atom_alphabet: tuple[str, ...] = ("C", "N", "O")
    max_heavy_atoms: int = 22
    ring_size_min: int = 3
    ring_size_max: int = 6
    max_bridge_len: int = 2
    p_cross: float = 0.5
    retry_budget: int = 10
    fallback_to_mutation: bool = True


@dataclass
class OpStats:
    """attempted == succeeded + rejected_valence + rejected_not_amine."""

    attempted: int = 0
    succeeded: int = 0
    rejected_valence: int = 0
    rejected_not_amine: int = 0


class MutationRejected(ValueError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason  # no_applicable_site | valence


class CrossoverRejected(ValueError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason  # no_cut_bond | valence


def _free_valence(mol: Molecule, i: int) -> int:
    """Bond order headroom before the atom exceeds its largest valence."""
    atom = mol.atoms[i]
    allowed = allowed_valences(atom.element, atom.charge)
    total = mol.bond_order_sum(i) + atom.explicit_h_count
    if atom.bracket or atom.explicit_h is not None:
        # explicit H counts are frozen; a new bond must land on an allowed
        # valence exactly
        return max((v - total for v in allowed if v >= total), default=0)
    return max(allowed) - total


def _graph_distances(mol: Molecule, start: int) -> list[int]:
    dist = [-1] * mol.n_atoms()
    dist[start] = 0
    queue = [start]
    while queue:
        nxt = []
        for u in queue:
            for v in mol.neighbors[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        queue = nxt
    return dist


def applicable_instances(mol: Molecule, kind: MutationKind,
                         config: MutationConfig) -> list[tuple]:
    """Enumerate the concrete applications of one mutation kind."""
    out: list[tuple] = []
    n = mol.n_atoms()
    if kind is MutationKind.APPEND_ATOM:
        if n >= config.max_heavy_atoms:
            return []
        for i in range(n):
            if _free_valence(mol, i) >= 1:
                for el in config.atom_alphabet:
                    out.append((i, el))
    elif kind is MutationKind.INSERT_ATOM:
        if n >= config.max_heavy_atoms:
            return []
        for idx, bond in enumerate(mol.bonds):
            if bond.order == 1:
                for el in config.atom_alphabet:
                    out.append((idx, el))
    elif kind is MutationKind.CHANGE_BOND_ORDER:
        for idx, bond in enumerate(mol.bonds):
            for new_order in (1, 2, 3):
                if new_order == bond.order:
                    continue
                delta = new_order - bond.order
                if delta > 0 and (min(_free_valence(mol, bond.a),
                                      _free_valence(mol, bond.b)) < delta):
                    continue
                out.append((idx, new_order))
    elif kind is MutationKind.ADD_RING_BOND:
        lo = config.ring_size_min - 1
        hi = config.ring_size_max - 1
        for u in range(n):
            if _free_valence(mol, u) < 1:
                continue
            dist = _graph_distances(mol, u)
            for v in range(u + 1, n):
                if lo <= dist[v] <= hi and _free_valence(mol, v) >= 1:
                    out.append((u, v))
    elif kind is MutationKind.REMOVE_RING_BOND:
        for idx, is_ring in enumerate(mol.ring_bond_flags):
            if is_ring:
                out.append((idx,))
    elif kind is MutationKind.BRIDGE_BICYCLIC:
        if n >= config.max_heavy_atoms:
            return []
        for r_idx, ring in enumerate(mol.rings):
            members = sorted(ring)
            for ai in range(len(members)):
                for bi in range(ai + 1, len(members)):
                    u, v = members[ai], members[bi]
                    if v in mol.neighbors[u]:
                        continue
                    if _free_valence(mol, u) < 1 or _free_valence(mol, v) < 1:
                        continue
                    for length in range(1, config.max_bridge_len + 1):
                        if n + length > config.max_heavy_atoms:
                            continue
                        out.append((u, v, length))
    return out


def apply_instance(mol: Molecule, kind: MutationKind, instance: tuple,
                   config: MutationConfig, rng) -> Molecule:
    """Apply one enumerated instance; raises MutationRejected on invalid
    products."""
    atoms, bonds = mol.to_graph()
    if kind is MutationKind.APPEND_ATOM:
        i, el = instance
        atoms.append(Atom(el))
        bonds.append(Bond(i, len(atoms) - 1, 1))
    elif kind is MutationKind.INSERT_ATOM:
        idx, el = instance
        old = bonds.pop(idx)
        atoms.append(Atom(el))
        x = len(atoms) - 1
        bonds.append(Bond(old.a, x, 1))
        bonds.append(Bond(x, old.b, 1))
    elif kind is MutationKind.CHANGE_BOND_ORDER:
        idx, new_order = instance
        bonds[idx] = replace(bonds[idx], order=new_order)
    elif kind is MutationKind.ADD_RING_BOND:
        u, v = instance
        bonds.append(Bond(u, v, 1))
    elif kind is MutationKind.REMOVE_RING_BOND:
        (idx,) = instance
        bonds.pop(idx)
    elif kind is MutationKind.BRIDGE_BICYCLIC:
        u, v, length = instance
        prev = u
        for _ in range(length):
            atoms.append(Atom(rng.choice(config.atom_alphabet)))
            x = len(atoms) - 1
            bonds.append(Bond(prev, x, 1))
            prev = x
        bonds.append(Bond(prev, v, 1))
    else:  # pragma: no cover
        raise ValueError(kind)
    if len(atoms) > config.max_heavy_atoms:
        raise MutationRejected("valence")
    try:
        return Molecule.from_graph(atoms, bonds)
    except ParseError as exc:
        raise MutationRejected("valence") from exc


def mutate(mol: Molecule, rng, config: MutationConfig | None = None) -> Molecule:
    """Pick a mutation kind by weight, apply one random applicable instance.

    Raises MutationRejected("no_applicable_site") when the chosen kind has
    no application, MutationRejected("valence") on invalid products.
    """
    config = config or MutationConfig()
    kinds = [k for k in MutationKind if config.weights.get(k, 0.0) > 0]
    weights = [config.weights[k] for k in kinds]
    kind = rng.choices(kinds, weights=weights, k=1)[0]
    instances = applicable_instances(mol, kind, config)
    if not instances:
        raise MutationRejected("no_applicable_site")
    instance = instances[rng.randrange(len(instances))]
    return apply_instance(mol, kind, instance, config, rng)


def _fragments_after_cut(mol: Molecule, bond_idx: int):
    """Atom index sets of the two components created by cutting a bond."""
    bond = mol.bonds[bond_idx]
    seen = {bond.a}
    stack = [bond.a]
    while stack:
        u = stack.pop()
        for v in mol.neighbors[u]:
            if (u, v) in ((bond.a, bond.b), (bond.b, bond.a)):
                continue
            if v not in seen:
                seen.add(v)
                stack.append(v)
    side_a = seen
    side_b = set(range(mol.n_atoms())) - side_a
    return side_a, side_b


def _extract_fragment(mol: Molecule, atom_set, attach: int):
    """Copy a fragment's atoms/bonds; returns (atoms, bonds, new_attach)."""
    order = sorted(atom_set)
    remap = {old: new for new, old in enumerate(order)}
    atoms = [mol.atoms[i] for i in order]
    bonds = [Bond(remap[b.a], remap[b.b], b.order) for b in mol.bonds
             if b.a in remap and b.b in remap]
    return atoms, bonds, remap[attach]


def _cut_bonds(mol: Molecule) -> list[int]:
    return [idx for idx, bond in enumerate(mol.bonds)
            if bond.order == 1 and not mol.ring_bond_flags[idx]]


def crossover(a: Molecule, b: Molecule, rng,
              config: MutationConfig | None = None) -> Molecule:
    """Cut one acyclic single bond in each parent and join one fragment of
    each with a new single bond at the cut attachment points."""
    config = config or MutationConfig()
    cuts_a = _cut_bonds(a)
    cuts_b = _cut_bonds(b)
    if not cuts_a or not cuts_b:
        raise CrossoverRejected("no_cut_bond")
    bond_a = a.bonds[cuts_a[rng.randrange(len(cuts_a))]]
    bond_b = b.bonds[cuts_b[rng.randrange(len(cuts_b))]]
    idx_a = a.bonds.index(bond_a)
    idx_b = b.bonds.index(bond_b)
    sides_a = _fragments_after_cut(a, idx_a)
    sides_b = _fragments_after_cut(b, idx_b)
    attach_a = bond_a.a if rng.random() < 0.5 else bond_a.b
    attach_b = bond_b.a if rng.random() < 0.5 else bond_b.b
    frag_a = sides_a[0] if attach_a in sides_a[0] else sides_a[1]
    frag_b = sides_b[0] if attach_b in sides_b[0] else sides_b[1]
    atoms_a, bonds_a, new_attach_a = _extract_fragment(a, frag_a, attach_a)
    atoms_b, bonds_b, new_attach_b = _extract_fragment(b, frag_b, attach_b)
    offset = len(atoms_a)
    atoms = atoms_a + atoms_b
    bonds = bonds_a + [Bond(x.a + offset, x.b + offset, x.order) for x in bonds_b]
    bonds.append(Bond(new_attach_a, new_attach_b + offset, 1))
    if len(atoms) > config.max_heavy_atoms:
        raise CrossoverRejected("valence")
    try:
        return Molecule.from_graph(atoms, bonds)
    except ParseError as exc:
        raise CrossoverRejected("valence") from exc


def diversify_batch(pool, n: int, rng, config: MutationConfig | None = None,
                    accept=None, stats: OpStats | None = None) -> list[Molecule]:
    """Produce up to n offspring from a parent pool.

    Each offspring slot tries crossover with probability p_cross, else
    mutation, retrying up to the retry budget; crossover failures fall
    back to mutation when configured.  ``accept``, when given, filters
    offspring (e.g. the amine gate) and its rejections are counted as
    rejected_not_amine.
    """
    config = config or MutationConfig()
    pool = list(pool)
    if not pool:
        return []
    out = []
    stats = stats if stats is not None else OpStats()
    for _ in range(n):
        produced = None
        for attempt in range(config.retry_budget):
            stats.attempted += 1
            use_cross = rng.random() < config.p_cross
            try:
                if use_cross:
                    pa = pool[rng.randrange(len(pool))]
                    pb = pool[rng.randrange(len(pool))]
                    try:
                        candidate = crossover(pa, pb, rng, config)
                    except CrossoverRejected:
                        if not config.fallback_to_mutation:
                            raise
                        candidate = mutate(pool[rng.randrange(len(pool))],
                                           rng, config)
                else:
                    candidate = mutate(pool[rng.randrange(len(pool))], rng, config)
            except (MutationRejected, CrossoverRejected):
                stats.rejected_valence += 1
                continue
            if accept is not None and not accept(candidate):
                stats.rejected_not_amine += 1
                continue
            stats.succeeded += 1
            produced = candidate
            break
        if produced is not None:
            out.append(produced)
    return out
