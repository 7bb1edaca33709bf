"""SMILES parsing, molecular graphs, valence checking, and canonical output.

Supports the organic subset plus bracket atoms with charge and explicit
hydrogens.  Aromatic (lowercase) input is kekulized on parse; canonical
SMILES are always written kekulized.  Stereo markers are accepted and
discarded.  Multi-fragment input ('.') is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "Atom",
    "Bond",
    "Molecule",
    "ParseError",
    "parse_smiles",
    "canonical_smiles",
    "random_smiles",
    "molecular_formula",
    "format_formula",
    "parse_formula",
    "molecular_weight",
    "perceive_rings",
    "is_radical_free",
    "read_smiles_file",
    "SUPPORTED_ELEMENTS",
]

# Allowed total valences per element.  A formal charge shifts the allowed
# valence by +charge for N and O only (e.g. [NH4+] -> 4, [O-] -> 1).
VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
    "H": (1,),
}

SUPPORTED_ELEMENTS = frozenset(VALENCES)
ORGANIC_SUBSET = frozenset({"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"})
AROMATIC_OK = frozenset({"b", "c", "n", "o", "p", "s"})

# Standard atomic masses, 4 decimal places.
ATOMIC_MASSES = {
    "H": 1.0080,
    "B": 10.8110,
    "C": 12.0110,
    "N": 14.0070,
    "O": 15.9990,
    "F": 18.9984,
    "P": 30.9738,
    "S": 32.0600,
    "Cl": 35.4530,
    "Br": 79.9040,
    "I": 126.9045,
}

BOND_SYMBOLS = {"-": 1, "=": 2, "#": 3, ":": 1}


class ParseError(ValueError):
    """SMILES rejection; ``kind`` is one of syntax, valence, disconnected,
    unsupported_element, ring_closure."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def allowed_valences(element: str, charge: int) -> tuple[int, ...]:
    base = VALENCES[element]
    if charge != 0 and element in ("N", "O"):
        return tuple(v + charge for v in base if v + charge >= 0)
    return base


@dataclass(frozen=True)
class Atom:
    """One heavy atom.  ``explicit_h`` is None unless the atom was written
    in brackets (or had [H] neighbors folded into it)."""

    element: str
    charge: int = 0
    explicit_h: int | None = None
    aromatic: bool = False
    bracket: bool = False

    @property
    def explicit_h_count(self) -> int:
        return self.explicit_h or 0


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: int = 1

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a


class Molecule:
    """Immutable molecular graph with computed implicit hydrogens and rings.

    Do not mutate after construction; genops builds edited copies through
    :meth:`from_graph`, which re-runs the full validation.
    """

    __slots__ = (
        "atoms",
        "bonds",
        "implicit_h",
        "rings",
        "neighbors",
        "ring_bond_flags",
        "ring_atom_flags",
        "radical_flags",
        "_bond_order",
        "_canonical",
    )

    def __init__(self, atoms, bonds, implicit_h, rings, neighbors,
                 ring_bond_flags, ring_atom_flags, radical_flags):
        self.atoms: tuple[Atom, ...] = atoms
        self.bonds: tuple[Bond, ...] = bonds
        self.implicit_h: tuple[int, ...] = implicit_h
        self.rings: tuple[frozenset[int], ...] = rings
        self.neighbors: tuple[tuple[int, ...], ...] = neighbors
        self.ring_bond_flags: tuple[bool, ...] = ring_bond_flags
        self.ring_atom_flags: tuple[bool, ...] = ring_atom_flags
        self.radical_flags: tuple[bool, ...] = radical_flags
        self._bond_order = {}
        for bond in bonds:
            key = (bond.a, bond.b) if bond.a < bond.b else (bond.b, bond.a)
            self._bond_order[key] = bond.order
        self._canonical: str | None = None

    @classmethod
    def from_graph(cls, atoms, bonds, allow_radicals: bool = False) -> "Molecule":
        """Validate a raw (atoms, bonds) graph and build a Molecule.

        Raises ParseError on valence violations, duplicate/self bonds,
        disconnection, or unsupported elements.
        """
        atoms = tuple(atoms)
        bonds = tuple(bonds)
        if not atoms:
            raise ParseError("syntax", "empty molecule")
        for atom in atoms:
            if atom.element not in SUPPORTED_ELEMENTS:
                raise ParseError("unsupported_element",
                                 f"unsupported element {atom.element!r}")
            if atom.element == "H":
                raise ParseError("syntax", "bare hydrogen atom in graph")
        n = len(atoms)
        seen_pairs = set()
        adj: list[list[int]] = [[] for _ in range(n)]
        for bond in bonds:
            if bond.a == bond.b:
                raise ParseError("syntax", "self bond")
            if not (0 <= bond.a < n and 0 <= bond.b < n):
                raise ParseError("syntax", "bond endpoint out of range")
            key = (min(bond.a, bond.b), max(bond.a, bond.b))
            if key in seen_pairs:
                raise ParseError("syntax", f"duplicate bond {key}")
            seen_pairs.add(key)
            adj[bond.a].append(bond.b)
            adj[bond.b].append(bond.a)
        _check_connected(n, adj)

        bond_sums = [0] * n
        for bond in bonds:
            bond_sums[bond.a] += bond.order
            bond_sums[bond.b] += bond.order

        implicit = [0] * n
        radical = [False] * n
        for i, atom in enumerate(atoms):
            allowed = allowed_valences(atom.element, atom.charge)
            if not allowed:
                raise ParseError("valence",
                                 f"no allowed valence for {atom.element}{atom.charge:+d}")
            total = bond_sums[i] + atom.explicit_h_count
            if atom.bracket or atom.explicit_h is not None:
                if total in allowed:
                    continue
                if total < min(allowed):
                    if allow_radicals:
                        radical[i] = True
                        continue
                    raise ParseError(
                        "valence",
                        f"atom {i} ({atom.element}) is a radical: "
                        f"valence {total} below {min(allowed)}")
                raise ParseError(
                    "valence",
                    f"atom {i} ({atom.element}) valence {total} not in {allowed}")
            else:
                fill = None
                for v in allowed:
                    if v >= total:
                        fill = v - total
                        break
                if fill is None:
                    raise ParseError(
                        "valence",
                        f"atom {i} ({atom.element}) valence {total} exceeds {max(allowed)}")
                implicit[i] = fill

        ring_bonds = _ring_bond_flags(n, bonds, adj)
        ring_atoms = [False] * n
        for flag, bond in zip(ring_bonds, bonds):
            if flag:
                ring_atoms[bond.a] = True
                ring_atoms[bond.b] = True
        rings = _sssr(n, bonds, adj, ring_bonds)

        neighbors = tuple(tuple(sorted(a)) for a in adj)
        return cls(atoms, bonds, tuple(implicit), tuple(rings), neighbors,
                   tuple(ring_bonds), tuple(ring_atoms), tuple(radical))

    # -- convenience accessors -------------------------------------------

    def n_atoms(self) -> int:
        return len(self.atoms)

    def total_h(self, i: int) -> int:
        return self.implicit_h[i] + self.atoms[i].explicit_h_count

    def bond_order(self, i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        return self._bond_order[key]

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def bond_order_sum(self, i: int) -> int:
        return sum(self.bond_order(i, j) for j in self.neighbors[i])

    def in_ring(self, i: int) -> bool:
        return self.ring_atom_flags[i]

    def has_radical(self) -> bool:
        return any(self.radical_flags)

    def to_graph(self) -> tuple[list[Atom], list[Bond]]:
        """Mutable copies of the atom and bond lists, for graph editing."""
        return list(self.atoms), list(self.bonds)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Molecule({canonical_smiles(self)!r})"


def _check_connected(n: int, adj) -> None:
    if n == 0:
        raise ParseError("syntax", "empty molecule")
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    if count != n:
        raise ParseError("disconnected", "molecular graph is not connected")


def _ring_bond_flags(n: int, bonds, adj) -> list[bool]:
    """A bond is a ring bond iff its removal keeps the endpoints connected."""
    flags = []
    for bond in bonds:
        seen = [False] * n
        seen[bond.a] = True
        stack = [bond.a]
        found = False
        while stack and not found:
            u = stack.pop()
            for v in adj[u]:
                if u == bond.a and v == bond.b:
                    continue
                if u == bond.b and v == bond.a:
                    continue
                if not seen[v]:
                    if v == bond.b:
                        found = True
                        break
                    seen[v] = True
                    stack.append(v)
        flags.append(found)
    return flags


def _shortest_cycle_through(bond_idx: int, bonds, adj) -> list[int] | None:
    """Smallest cycle containing the given bond, as a list of bond indices."""
    bond = bonds[bond_idx]
    # BFS from a to b avoiding the bond itself; parent chain gives the path.
    parent = {bond.a: (None, None)}
    queue = [bond.a]
    edge_of = {}
    for idx, b2 in enumerate(bonds):
        edge_of.setdefault((b2.a, b2.b), idx)
        edge_of.setdefault((b2.b, b2.a), idx)
    while queue:
        nxt = []
        for u in queue:
            for v in adj[u]:
                if u == bond.a and v == bond.b:
                    continue
                if v not in parent:
                    parent[v] = (u, edge_of[(u, v)])
                    if v == bond.b:
                        path = [bond_idx]
                        node = v
                        while parent[node][0] is not None:
                            path.append(parent[node][1])
                            node = parent[node][0]
                        return path
                    nxt.append(v)
        queue = nxt
    return None


def _sssr(n: int, bonds, adj, ring_bonds) -> list[frozenset[int]]:
    """Smallest set of smallest rings via per-edge shortest cycles plus
    GF(2) independence; ring count equals the cyclomatic number."""
    target = len(bonds) - n + 1
    if target <= 0:
        return []
    candidates = []
    for idx, is_ring in enumerate(ring_bonds):
        if not is_ring:
            continue
        cycle = _shortest_cycle_through(idx, bonds, adj)
        if cycle is not None:
            mask = 0
            for b in cycle:
                mask |= 1 << b
            candidates.append((len(cycle), mask))
    candidates.sort(key=lambda c: (c[0], c[1]))
    basis: list[int] = []
    rings: list[frozenset[int]] = []
    for _, mask in candidates:
        reduced = mask
        for b in basis:
            reduced = min(reduced, reduced ^ b)
        if reduced == 0:
            continue
        basis.append(reduced)
        basis.sort(reverse=True)
        atoms = set()
        for idx in range(len(bonds)):
            if mask >> idx & 1:
                atoms.add(bonds[idx].a)
                atoms.add(bonds[idx].b)
        rings.append(frozenset(atoms))
        if len(rings) == target:
            break
    rings.sort(key=lambda r: (len(r), sorted(r)))
    return rings


# -- parser ---------------------------------------------------------------


class _RawAtom:
    __slots__ = ("element", "charge", "explicit_h", "aromatic", "bracket")

    def __init__(self, element, charge=0, explicit_h=None, aromatic=False,
                 bracket=False):
        self.element = element
        self.charge = charge
        self.explicit_h = explicit_h
        self.aromatic = aromatic
        self.bracket = bracket


def _parse_bracket(text: str, pos: int) -> tuple[_RawAtom, int]:
    end = text.find("]", pos)
    if end < 0:
        raise ParseError("syntax", "unclosed bracket atom")
    body = text[pos + 1:end]
    if not body:
        raise ParseError("syntax", "empty bracket atom")
    i = 0
    if body[0].isdigit():
        raise ParseError("syntax", "isotope labels are not supported")
    # element symbol (one upper + optional lower, or a lone aromatic lower)
    if body[i].isupper():
        element = body[i]
        i += 1
        if i < len(body) and body[i].islower() and element + body[i] in SUPPORTED_ELEMENTS:
            element += body[i]
            i += 1
        aromatic = False
    elif body[i].islower():
        if body[i] not in AROMATIC_OK:
            raise ParseError("unsupported_element",
                             f"unsupported aromatic atom {body[i]!r}")
        element = body[i].upper()
        aromatic = True
        i += 1
    else:
        raise ParseError("syntax", f"bad bracket atom [{body}]")
    if element not in SUPPORTED_ELEMENTS:
        raise ParseError("unsupported_element", f"unsupported element {element!r}")
    # chirality markers: accepted and discarded
    while i < len(body) and body[i] == "@":
        i += 1
    explicit_h = 0
    if i < len(body) and body[i] == "H":
        i += 1
        digits = ""
        while i < len(body) and body[i].isdigit():
            digits += body[i]
            i += 1
        explicit_h = int(digits) if digits else 1
    charge = 0
    if i < len(body) and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        symbol = body[i]
        i += 1
        digits = ""
        while i < len(body) and body[i].isdigit():
            digits += body[i]
            i += 1
        if digits:
            charge = sign * int(digits)
        else:
            charge = sign
            while i < len(body) and body[i] == symbol:
                charge += sign
                i += 1
    if i != len(body):
        raise ParseError("syntax", f"trailing characters in bracket atom [{body}]")
    return _RawAtom(element, charge, explicit_h, aromatic, bracket=True), end + 1


def _parse_raw(text: str):
    """Tokenize and build the raw graph: atoms, bonds with aromatic marks."""
    if not text or not text.strip():
        raise ParseError("syntax", "empty SMILES")
    text = text.strip()
    atoms: list[_RawAtom] = []
    bonds: list[list] = []  # [a, b, order, aromatic_mark]
    prev: int | None = None
    pending: int | None = None  # explicit bond order for next bond
    pending_aromatic = False
    stack: list[int | None] = []
    ring_open: dict[int, tuple[int, int | None, bool]] = {}
    i = 0
    length = len(text)

    def add_bond(a: int, b: int, order: int | None, arom_symbol: bool):
        if a == b:
            raise ParseError("ring_closure", "ring bond to self")
        aromatic_pair = atoms[a].aromatic and atoms[b].aromatic
        if order is None:
            if arom_symbol or aromatic_pair:
                bonds.append([a, b, 1, True])
            else:
                bonds.append([a, b, 1, False])
        else:
            bonds.append([a, b, order, arom_symbol])

    while i < length:
        ch = text[i]
        if ch == ".":
            raise ParseError("disconnected", "multi-fragment SMILES rejected")
        if ch == "(":
            if prev is None:
                raise ParseError("syntax", "branch before any atom")
            stack.append(prev)
            i += 1
            continue
        if ch == ")":
            if not stack:
                raise ParseError("syntax", "unmatched ')'")
            prev = stack.pop()
            i += 1
            continue
        if ch in BOND_SYMBOLS:
            if pending is not None:
                raise ParseError("syntax", "two bond symbols in a row")
            pending = BOND_SYMBOLS[ch]
            pending_aromatic = ch == ":"
            i += 1
            continue
        if ch in "/\\":
            # stereo bond markers: treated as plain single bonds
            if pending is not None:
                raise ParseError("syntax", "two bond symbols in a row")
            pending = 1
            i += 1
            continue
        if ch.isdigit() or ch == "%":
            if prev is None:
                raise ParseError("ring_closure", "ring closure before any atom")
            if ch == "%":
                if i + 2 >= length or not text[i + 1:i + 3].isdigit():
                    raise ParseError("syntax", "bad %nn ring closure")
                num = int(text[i + 1:i + 3])
                i += 3
            else:
                num = int(ch)
                i += 1
            if num in ring_open:
                other, open_order, open_arom = ring_open.pop(num)
                order = pending if pending is not None else open_order
                if (pending is not None and open_order is not None
                        and pending != open_order):
                    raise ParseError("ring_closure",
                                     f"conflicting bond orders on ring closure {num}")
                add_bond(prev, other, order, pending_aromatic or open_arom)
            else:
                ring_open[num] = (prev, pending, pending_aromatic)
            pending = None
            pending_aromatic = False
            continue
        if ch == "[":
            atom, i = _parse_bracket(text, i)
        elif ch.isupper():
            element = ch
            if i + 1 < length and ch + text[i + 1] in ("Cl", "Br"):
                element = ch + text[i + 1]
                i += 2
            else:
                i += 1
            if element not in ORGANIC_SUBSET:
                raise ParseError("unsupported_element",
                                 f"unsupported element {element!r}")
            atom = _RawAtom(element)
        elif ch.islower():
            if ch not in AROMATIC_OK:
                raise ParseError("unsupported_element",
                                 f"unsupported aromatic atom {ch!r}")
            atom = _RawAtom(ch.upper(), aromatic=True)
            i += 1
        else:
            raise ParseError("syntax", f"unexpected character {ch!r}")
        atoms.append(atom)
        idx = len(atoms) - 1
        if prev is not None:
            add_bond(prev, idx, pending, pending_aromatic)
        elif pending is not None:
            raise ParseError("syntax", "bond symbol before first atom")
        prev = idx
        pending = None
        pending_aromatic = False

    if stack:
        raise ParseError("syntax", "unmatched '('")
    if ring_open:
        raise ParseError("ring_closure",
                         f"unmatched ring closure digits {sorted(ring_open)}")
    if pending is not None:
        raise ParseError("syntax", "dangling bond symbol")
    if not atoms:
        raise ParseError("syntax", "no atoms")
    return atoms, bonds


def _kekulize(atoms: list[_RawAtom], bonds: list[list]) -> None:
    """Assign alternating double bonds to aromatic ring systems in place.

    Raises ParseError when no valid assignment exists (exotic systems are
    out of scope)."""
    n = len(atoms)
    adj = [[] for _ in range(n)]
    for a, b, _, _ in bonds:
        adj[a].append(b)
        adj[b].append(a)
    ring_flags = _ring_bond_flags(
        n, [Bond(a, b, o) for a, b, o, _ in bonds], adj)

    aromatic_bond_idx = []
    for idx, bond in enumerate(bonds):
        if bond[3]:
            if ring_flags[idx]:
                aromatic_bond_idx.append(idx)
            else:
                bond[3] = False  # e.g. biaryl connection: plain single bond

    aromatic_atoms = {i for i, a in enumerate(atoms) if a.aromatic}
    covered = set()
    for idx in aromatic_bond_idx:
        covered.add(bonds[idx][0])
        covered.add(bonds[idx][1])
    if aromatic_atoms - covered:
        raise ParseError("syntax", "aromatic atom outside an aromatic ring")
    if not aromatic_bond_idx:
        return

    degree = [len(adj[i]) for i in range(n)]

    def needs_double(i: int) -> bool:
        atom = atoms[i]
        if not atom.aromatic:
            return False
        if atom.bracket:
            target = allowed_valences(atom.element, atom.charge)
            total = degree[i] + (atom.explicit_h or 0)
            return total < min(target) if target else False
        if atom.element == "C":
            return True
        if atom.element in ("N", "P"):
            return degree[i] == 2
        return False  # O, S, B: two single ring bonds satisfy them

    need = {i for i in aromatic_atoms if needs_double(i)}
    # perfect matching on `need` over aromatic ring bonds, by backtracking
    cand: dict[int, list[int]] = {i: [] for i in need}
    for idx in aromatic_bond_idx:
        a, b = bonds[idx][0], bonds[idx][1]
        if a in need and b in need:
            cand[a].append(idx)
            cand[b].append(idx)

    matched: dict[int, int] = {}
    chosen: list[int] = []

    def backtrack(remaining: list[int]) -> bool:
        if not remaining:
            return True
        i = remaining[0]
        if i in matched:
            return backtrack(remaining[1:])
        for idx in cand[i]:
            a, b = bonds[idx][0], bonds[idx][1]
            j = b if a == i else a
            if j in matched:
                continue
            matched[i] = idx
            matched[j] = idx
            chosen.append(idx)
            if backtrack(remaining[1:]):
                return True
            chosen.pop()
            del matched[i]
            del matched[j]
        return False

    order = sorted(need, key=lambda i: len(cand[i]))
    if not backtrack(order):
        raise ParseError("valence", "no valid Kekule assignment for aromatic ring")
    for idx in chosen:
        bonds[idx][2] = 2
    for idx in aromatic_bond_idx:
        bonds[idx][3] = False


def _fold_h_atoms(atoms: list[_RawAtom], bonds: list[list]):
    """Collapse explicit [H] atoms into their neighbor's hydrogen count."""
    h_idx = [i for i, a in enumerate(atoms) if a.element == "H"]
    if not h_idx:
        return atoms, bonds
    incident: dict[int, list[int]] = {i: [] for i in h_idx}
    for k, (a, b, order, _) in enumerate(bonds):
        if a in incident:
            incident[a].append(k)
        if b in incident:
            incident[b].append(k)
    for i in h_idx:
        atom = atoms[i]
        if atom.charge != 0 or (atom.explicit_h or 0) != 0 or len(incident[i]) != 1:
            raise ParseError("syntax", "unsupported explicit hydrogen usage")
        k = incident[i][0]
        a, b, order, _ = bonds[k]
        if order != 1:
            raise ParseError("valence", "multiple bond to hydrogen")
        j = b if a == i else a
        if atoms[j].element == "H":
            raise ParseError("syntax", "H-H bond not supported")
        atoms[j].explicit_h = (atoms[j].explicit_h or 0) + 1
    keep = [i for i in range(len(atoms)) if i not in set(h_idx)]
    remap = {old: new for new, old in enumerate(keep)}
    new_atoms = [atoms[i] for i in keep]
    new_bonds = []
    for a, b, order, arom in bonds:
        if a in remap and b in remap:
            new_bonds.append([remap[a], remap[b], order, arom])
    return new_atoms, new_bonds


def parse_smiles(text: str, allow_radicals: bool = False) -> Molecule:
    """Parse SMILES text into a validated Molecule.

    With ``allow_radicals`` the electron-deficient bracket atoms (e.g.
    [CH3]) are kept and flagged instead of rejected, so callers can count
    radical structures separately via :func:`is_radical_free`.
    """
    raw_atoms, raw_bonds = _parse_raw(text)
    raw_atoms, raw_bonds = _fold_h_atoms(raw_atoms, raw_bonds)
    if not raw_atoms:
        raise ParseError("syntax", "no heavy atoms")
    if any(a.aromatic for a in raw_atoms) or any(b[3] for b in raw_bonds):
        _kekulize(raw_atoms, raw_bonds)
    atoms = tuple(
        Atom(a.element, a.charge, a.explicit_h, a.aromatic, a.bracket)
        for a in raw_atoms)
    bonds = tuple(Bond(a, b, order) for a, b, order, _ in raw_bonds)
    return Molecule.from_graph(atoms, bonds, allow_radicals=allow_radicals)


def is_radical_free(mol: Molecule) -> bool:
    """False iff some bracket atom sits below every allowed valence."""
    return not mol.has_radical()


def perceive_rings(mol: Molecule) -> list[frozenset[int]]:
    """Smallest set of smallest rings, as atom-index sets."""
    return list(mol.rings)


def molecular_formula(mol: Molecule) -> dict[str, int]:
    """Element counts including implicit and explicit hydrogens."""
    counts: dict[str, int] = {}
    h = 0
    for i, atom in enumerate(mol.atoms):
        counts[atom.element] = counts.get(atom.element, 0) + 1
        h += mol.total_h(i)
    if h:
        counts["H"] = counts.get("H", 0) + h
    return counts


def format_formula(counts: dict[str, int]) -> str:
    """Hill order: C, H, then alphabetical."""
    parts = []
    for el in ("C", "H"):
        c = counts.get(el, 0)
        if c:
            parts.append(el if c == 1 else f"{el}{c}")
    for el in sorted(counts):
        if el in ("C", "H"):
            continue
        c = counts[el]
        parts.append(el if c == 1 else f"{el}{c}")
    return "".join(parts)


def parse_formula(text: str) -> dict[str, int]:
    """Parse a molecular formula string like C4H11NO into element counts."""
    counts: dict[str, int] = {}
    i = 0
    while i < len(text):
        if not text[i].isupper():
            raise ValueError(f"bad formula {text!r}")
        el = text[i]
        i += 1
        if i < len(text) and text[i].islower():
            el += text[i]
            i += 1
        digits = ""
        while i < len(text) and text[i].isdigit():
            digits += text[i]
            i += 1
        counts[el] = counts.get(el, 0) + (int(digits) if digits else 1)
    return counts


def molecular_weight(mol: Molecule) -> float:
    weight = 0.0
    for el, count in molecular_formula(mol).items():
        weight += ATOMIC_MASSES[el] * count
    return weight


# -- canonical ranking and writing ---------------------------------------


def _initial_invariants(mol: Molecule) -> list[tuple]:
    inv = []
    for i, atom in enumerate(mol.atoms):
        inv.append((
            atom.element,
            atom.charge,
            mol.degree(i),
            mol.total_h(i),
            mol.ring_atom_flags[i],
        ))
    return inv


def _refine_ranks(mol: Molecule) -> list[int]:
    """Morgan-style iterative neighborhood refinement to dense ranks."""
    keys = _initial_invariants(mol)
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    ranks = [order[k] for k in keys]
    n = mol.n_atoms()
    classes = len(set(ranks))
    for _ in range(n):
        new_keys = []
        for i in range(n):
            nb = sorted((mol.bond_order(i, j), ranks[j]) for j in mol.neighbors[i])
            new_keys.append((ranks[i], tuple(nb)))
        order = {k: r for r, k in enumerate(sorted(set(new_keys)))}
        new_ranks = [order[k] for k in new_keys]
        new_classes = len(set(new_ranks))
        ranks = new_ranks
        if new_classes == classes:
            break
        classes = new_classes
    return ranks


def _atom_token(mol: Molecule, i: int) -> str:
    atom = mol.atoms[i]
    total_h = mol.total_h(i)
    bond_sum = mol.bond_order_sum(i)
    if atom.charge == 0 and atom.element in ORGANIC_SUBSET:
        implied = None
        for v in VALENCES[atom.element]:
            if v >= bond_sum:
                implied = v - bond_sum
                break
        if implied is not None and implied == total_h:
            return atom.element
    h_part = ""
    if total_h == 1:
        h_part = "H"
    elif total_h > 1:
        h_part = f"H{total_h}"
    charge_part = ""
    if atom.charge == 1:
        charge_part = "+"
    elif atom.charge == -1:
        charge_part = "-"
    elif atom.charge > 1:
        charge_part = f"+{atom.charge}"
    elif atom.charge < -1:
        charge_part = f"-{-atom.charge}"
    return f"[{atom.element}{h_part}{charge_part}]"


_BOND_TOKEN = {1: "", 2: "=", 3: "#"}


def _digit_token(num: int) -> str:
    return str(num) if num < 10 else f"%{num:02d}"


class _WriterState:
    """DFS traversal state with snapshot/rollback for trial renders.

    Digit numbers are never reused within a molecule: a closing digit is
    inserted into its ancestor's slot, textually before the opening side,
    so reusing a freed number could interleave two pairs."""

    def __init__(self, n: int):
        self.visited = [False] * n
        self.visit_idx = [-1] * n
        self.counter = 0
        self.next_digit = 1
        self.open_digits: dict[tuple[int, int], int] = {}

    def alloc_digit(self) -> int:
        if self.next_digit > 99:
            raise ValueError("more than 99 ring closures in one molecule")
        num = self.next_digit
        self.next_digit += 1
        return num

    def snapshot(self):
        return (list(self.visited), list(self.visit_idx), self.counter,
                self.next_digit, dict(self.open_digits))

    def restore(self, snap):
        self.visited = list(snap[0])
        self.visit_idx = list(snap[1])
        self.counter = snap[2]
        self.next_digit = snap[3]
        self.open_digits = dict(snap[4])


def _flatten(tokens) -> str:
    parts = []
    stack = [iter(tokens)]
    while stack:
        try:
            item = next(stack[-1])
        except StopIteration:
            stack.pop()
            continue
        if isinstance(item, str):
            parts.append(item)
        else:
            stack.append(iter(item))
    return "".join(parts)


def _write_from(mol: Molecule, root: int, neighbor_order) -> str:
    """Write SMILES by DFS from ``root``.

    Every bond is either a tree edge or a ring-closure digit pair.  The
    deeper endpoint of a back edge opens the digit inline; the ancestor
    closes it by inserting the digit into a slot placed right after its
    atom token, keeping digits ahead of branch parentheses.

    ``neighbor_order(u, candidates, emit)`` returns the candidates in
    emission order; ``emit(v)`` gives the would-be branch string for v
    without committing traversal state (used for tie-breaking).
    """
    state = _WriterState(mol.n_atoms())

    def bond_token(u: int, v: int) -> str:
        return _BOND_TOKEN[mol.bond_order(u, v)]

    def walk(u: int, parent: int) -> list:
        state.visited[u] = True
        state.visit_idx[u] = state.counter
        state.counter += 1
        slot: list[str] = []
        tokens: list = [_atom_token(mol, u), slot]
        # back edges to ancestors: this (deeper) endpoint opens the digit
        back = [v for v in mol.neighbors[u]
                if v != parent and state.visited[v]]
        back.sort(key=lambda v: state.visit_idx[v])
        for v in back:
            key = (min(u, v), max(u, v))
            num = state.alloc_digit()
            state.open_digits[key] = num
            slot.append(bond_token(u, v) + _digit_token(num))
        remaining = [v for v in mol.neighbors[u]
                     if v != parent and not state.visited[v]]
        while remaining:
            ordered = neighbor_order(u, list(remaining),
                                     lambda v: trial(u, v))
            v = ordered[0]
            remaining.remove(v)
            if state.visited[v]:
                # ring closed through an earlier branch of u
                key = (min(u, v), max(u, v))
                num = state.open_digits.pop(key)
                slot.append(_digit_token(num))
                continue
            branch: list = [bond_token(u, v)]
            branch.extend(walk(v, u))
            if any(not state.visited[w] for w in remaining):
                tokens.append("(")
                tokens.extend(branch)
                tokens.append(")")
            else:
                tokens.extend(branch)
        return tokens

    def trial(u: int, v: int) -> str:
        snap = state.snapshot()
        if state.visited[v]:
            out = _digit_token(state.open_digits[(min(u, v), max(u, v))])
        else:
            out = bond_token(u, v) + _flatten(walk(v, u))
        state.restore(snap)
        return out

    return _flatten(walk(root, -1))


def canonical_smiles(mol: Molecule) -> str:
    """Deterministic SMILES, invariant to input atom ordering.

    Atoms are ranked by iterative neighborhood refinement; remaining ties
    are broken by comparing the candidate branch strings and keeping the
    lexicographically smallest output.
    """
    if mol._canonical is not None:
        return mol._canonical
    ranks = _refine_ranks(mol)

    def neighbor_order(u, candidates, emit):
        if len(candidates) == 1:
            return candidates
        by_rank = sorted(candidates, key=lambda v: ranks[v])
        best_rank = ranks[by_rank[0]]
        tied = [v for v in by_rank if ranks[v] == best_rank]
        if len(tied) == 1:
            return by_rank
        tied.sort(key=emit)
        rest = [v for v in by_rank if ranks[v] != best_rank]
        return tied + rest

    min_rank = min(ranks)
    roots = [i for i, r in enumerate(ranks) if r == min_rank]
    result = min(_write_from(mol, root, neighbor_order) for root in roots)
    mol._canonical = result
    return result


def random_smiles(mol: Molecule, rng) -> str:
    """A randomized-but-valid SMILES rewriting (random root and DFS order)."""

    def neighbor_order(u, candidates, emit):
        shuffled = list(candidates)
        rng.shuffle(shuffled)
        return shuffled

    root = rng.randrange(mol.n_atoms())
    return _write_from(mol, root, neighbor_order)


def read_smiles_file(path) -> list[str]:
    """One SMILES per line; '#' comment lines and blanks ignored."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            out.append(line.split()[0])
    return out
