import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import amine_only, enumerate_trees, ring_variants  # noqa: E402


@pytest.fixture(scope="session")
def tree_corpus():
    """Distinct C/N/O trees up to 6 heavy atoms (1,490 molecules)."""
    return enumerate_trees(6)


@pytest.fixture(scope="session")
def corpus_molecules(tree_corpus):
    """A parser-test corpus: trees plus single-ring variants, >= 1,000."""
    mols = dict(tree_corpus)
    five_atom = [m for m in tree_corpus.values() if m.n_atoms() == 5]
    mols.update(ring_variants(five_atom))
    return list(mols.values())


@pytest.fixture(scope="session")
def amine_corpus(tree_corpus):
    """Canonical SMILES of every amine tree up to 6 atoms (includes MEA)."""
    return sorted(amine_only(tree_corpus))
