import random

import pytest

from aminegen.chemclass import (AmineType, Restriction, classify_amine,
                                find_amine_sites, matches_restriction)
from aminegen.molgraph import canonical_smiles, parse_smiles, random_smiles


class TestSites:
    def test_mea_single_primary_site(self):
        sites = find_amine_sites(parse_smiles("NCCO"))
        assert len(sites) == 1
        assert sites[0].h_count == 2
        assert not sites[0].in_ring

    def test_deta_three_sites(self):
        assert len(find_amine_sites(parse_smiles("NCCNCCN"))) == 3

    def test_no_nitrogen(self):
        assert find_amine_sites(parse_smiles("CCO")) == []

    @pytest.mark.parametrize("smiles", [
        "CC(=O)N",        # amide
        "CC=N",           # imine
        "CC#N",           # nitrile
        "C[N+](=O)[O-]",  # nitro
        "c1ccncc1",       # aromatic nitrogen
        "C[NH3+]",        # protonated
    ])
    def test_non_amine_nitrogens(self, smiles):
        assert find_amine_sites(parse_smiles(smiles)) == []

    def test_aniline_nitrogen_counts(self):
        # ring carbons aromatic, N itself is not: included by design
        assert len(find_amine_sites(parse_smiles("Nc1ccccc1"))) == 1


class TestClassify:
    @pytest.mark.parametrize("smiles,expected", [
        ("CN(CCO)CCO", AmineType.TERTIARY),   # MDEA
        ("C1CNCCN1", AmineType.CYCLIC),       # PZ
        ("NCCNCCN", AmineType.POLY),          # DETA
        ("NCCO", AmineType.PRIMARY),          # MEA
        ("OCCNCCO", AmineType.SECONDARY),     # DEA
        ("CCO", AmineType.NOT_AMINE),
        ("NCCN1CCNCC1", AmineType.CYCLIC),    # ring site wins over poly
    ])
    def test_classes(self, smiles, expected):
        assert classify_amine(parse_smiles(smiles)) is expected

    def test_totality(self, corpus_molecules):
        for mol in corpus_molecules[:500]:
            assert classify_amine(mol) in AmineType

    def test_invariant_under_rewriting(self, corpus_molecules):
        rng = random.Random(3)
        for mol in corpus_molecules[:150]:
            expected = classify_amine(mol)
            rewritten = parse_smiles(random_smiles(mol, rng))
            assert classify_amine(rewritten) is expected


class TestRestriction:
    @pytest.mark.parametrize("amine_type,restriction,expected", [
        (AmineType.PRIMARY, Restriction.PRIMARY_SECONDARY, True),
        (AmineType.SECONDARY, Restriction.PRIMARY_SECONDARY, True),
        (AmineType.CYCLIC, Restriction.PRIMARY_SECONDARY, False),
        (AmineType.TERTIARY, Restriction.TERTIARY_CYCLIC_POLY, True),
        (AmineType.CYCLIC, Restriction.TERTIARY_CYCLIC_POLY, True),
        (AmineType.POLY, Restriction.TERTIARY_CYCLIC_POLY, True),
        (AmineType.PRIMARY, Restriction.TERTIARY_CYCLIC_POLY, False),
        (AmineType.POLY, Restriction.NONE, True),
    ])
    def test_membership(self, amine_type, restriction, expected):
        assert matches_restriction(amine_type, restriction) is expected

    def test_not_amine_rejected(self):
        with pytest.raises(ValueError):
            matches_restriction(AmineType.NOT_AMINE, Restriction.NONE)
