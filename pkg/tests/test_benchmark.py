import random

import pytest

from helpers import c4h11no_universe
from aminegen import fingerprint
from aminegen.benchmark import (BenchmarkTask, TaskKind, default_suite,
                                load_tasks, reference_amines, replay_pipeline,
                                run_suite, score_isomer,
                                score_median_similarity, score_rediscovery,
                                score_similarity, suite_report_csv)
from aminegen.chemclass import classify_amine
from aminegen.molgraph import canonical_smiles, parse_smiles, random_smiles


def canon(s):
    return canonical_smiles(parse_smiles(s))


@pytest.fixture(scope="module")
def suite():
    return default_suite()


class TestReferenceData:
    def test_twenty_three_amines(self):
        refs = reference_amines()
        assert len(refs) == 23
        names = {r["name"] for r in refs}
        assert {"MEA", "MDEA", "PZ", "DETA", "TETA", "AMP", "DEAE-EO"} <= names

    def test_types_match_table(self):
        for row in reference_amines():
            mol = parse_smiles(row["smiles"])
            assert classify_amine(mol).value == row["amine_type"], row["name"]

    def test_suite_composition(self, suite):
        by_kind = {}
        for task in suite:
            by_kind.setdefault(task.kind, []).append(task)
        assert len(by_kind[TaskKind.REDISCOVERY]) == 10
        assert len(by_kind[TaskKind.SIMILARITY]) == 10
        assert len(by_kind[TaskKind.MEDIAN_SIMILARITY]) == 3
        assert len(by_kind[TaskKind.ISOMER]) == 4


class TestRediscovery:
    def test_target_present_scores_one(self, suite):
        task = next(t for t in suite if t.name == "MEA")
        assert score_rediscovery(task, ["NCCO", "CCO", "C"]).value == 1.0

    def test_rewritten_target_scores_one(self, suite):
        task = next(t for t in suite if t.name == "MEA")
        assert score_rediscovery(task, ["OCCN"]).value == 1.0

    def test_empty_candidates(self, suite):
        task = next(t for t in suite if t.name == "MEA")
        assert score_rediscovery(task, []).value == 0.0

    def test_monotone_under_appending(self, suite):
        task = next(t for t in suite if t.name == "DEA")
        pool = ["C", "CC", "CCN", "CCNCC", "OCCNC", "OCCNCC", "OCCNCCO"]
        best = 0.0
        for i in range(1, len(pool) + 1):
            value = score_rediscovery(task, pool[:i]).value
            assert value >= best
            best = value
        assert best == 1.0

    def test_duplicates_do_not_inflate(self, suite):
        task = next(t for t in suite if t.name == "MEA")
        one = score_rediscovery(task, ["CCN"]).value
        many = score_rediscovery(task, ["CCN"] * 50).value
        assert one == many


class TestSimilarity:
    def test_exact_copies_score_one(self, suite):
        task = next(t for t in suite if t.name == "AMP")
        assert score_similarity(task, [task.targets[0]] * 100).value == 1.0

    def test_below_threshold_scores_zero(self, suite):
        task = next(t for t in suite if t.name == "AMP")
        assert score_similarity(task, ["C", "CC", "CCC"]).value == 0.0

    def test_mean_over_available_contributors(self):
        # a synthetic task where several distinct candidates clear 0.7
        target = "NCCCCCCO"
        task = BenchmarkTask(TaskKind.SIMILARITY, "synthetic", (canon(target),))
        target_fp = fingerprint.ecfp(parse_smiles(target))
        candidates = [target, "NCCCCCCCO", "NCCCCCO", "OCCCCCCN"]
        per = []
        for s in set(canon(c) for c in candidates):
            sim = fingerprint.tanimoto(
                fingerprint.ecfp(parse_smiles(s)), target_fp)
            if sim > 0.7:
                per.append(sim)
        expected = sum(sorted(per, reverse=True)[:100]) / len(per)
        assert score_similarity(task, candidates).value == pytest.approx(expected)


class TestMedianSimilarity:
    def test_target_identity_side(self, suite):
        task = next(t for t in suite if t.kind is TaskKind.MEDIAN_SIMILARITY)
        a, b = task.targets
        t = fingerprint.tanimoto(fingerprint.ecfp(parse_smiles(a)),
                                 fingerprint.ecfp(parse_smiles(b)))
        expected = (1 + t) / 2
        score = score_median_similarity(task, [a])
        if expected > task.sim_threshold:
            assert score.value == pytest.approx(expected)
        else:
            assert score.value == 0.0

    def test_symmetric_in_target_order(self, suite):
        task = next(t for t in suite if t.kind is TaskKind.MEDIAN_SIMILARITY)
        swapped = BenchmarkTask(TaskKind.MEDIAN_SIMILARITY, task.name,
                                (task.targets[1], task.targets[0]))
        candidates = ["NCCO", "CN1CCCCC1CO", "CCN(CC)CCOCCO", "OCCN1CCCCC1"]
        assert score_median_similarity(task, candidates).value == \
            score_median_similarity(swapped, candidates).value


class TestIsomer:
    def test_amp_matches(self, suite):
        task = next(t for t in suite if t.formula == "C4H11NO")
        assert score_isomer(task, ["CC(C)(N)CO"]).value == 1.0

    def test_formula_mismatch(self, suite):
        task = next(t for t in suite if t.formula == "C4H11NO")
        assert score_isomer(task, ["NCCO"]).value == 0.0

    def test_full_enumeration_scores_one(self, suite):
        task = next(t for t in suite if t.formula == "C4H11NO")
        neutral, charged = c4h11no_universe()
        candidates = sorted(neutral) + sorted(charged)
        assert len(neutral) == 56
        assert score_isomer(task, candidates).value == 1.0

    def test_mixture_ranked_matches_first(self, suite):
        task = next(t for t in suite if t.formula == "C4H11NO")
        neutral, _ = c4h11no_universe()
        matching = sorted(neutral)[:50]
        candidates = matching + ["NCCO", "CCO", "C"]
        # 53 distinct candidates, 50 matching; top-100 window covers all
        assert score_isomer(task, candidates).value == pytest.approx(50 / 53)


class TestSuite:
    def test_replay_all_rediscovery_targets(self, suite):
        targets = [r["smiles"] for r in reference_amines()
                   if r["benchmark"] == "rediscovery"]
        tasks = [t for t in suite if t.kind is TaskKind.REDISCOVERY]
        report = run_suite(tasks, replay_pipeline(targets), 0)
        assert report.total == 10.0

    def test_empty_generator_all_zero(self, suite):
        report = run_suite(suite, replay_pipeline([]), 0)
        assert report.total == 0.0

    def test_deterministic(self, suite, corpus_molecules):
        rng = random.Random(0)
        candidates = [canonical_smiles(m)
                      for m in rng.sample(corpus_molecules, 200)]
        r1 = run_suite(suite, replay_pipeline(candidates), 0)
        r2 = run_suite(suite, replay_pipeline(candidates), 0)
        assert suite_report_csv(r1) == suite_report_csv(r2)

    def test_report_csv_layout(self, suite):
        report = run_suite(suite[:2], replay_pipeline(["NCCO"]), 0)
        lines = suite_report_csv(report).splitlines()
        assert lines[0] == "Task,Name,AmineType,Score"
        assert lines[-1].startswith("Total,")

    def test_task_file_roundtrip(self, tmp_path, suite):
        path = tmp_path / "tasks.txt"
        path.write_text(
            "rediscovery;NCCO;name=MEA,amine_type=primary\n"
            "median_similarity;CCN(CC)CCOCCO,CN1CCCCC1CO;name=pair\n"
            "isomer;C4H11NO;top_n=50\n")
        tasks = load_tasks(path)
        assert [t.kind for t in tasks] == [TaskKind.REDISCOVERY,
                                           TaskKind.MEDIAN_SIMILARITY,
                                           TaskKind.ISOMER]
        assert tasks[0].name == "MEA"
        assert tasks[2].top_n == 50
        with pytest.raises(ValueError):
            load_tasks_path = tmp_path / "bad.txt"
            load_tasks_path.write_text("rediscovery;NCCO;bogus=1\n")
            load_tasks(load_tasks_path)


def test_median_similarity_ceiling_brute_force(suite=None):
    """Exhaustive scan over an enumerated small-amine set, with Tanimoto
    recomputed independently from raw bit sets; the module's top-N
    aggregation must reproduce the brute-force mean, and the achievable
    ceiling sits in the published 0.3-0.5 region."""
    from helpers import amine_only, enumerate_trees, ring_variants

    pool = dict(enumerate_trees(7))
    six_atom = [m for m in pool.values() if m.n_atoms() == 6]
    pool.update(ring_variants(six_atom))
    amines = amine_only(pool)

    task = BenchmarkTask(TaskKind.MEDIAN_SIMILARITY, "DEAE-EO and 1M-2PPE",
                         (canon("CCN(CC)CCOCCO"), canon("CN1CCCCC1CO")))
    fp_a = fingerprint.ecfp(parse_smiles(task.targets[0]))
    fp_b = fingerprint.ecfp(parse_smiles(task.targets[1]))

    def raw_tanimoto(x, y):
        sx, sy = set(x.bit_ids()), set(y.bit_ids())
        union = len(sx | sy)
        return 1.0 if union == 0 else len(sx & sy) / union

    per_mol = {}
    for key, mol in amines.items():
        fp = fingerprint.ecfp(mol)
        per_mol[key] = (raw_tanimoto(fp, fp_a) + raw_tanimoto(fp, fp_b)) / 2
    qualifying = sorted(((s, k) for k, s in per_mol.items() if s > 0.7),
                        key=lambda t: (-t[0], t[1]))[:100]
    expected = (sum(s for s, _ in qualifying) / len(qualifying)
                if qualifying else 0.0)
    got = score_median_similarity(task, list(amines)).value
    assert got == pytest.approx(expected, abs=1e-12)
    best = max(per_mol.values())
    assert 0.15 <= best <= 0.6  # the published anchor for this pair is 0.395
