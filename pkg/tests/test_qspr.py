import collections
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aminegen import fingerprint, qspr
from aminegen.molgraph import canonical_smiles, parse_smiles
from aminegen.qspr import (DatasetRow, DegenerateFoldError, DuplicateKeyError,
                           LengthMismatchError, PropertyDataset, SchemaError,
                           TooFewRowsError, ZeroVarianceError, cross_validate,
                           cv_report_csv, filter_corpus, grid_search,
                           load_dataset, metrics, quintile_stratified_folds)


class TestLoadDataset:
    def test_well_formed(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("# property=viscosity unit=log10(cP)\n"
                        "smiles,value\nNCCO,0.728\nOCCNCCO,1.261\nCCNCC,-0.512\n")
        ds = load_dataset(path)
        assert len(ds) == 3
        assert ds.property_name == "viscosity"
        assert ds.unit == "log10(cP)"
        assert not ds.warnings

    def test_invalid_smiles_skipped_with_warning(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("smiles,value\nNCCO,1.0\nC(,2.0\nCCO,3.0\n")
        ds = load_dataset(path)
        assert len(ds) == 2
        assert len(ds.warnings) == 1
        assert "line 3" in ds.warnings[0]

    def test_duplicate_key_error_names_line(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("smiles,value\nNCCO,1.0\nOCCN,2.0\n")
        with pytest.raises(DuplicateKeyError) as excinfo:
            load_dataset(path)
        assert "line 3" in str(excinfo.value)

    def test_temperature_distinguishes_keys(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("smiles,value,temperature\n"
                        "NCCO,1.0,298.15\nNCCO,0.5,348.15\n")
        ds = load_dataset(path)
        assert len(ds) == 2
        assert ds.has_temperature()

    def test_schema_error(self, tmp_path):
        path = tmp_path / "ds.csv"
        path.write_text("id,y\n1,2\n")
        with pytest.raises(SchemaError):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_dataset(tmp_path / "nope.csv")


class TestFilterCorpus:
    def test_target_excluded_from_own_corpus(self):
        target = parse_smiles("NCCO")
        corpus = [parse_smiles(s) for s in ("NCCO", "C", "NCCNCCN")]
        kept = filter_corpus(corpus, 300.0, [target], 0.323)
        kept_canon = {canonical_smiles(m) for m in kept}
        assert canonical_smiles(target) not in kept_canon

    def test_methane_kept(self):
        targets = [parse_smiles(s) for s in ("NCCO", "OCCNCCO", "C1CNCCN1")]
        methane = parse_smiles("C")
        sims = [fingerprint.tanimoto(fingerprint.ecfp(methane),
                                     fingerprint.ecfp(t)) for t in targets]
        assert max(sims) < 0.323
        kept = filter_corpus([methane], 250.0, targets, 0.323)
        assert len(kept) == 1

    def test_weight_filter(self):
        heavy = parse_smiles("C" * 26)  # MW > 300
        light = parse_smiles("C")
        kept = filter_corpus([heavy, light], 300.0, [], 0.323)
        assert len(kept) == 1

    def test_order_independent(self, corpus_molecules):
        rng = random.Random(0)
        mols = rng.sample(corpus_molecules, 120)
        targets = [parse_smiles(s) for s in ("NCCO", "C1CNCCN1")]
        kept1 = {canonical_smiles(m)
                 for m in filter_corpus(mols, 250.0, targets)}
        shuffled = list(mols)
        rng.shuffle(shuffled)
        kept2 = {canonical_smiles(m)
                 for m in filter_corpus(shuffled, 250.0, targets)}
        assert kept1 == kept2


def make_dataset(values):
    mol = parse_smiles("C")
    rows = [DatasetRow(f"mol{i}", v, None, mol) for i, v in enumerate(values)]
    return PropertyDataset(rows)


class TestFolds:
    def test_uniform_hundred(self):
        ds = make_dataset([float(i) for i in range(100)])
        folds = quintile_stratified_folds(ds, 5, seed=1)
        sizes = collections.Counter(folds.tolist())
        assert all(v == 20 for v in sizes.values())
        for b in range(5):
            quintile = folds[20 * b:20 * (b + 1)]
            counts = collections.Counter(quintile.tolist())
            assert all(v == 4 for v in counts.values())

    def test_same_seed_identical(self):
        ds = make_dataset([random.Random(0).uniform(0, 1) for _ in range(83)])
        a = quintile_stratified_folds(ds, 5, seed=7)
        b = quintile_stratified_folds(ds, 5, seed=7)
        assert np.array_equal(a, b)

    def test_partition(self):
        ds = make_dataset([random.Random(1).gauss(0, 1) for _ in range(137)])
        folds = quintile_stratified_folds(ds, 5, seed=3)
        assert len(folds) == 137
        assert set(folds.tolist()) == {0, 1, 2, 3, 4}
        sizes = collections.Counter(folds.tolist())
        assert max(sizes.values()) - min(sizes.values()) <= 5

    def test_fold_means_balanced(self):
        rng = random.Random(5)
        values = [rng.gauss(10, 3) for _ in range(1000)]
        ds = make_dataset(values)
        folds = quintile_stratified_folds(ds, 5, seed=2)
        y = ds.values()
        global_mean = y.mean()
        for fold in range(5):
            fold_mean = y[folds == fold].mean()
            assert abs(fold_mean - global_mean) <= 0.1 * abs(global_mean)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRowsError):
            quintile_stratified_folds(make_dataset([1.0, 2.0]), 5)


class TestMetrics:
    def test_perfect(self):
        assert metrics([1, 2, 3], [1, 2, 3]) == (1.0, 0.0)

    def test_mean_predictor_zero_r2(self):
        y = [1.0, 2.0, 3.0, 4.0]
        mean = sum(y) / 4
        r2, mae = metrics(y, [mean] * 4)
        assert r2 == 0.0
        assert mae == pytest.approx(1.0)

    def test_hand_computed_three_points(self):
        r2, mae = metrics([1, 2, 3], [1, 2, 4])
        assert r2 == 0.5
        assert mae == 1 / 3

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            metrics([1, 2], [1, 2, 3])
        with pytest.raises(LengthMismatchError):
            metrics([], [])

    def test_zero_variance(self):
        with pytest.raises(ZeroVarianceError):
            metrics([2, 2, 2], [1, 2, 3])

    @given(st.lists(st.floats(-100, 100), min_size=3, max_size=30))
    @settings(max_examples=60, deadline=None)
    def test_r2_upper_bound(self, values):
        if max(values) - min(values) < 1e-9:
            return  # (near-)constant targets are the ZeroVariance case
        r2, mae = metrics(values, values)
        assert r2 == 1.0 and mae == 0.0


def molecule_dataset(tmp_path, mols, target_fn, noise=0.0, seed=0):
    nrng = np.random.default_rng(seed)
    lines = ["smiles,value"]
    for mol in mols:
        lines.append(f"{canonical_smiles(mol)},"
                     f"{target_fn(mol) + (nrng.normal(0, noise) if noise else 0)}")
    path = tmp_path / "ds.csv"
    path.write_text("\n".join(lines) + "\n")
    return load_dataset(path)


class TestCrossValidate:
    def test_constant_predictor_nonpositive_test_r2(self, tmp_path,
                                                    corpus_molecules):
        rng = random.Random(0)
        mols = rng.sample(corpus_molecules, 60)
        ds = molecule_dataset(tmp_path, mols,
                              lambda m: rng.gauss(0, 1))

        class MeanModel:
            def __init__(self, y):
                self.mean = float(np.mean(y))

            def predict_matrix(self, X):
                return np.full(len(X), self.mean)

        folds = quintile_stratified_folds(ds, 5, seed=0)
        y = ds.values()
        for fold in range(5):
            train_y = y[folds != fold]
            test_y = y[folds == fold]
            model = MeanModel(train_y)
            r2, _ = metrics(test_y, model.predict_matrix(np.zeros((len(test_y), 1))))
            assert r2 <= 0.0

    def test_ridge_on_linear_target(self, tmp_path):
        from helpers import random_chain_corpus

        mols = random_chain_corpus(n=300, max_len=60, seed=1)
        ds = molecule_dataset(
            tmp_path, mols,
            lambda m: fingerprint.ecfp(m, width=256).popcount / 256,
            noise=0.0)
        report = cross_validate(ds, "ridge", {"l2": 1.0}, width=256)
        assert report.summary()["test_r2"][0] > 0.9

    def test_knn_duplicates_have_zero_error(self, tmp_path, corpus_molecules):
        # the same molecule appears with two temperatures; whenever the twin
        # row lands in the training side of a fold, k=1 reproduces its value
        mols = corpus_molecules[:40]
        lines = ["smiles,value,temperature"]
        for i, mol in enumerate(mols):
            lines.append(f"{canonical_smiles(mol)},{float(i)},298.15")
            lines.append(f"{canonical_smiles(mol)},{float(i)},348.15")
        path = tmp_path / "dup.csv"
        path.write_text("\n".join(lines) + "\n")
        ds = load_dataset(path)
        report = cross_validate(ds, "knn", {"k": 1}, seed=4)
        assert report.summary()["test_mae"][0] < 0.5

        folds = quintile_stratified_folds(ds, 5, seed=4)
        X = qspr._design_matrix(ds, np.arange(len(ds)), 1024, 3)
        y = ds.values()
        checked = 0
        for fold in range(5):
            train_idx = np.flatnonzero(folds != fold)
            test_idx = np.flatnonzero(folds == fold)
            model = qspr._KnnModel(X[train_idx], y[train_idx], 1)
            train_keys = {ds.rows[i].smiles for i in train_idx}
            with_twin = [i for i in test_idx if ds.rows[i].smiles in train_keys]
            if not with_twin:
                continue
            pred = model.predict_matrix(X[with_twin])
            assert np.abs(pred - y[with_twin]).max() == 0.0
            checked += len(with_twin)
        assert checked > 0

    def test_degenerate_fold(self, tmp_path):
        path = tmp_path / "flat.csv"
        lines = ["smiles,value"] + [f"{'C' * (i + 1)},1.0" for i in range(10)]
        path.write_text("\n".join(lines) + "\n")
        ds = load_dataset(path)
        with pytest.raises(DegenerateFoldError):
            cross_validate(ds, "ridge", {})

    def test_grid_search_shape(self, tmp_path, corpus_molecules):
        rng = random.Random(2)
        mols = rng.sample(corpus_molecules, 80)
        ds = molecule_dataset(tmp_path, mols,
                              lambda m: float(m.n_atoms()))
        best, reports = grid_search(ds, "knn", {"k": [1, 3]})
        assert len(reports) == 2
        assert best in reports

    def test_report_csv_columns(self, tmp_path, corpus_molecules):
        rng = random.Random(3)
        mols = rng.sample(corpus_molecules, 60)
        ds = molecule_dataset(tmp_path, mols, lambda m: float(m.n_atoms()))
        report = cross_validate(ds, "ridge", {"l2": 1.0})
        text = cv_report_csv(report, "Size", "ECFP/ridge")
        header = text.splitlines()[0]
        assert header == "Task,Model,Train R-squared,Train MAE,Test R-squared,Test MAE"
        assert "±" in text.splitlines()[1]
