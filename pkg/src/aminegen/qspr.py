"""Property datasets, corpus filtering, and the cross-validation harness.

Featurization is fingerprint bits (optionally with a shifted temperature
feature); shipping learners are k-NN and ridge.  Folds are stratified by
y-value quintiles under a fixed seed.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field

import numpy as np

from . import fingerprint
from .molgraph import Molecule, ParseError, canonical_smiles, molecular_weight, \
    parse_smiles

__all__ = [
    "PropertyDataset",
    "DatasetRow",
    "CvReport",
    "FoldMetrics",
    "load_dataset",
    "filter_corpus",
    "quintile_stratified_folds",
    "cross_validate",
    "grid_search",
    "metrics",
    "featurize_bits",
    "train_ridge",
    "cv_report_csv",
    "SchemaError",
    "DuplicateKeyError",
    "TooFewRowsError",
    "DegenerateFoldError",
    "LengthMismatchError",
    "ZeroVarianceError",
]

TEMPERATURE_CENTER = 298.15
TEMPERATURE_SCALE = 100.0


class SchemaError(ValueError):
    pass


class DuplicateKeyError(ValueError):
    pass


class TooFewRowsError(ValueError):
    pass


class DegenerateFoldError(ValueError):
    pass


class LengthMismatchError(ValueError):
    pass


class ZeroVarianceError(ValueError):
    pass


@dataclass
class DatasetRow:
    smiles: str  # canonical
    value: float
    temperature: float | None
    mol: Molecule


@dataclass
class PropertyDataset:
    rows: list[DatasetRow]
    property_name: str = "value"
    unit: str = ""
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows], dtype=np.float64)

    def has_temperature(self) -> bool:
        return any(r.temperature is not None for r in self.rows)


def load_dataset(path) -> PropertyDataset:
    """CSV with header smiles,value[,temperature].  Rows with unparseable
    SMILES are dropped with a line-numbered warning; duplicate
    (smiles, temperature) keys are an error."""
    property_name = "value"
    unit = ""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw_lines = fh.readlines()
    data: list[tuple[int, str]] = []
    for lineno, line in enumerate(raw_lines, start=1):
        if line.startswith("#"):
            for part in line[1:].strip().split():
                if part.startswith("property="):
                    property_name = part.split("=", 1)[1]
                elif part.startswith("unit="):
                    unit = part.split("=", 1)[1]
            continue
        if line.strip():
            data.append((lineno, line))
    if not data:
        raise SchemaError(f"{path}: no header row")
    header = next(csv.reader([data[0][1]]))
    header = [h.strip() for h in header]
    if "smiles" not in header or "value" not in header:
        raise SchemaError(f"{path}: header must contain smiles,value")
    idx_smiles = header.index("smiles")
    idx_value = header.index("value")
    idx_temp = header.index("temperature") if "temperature" in header else None
    rows: list[DatasetRow] = []
    warnings: list[str] = []
    seen: dict[tuple, int] = {}
    for lineno, line in data[1:]:
        rec = next(csv.reader([line]))
        if len(rec) < len(header):
            warnings.append(f"line {lineno}: short row, skipped")
            continue
        smiles_text = rec[idx_smiles].strip()
        try:
            mol = parse_smiles(smiles_text)
        except ParseError as exc:
            warnings.append(f"line {lineno}: invalid SMILES {smiles_text!r} ({exc})")
            continue
        try:
            value = float(rec[idx_value])
        except ValueError:
            warnings.append(f"line {lineno}: bad value {rec[idx_value]!r}")
            continue
        temp = None
        if idx_temp is not None and rec[idx_temp].strip():
            temp = float(rec[idx_temp])
        canon = canonical_smiles(mol)
        key = (canon, temp)
        if key in seen:
            raise DuplicateKeyError(
                f"line {lineno}: duplicate key {key} (first at line {seen[key]})")
        seen[key] = lineno
        rows.append(DatasetRow(canon, value, temp, mol))
    return PropertyDataset(rows, property_name, unit, warnings)


def filter_corpus(mols, max_mw: float, targets, sim_cutoff: float = 0.323,
                  radius: int = fingerprint.DEFAULT_RADIUS,
                  width: int = fingerprint.DEFAULT_WIDTH) -> list[Molecule]:
    """Keep molecules with weight <= max_mw whose maximum Tanimoto to any
    target stays at or below the cutoff."""
    mols = list(mols)
    targets = list(targets)
    kept = [m for m in mols if molecular_weight(m) <= max_mw]
    if not kept or not targets:
        return kept
    fps = [fingerprint.ecfp(m, radius, width) for m in kept]
    target_fps = [fingerprint.ecfp(t, radius, width) for t in targets]
    sims = fingerprint.max_sims(fps, target_fps)
    return [m for m, s in zip(kept, sims) if s <= sim_cutoff]


def quintile_stratified_folds(ds: PropertyDataset, k: int = 5,
                              seed: int = 0, bins: int = 5) -> np.ndarray:
    """Fold assignment balanced over y-value quantile bins.

    Rows are sorted by value, split into ``bins`` contiguous quantile
    chunks, each chunk is shuffled under the seed, and entries are dealt
    round-robin across the k folds with a running cursor."""
    n = len(ds)
    if n < k:
        raise TooFewRowsError(f"{n} rows < {k} folds")
    values = ds.values()
    order = np.argsort(values, kind="stable")
    rng = random.Random(seed)
    folds = np.empty(n, dtype=np.int64)
    cursor = 0
    boundaries = [round(b * n / bins) for b in range(bins + 1)]
    for b in range(bins):
        chunk = list(order[boundaries[b]:boundaries[b + 1]])
        rng.shuffle(chunk)
        for row_idx in chunk:
            folds[row_idx] = cursor % k
            cursor += 1
    return folds


def metrics(y_true, y_pred) -> tuple[float, float]:
    """(R^2, MAE).  R^2 = 1 - SS_res/SS_tot; undefined for zero-variance
    targets."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise LengthMismatchError("metrics need equal nonzero-length arrays")
    ss_tot = float(((y_true - y_true.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ZeroVarianceError("R^2 undefined for constant targets")
    ss_res = float(((y_true - y_pred) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot
    mae = float(np.abs(y_true - y_pred).mean())
    return r2, mae


def featurize_bits(mols, width: int = fingerprint.DEFAULT_WIDTH,
                   radius: int = fingerprint.DEFAULT_RADIUS) -> np.ndarray:
    X = np.zeros((len(mols), width), dtype=np.float64)
    for row, mol in enumerate(mols):
        X[row, fingerprint.ecfp(mol, radius, width).bit_ids()] = 1.0
    return X


def _design_matrix(ds: PropertyDataset, indices, width, radius) -> np.ndarray:
    mols = [ds.rows[i].mol for i in indices]
    X = featurize_bits(mols, width, radius)
    if ds.has_temperature():
        temps = np.array([
            ((ds.rows[i].temperature or TEMPERATURE_CENTER) - TEMPERATURE_CENTER)
            / TEMPERATURE_SCALE
            for i in indices], dtype=np.float64)
        X = np.hstack([X, temps[:, None]])
    return X


def train_ridge(X: np.ndarray, y: np.ndarray, l2: float = 1.0):
    """Ridge with an unpenalized bias, solved as an augmented least-squares
    system for numerical stability at small l2."""
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    aug = np.zeros((d, d + 1))
    aug[:, :d] = np.eye(d) * np.sqrt(l2)
    A = np.vstack([Xb, aug])
    b = np.concatenate([y, np.zeros(d)])
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return coef[:d], float(coef[d])


class _RidgeModel:
    def __init__(self, weights, bias):
        self.weights = weights
        self.bias = bias

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias


class _KnnModel:
    def __init__(self, X, y, k):
        # generalized Tanimoto needs nonnegative features; shift by the
        # training minimum so a below-standard temperature column works
        self.shift = X.min(axis=0)
        self.X = X - self.shift
        self.y = y
        self.k = k

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.clip(X - self.shift, 0.0, None)
        out = np.empty(len(X), dtype=np.float64)
        for i, x in enumerate(X):
            mins = np.minimum(self.X, x).sum(axis=1)
            maxs = np.maximum(self.X, x).sum(axis=1)
            sims = np.divide(mins, maxs, out=np.ones_like(mins), where=maxs > 0)
            k = min(self.k, len(sims))
            order = np.lexsort((np.arange(len(sims)), -sims))[:k]
            top = sims[order]
            total = top.sum()
            if k == 1:
                out[i] = float(self.y[order][0])
            elif total <= 0:
                out[i] = float(self.y[order].mean())
            else:
                out[i] = float((top * self.y[order]).sum() / total)
        return out


def _fit(kind: str, X, y, hyperparams: dict):
    if kind == "ridge":
        weights, bias = train_ridge(X, y, l2=float(hyperparams.get("l2", 1.0)))
        return _RidgeModel(weights, bias)
    if kind == "knn":
        return _KnnModel(X, y, int(hyperparams.get("k", 5)))
    raise ValueError(f"unknown predictor kind {kind!r}")


@dataclass
class FoldMetrics:
    fold: int
    train_r2: float
    train_mae: float
    test_r2: float
    test_mae: float


@dataclass
class CvReport:
    folds: list[FoldMetrics]
    kind: str
    hyperparams: dict

    def _agg(self, attr: str) -> tuple[float, float]:
        vals = np.array([getattr(f, attr) for f in self.folds])
        return float(vals.mean()), float(vals.std())

    def summary(self) -> dict[str, tuple[float, float]]:
        return {name: self._agg(name)
                for name in ("train_r2", "train_mae", "test_r2", "test_mae")}


def cross_validate(ds: PropertyDataset, predictor_kind: str,
                   hyperparams: dict | None = None, k: int = 5, seed: int = 0,
                   width: int = fingerprint.DEFAULT_WIDTH,
                   radius: int = fingerprint.DEFAULT_RADIUS) -> CvReport:
    """Quintile-stratified k-fold CV reporting R^2 and MAE per fold."""
    hyperparams = hyperparams or {}
    folds = quintile_stratified_folds(ds, k=k, seed=seed)
    all_idx = np.arange(len(ds))
    X_all = _design_matrix(ds, all_idx, width, radius)
    y_all = ds.values()
    results = []
    for fold in range(k):
        test_mask = folds == fold
        train_idx = all_idx[~test_mask]
        test_idx = all_idx[test_mask]
        y_train, y_test = y_all[train_idx], y_all[test_idx]
        if len(np.unique(y_train)) < 2 or len(np.unique(y_test)) < 2:
            raise DegenerateFoldError(f"fold {fold} has a zero-variance target")
        model = _fit(predictor_kind, X_all[train_idx], y_train, hyperparams)
        train_r2, train_mae = metrics(y_train, model.predict_matrix(X_all[train_idx]))
        test_r2, test_mae = metrics(y_test, model.predict_matrix(X_all[test_idx]))
        results.append(FoldMetrics(fold, train_r2, train_mae, test_r2, test_mae))
    return CvReport(results, predictor_kind, dict(hyperparams))


def grid_search(ds: PropertyDataset, predictor_kind: str, grid: dict,
                k: int = 5, seed: int = 0):
    """Cross-validate every hyperparameter combination; returns
    (best_report, all_reports) ranked by mean test R^2."""
    import itertools

    keys = sorted(grid)
    reports = []
    for combo in itertools.product(*(grid[key] for key in keys)):
        hyper = dict(zip(keys, combo))
        reports.append(cross_validate(ds, predictor_kind, hyper, k=k, seed=seed))
    best = max(reports, key=lambda r: r.summary()["test_r2"][0])
    return best, reports


def cv_report_csv(report: CvReport, task: str, model_name: str) -> str:
    """One CSV row in the cross-validation report layout."""
    s = report.summary()

    def cell(name):
        mean, sd = s[name]
        return f"{mean:.4f} ± {sd:.4f}"

    lines = ["Task,Model,Train R-squared,Train MAE,Test R-squared,Test MAE"]
    lines.append(",".join([
        task, model_name, cell("train_r2"), cell("train_mae"),
        cell("test_r2"), cell("test_mae")]))
    return "\n".join(lines) + "\n"
