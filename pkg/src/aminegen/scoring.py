"""Desirability scalers, property predictors, and SPO/MPO objectives.

Every raw property maps to [0, 1] through a clamped linear ramp between
its low and high breakpoints; the MPO score is the arithmetic mean of the
eight component scores.  Candidates of the wrong amine type keep 10% of
their score.
"""

from __future__ import annotations

import csv
import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from . import fingerprint, qspr
from .chemclass import AmineType, Restriction, classify_amine, find_amine_sites, \
    matches_restriction
from .molgraph import Molecule, canonical_smiles, parse_smiles

__all__ = [
    "ScalerSpec",
    "scale",
    "default_scalers",
    "parse_scaler_override",
    "PROPERTIES",
    "PropertyVector",
    "LookupTablePredictor",
    "KnnFingerprintPredictor",
    "RidgeFingerprintPredictor",
    "predict",
    "load_lookup_csv",
    "build_knn_from_csv",
    "build_ridge_from_csv",
    "SpoObjective",
    "spo_score",
    "mpo_score",
    "MpoResult",
    "NotAmineError",
    "MissingKeyError",
]

PROPERTIES = ("pka", "viscosity", "vapor_pressure", "boiling_point",
              "melting_point", "log_s", "ra_score", "price")

PENALTY_FACTOR = 0.1
STANDARD_TEMPERATURE = 298.15


class NotAmineError(ValueError):
    pass


class MissingKeyError(KeyError):
    pass


@dataclass(frozen=True)
class ScalerSpec:
    lo: float
    hi: float
    increasing: bool

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("scaler requires lo < hi")


def scale(x: float, spec: ScalerSpec) -> float:
    """Clamped linear ramp to [0, 1]; decreasing specs are mirrored."""
    t = (x - spec.lo) / (spec.hi - spec.lo)
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return t if spec.increasing else 1.0 - t


def default_scalers() -> dict[str, ScalerSpec]:
    """The eight property ramps used by the MPO composite."""
    return {
        "pka": ScalerSpec(7.0, 14.0, True),
        "viscosity": ScalerSpec(-1.0, 2.0, False),
        "vapor_pressure": ScalerSpec(-3.0, 3.0, False),
        "boiling_point": ScalerSpec(80.0, 250.0, True),
        "melting_point": ScalerSpec(40.0, 80.0, False),
        "log_s": ScalerSpec(-4.0, 2.0, True),
        "ra_score": ScalerSpec(0.0, 1.0, True),
        "price": ScalerSpec(0.0, 10.0, False),
    }


def parse_scaler_override(text: str) -> ScalerSpec:
    """Config syntax lo:hi:inc|dec, e.g. '7:14:inc'."""
    parts = text.split(":")
    if len(parts) != 3 or parts[2] not in ("inc", "dec"):
        raise ValueError(f"bad scaler spec {text!r}; expected lo:hi:inc|dec")
    return ScalerSpec(float(parts[0]), float(parts[1]), parts[2] == "inc")


@dataclass
class PropertyVector:
    pka: float
    viscosity: float
    vapor_pressure: float
    boiling_point: float
    melting_point: float
    log_s: float
    ra_score: float
    price: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PROPERTIES}


# -- predictors ------------------------------------------------------------


class LookupTablePredictor:
    """Canonical-SMILES keyed table; raises MissingKeyError on misses."""

    kind = "lookup"

    def __init__(self, table: dict[str, float], property_name: str = "value",
                 source_hash: str | None = None):
        self.table = dict(table)
        self.property_name = property_name
        self.source_hash = source_hash

    def predict(self, mol: Molecule) -> float:
        key = canonical_smiles(mol)
        try:
            return self.table[key]
        except KeyError:
            raise MissingKeyError(key) from None


class KnnFingerprintPredictor:
    """Similarity-weighted mean of the k nearest training molecules."""

    kind = "knn"

    def __init__(self, train_fps, values, k: int = 5,
                 property_name: str = "value", source_hash: str | None = None):
        self.matrix = fingerprint.pack_matrix(train_fps)
        self.values = np.asarray(values, dtype=np.float64)
        if len(self.values) != len(self.matrix):
            raise ValueError("fingerprint/value length mismatch")
        self.k = k
        self.width = train_fps[0].width
        self.property_name = property_name
        self.source_hash = source_hash

    def predict(self, mol: Molecule) -> float:
        from . import kernels
        fp = fingerprint.ecfp(mol, width=self.width)
        sims = kernels.sims_one_to_many(fp.words, self.matrix)
        k = min(self.k, len(sims))
        # stable ordering: descending similarity, ascending index
        order = np.lexsort((np.arange(len(sims)), -sims))[:k]
        top_sims = sims[order]
        top_vals = self.values[order]
        if k == 1:
            return float(top_vals[0])
        total = top_sims.sum()
        if total <= 0:
            return float(top_vals.mean())
        return float((top_sims * top_vals).sum() / total)


class RidgeFingerprintPredictor:
    """Linear model over fingerprint bits: w . bits + b.

    Models trained with a temperature feature are queried at the standard
    temperature, where the shifted feature is 0 and the bias absorbs it."""

    kind = "ridge"

    def __init__(self, weights, bias: float, width: int = fingerprint.DEFAULT_WIDTH,
                 property_name: str = "value", source_hash: str | None = None):
        self.weights = np.asarray(weights, dtype=np.float64)[:width]
        self.bias = float(bias)
        self.width = width
        self.property_name = property_name
        self.source_hash = source_hash

    def predict(self, mol: Molecule) -> float:
        fp = fingerprint.ecfp(mol, width=self.width)
        x = np.zeros(self.width, dtype=np.float64)
        x[fp.bit_ids()] = 1.0
        return float(self.weights @ x + self.bias)


def predict(predictor, mol: Molecule) -> float:
    return predictor.predict(mol)


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_rows(path, value_column: str = "value"):
    """smiles,<value_column>[,temperature] rows plus metadata from '#'
    comments.  A non-default value column lets one multi-property table
    back several lookup predictors."""
    property_name = value_column if value_column != "value" else "value"
    with open(path, "r", encoding="utf-8", newline="") as fh:
        content = [line for line in fh]
    data_lines = []
    for line in content:
        if line.startswith("#"):
            for part in line[1:].strip().split():
                if part.startswith("property="):
                    property_name = part.split("=", 1)[1]
            continue
        if line.strip():
            data_lines.append(line)
    reader = csv.DictReader(data_lines)
    if reader.fieldnames is None or "smiles" not in reader.fieldnames \
            or value_column not in reader.fieldnames:
        raise ValueError(
            f"{path}: predictor CSV needs smiles,{value_column} columns")
    rows = []
    for rec in reader:
        temp = rec.get("temperature")
        rows.append((rec["smiles"], float(rec[value_column]),
                     float(temp) if temp not in (None, "") else None))
    return rows, property_name


def load_lookup_csv(path, property_name: str | None = None,
                    value_column: str = "value") -> LookupTablePredictor:
    rows, inferred = _read_rows(path, value_column)
    table = {}
    for smiles, value, _temp in rows:
        table[canonical_smiles(parse_smiles(smiles))] = value
    return LookupTablePredictor(table, property_name or inferred,
                                source_hash=_file_sha256(path))


def build_knn_from_csv(path, k: int = 5,
                       property_name: str | None = None) -> KnnFingerprintPredictor:
    rows, inferred = _read_rows(path)
    fps, values = [], []
    for smiles, value, _temp in rows:
        fps.append(fingerprint.ecfp(parse_smiles(smiles)))
        values.append(value)
    return KnnFingerprintPredictor(fps, values, k=k,
                                   property_name=property_name or inferred,
                                   source_hash=_file_sha256(path))


def build_ridge_from_csv(path, l2: float = 1.0,
                         property_name: str | None = None) -> RidgeFingerprintPredictor:
    """Fit ridge on fingerprint bits; when the CSV carries temperatures,
    the shifted temperature joins the features at training time and the
    predictor answers at 298.15 K (feature value 0)."""
    rows, inferred = _read_rows(path)
    mols = [parse_smiles(smiles) for smiles, _, _ in rows]
    y = np.array([value for _, value, _ in rows], dtype=np.float64)
    X = qspr.featurize_bits(mols)
    if any(temp is not None for _, _, temp in rows):
        temps = np.array([
            ((temp if temp is not None else STANDARD_TEMPERATURE)
             - STANDARD_TEMPERATURE) / 100.0
            for _, _, temp in rows], dtype=np.float64)
        X = np.hstack([X, temps[:, None]])
    weights, bias = qspr.train_ridge(X, y, l2=l2)
    return RidgeFingerprintPredictor(weights, bias,
                                     property_name=property_name or inferred,
                                     source_hash=_file_sha256(path))


# -- objectives -------------------------------------------------------------


class SpoObjective(enum.Enum):
    MAX_PKA = "max_pka"
    MIN_VISCOSITY = "min_viscosity"
    MIN_VAPOR_PRESSURE = "min_vapor_pressure"


_SPO_PROPERTY = {
    SpoObjective.MAX_PKA: "pka",
    SpoObjective.MIN_VISCOSITY: "viscosity",
    SpoObjective.MIN_VAPOR_PRESSURE: "vapor_pressure",
}


def _site_mean_pka(predictor, mol: Molecule, sites) -> float:
    """Mean predicted pKa over amine sites.  Site-capable predictors may
    expose predict_sites; plain predictors contribute one molecule-level
    value at every site, so the mean collapses to that value."""
    if hasattr(predictor, "predict_sites"):
        values = predictor.predict_sites(mol, sites)
        return sum(values) / len(values)
    return predict(predictor, mol)


def _apply_penalty(score: float, mol: Molecule, restriction: Restriction,
                   amine_type: AmineType) -> tuple[float, bool]:
    if matches_restriction(amine_type, restriction):
        return score, False
    return score * PENALTY_FACTOR, True


def spo_score(mol: Molecule, objective: SpoObjective, restriction: Restriction,
              predictors: dict, scalers: dict[str, ScalerSpec] | None = None) -> float:
    """Single-property desirability in [0, 1] with the amine-type penalty."""
    amine_type = classify_amine(mol)
    if amine_type is AmineType.NOT_AMINE:
        raise NotAmineError(canonical_smiles(mol))
    scalers = scalers or default_scalers()
    prop = _SPO_PROPERTY[objective]
    predictor = predictors[prop]
    if objective is SpoObjective.MAX_PKA:
        raw = _site_mean_pka(predictor, mol, find_amine_sites(mol))
    else:
        raw = predict(predictor, mol)
    value = scale(raw, scalers[prop])
    value, _ = _apply_penalty(value, mol, restriction, amine_type)
    return value


@dataclass
class MpoResult:
    score: float
    components: dict[str, float]
    raw: dict[str, float]
    penalized: bool


def mpo_score(mol: Molecule, restriction: Restriction, predictors: dict,
              scalers: dict[str, ScalerSpec] | None = None) -> MpoResult:
    """Mean of the eight scaled components, then the amine-type penalty."""
    amine_type = classify_amine(mol)
    if amine_type is AmineType.NOT_AMINE:
        raise NotAmineError(canonical_smiles(mol))
    scalers = scalers or default_scalers()
    raw: dict[str, float] = {}
    components: dict[str, float] = {}
    for prop in PROPERTIES:
        predictor = predictors[prop]
        if prop == "pka":
            value = _site_mean_pka(predictor, mol, find_amine_sites(mol))
        else:
            value = predict(predictor, mol)
        raw[prop] = value
        components[prop] = scale(value, scalers[prop])
    mean = sum(components.values()) / len(PROPERTIES)
    score, penalized = _apply_penalty(mean, mol, restriction, amine_type)
    return MpoResult(score, components, raw, penalized)
