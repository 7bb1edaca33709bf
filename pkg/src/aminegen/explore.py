"""The exploration loop: generate, gate, score, rank into a global top-K
buffer, fine-tune the generator, repeat.

Determinism: every iteration derives fresh RNG streams from
(seed, iteration, stream-name), so a resumed run continues exactly like
an uninterrupted one, and all reductions happen in sorted order.
"""

from __future__ import annotations

import base64
import hashlib
import json
import random
from dataclasses import dataclass, field, asdict

import numpy as np

from . import fingerprint, genops, ngramgen, scoring
from .chemclass import AmineType, Restriction, classify_amine, matches_restriction
from .molgraph import Molecule, ParseError, canonical_smiles, is_radical_free, \
    parse_smiles, read_smiles_file

__all__ = [
    "RunConfig",
    "RunState",
    "IterationStats",
    "BufferEntry",
    "ConfigError",
    "PredictorLoadError",
    "CorruptCheckpointError",
    "run",
    "resume",
    "emit_reports",
    "load_config",
    "DESK_PROFILE",
    "PAPER_PROFILE",
    "STATE_FORMAT",
]

STATE_FORMAT = "aminegen-state-v1"

PAPER_PROFILE = dict(iterations=100, generator_batch=8192, ga_batch=8192,
                     buffer_size=1024)
DESK_PROFILE = dict(iterations=30, generator_batch=1024, ga_batch=1024,
                    buffer_size=256)


class ConfigError(ValueError):
    pass


class PredictorLoadError(ValueError):
    pass


class CorruptCheckpointError(ValueError):
    pass


@dataclass
class RunConfig:
    iterations: int = 100
    generator_batch: int = 8192
    ga_batch: int = 8192
    buffer_size: int = 1024
    restriction: str = "none"
    objective: str = "mpo"
    fine_tune_weight: float = 1.0
    seed: int = 0
    model_path: str = ""
    corpus_path: str = ""
    max_len: int = 80
    predictor_missing: str = "error"  # or "skip"
    predictors: dict = field(default_factory=dict)  # prop -> spec string
    scaler_overrides: dict = field(default_factory=dict)  # prop -> "lo:hi:dir"
    p_cross: float = 0.5
    max_heavy_atoms: int = 22
    retry_budget: int = 10
    mutation_weights: dict = field(default_factory=dict)  # kind value -> weight

    def batch_total(self) -> int:
        return self.generator_batch + self.ga_batch

    def restriction_enum(self) -> Restriction:
        try:
            return Restriction(self.restriction)
        except ValueError:
            raise ConfigError(f"unknown restriction {self.restriction!r}") from None

    def mutation_config(self) -> genops.MutationConfig:
        cfg = genops.MutationConfig(
            p_cross=self.p_cross,
            max_heavy_atoms=self.max_heavy_atoms,
            retry_budget=self.retry_budget,
        )
        for kind_value, weight in self.mutation_weights.items():
            try:
                kind = genops.MutationKind(kind_value)
            except ValueError:
                raise ConfigError(f"unknown mutation kind {kind_value!r}") from None
            cfg.weights[kind] = float(weight)
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)


_SCALAR_KEYS = {
    "iterations": int,
    "generator_batch": int,
    "ga_batch": int,
    "buffer_size": int,
    "restriction": str,
    "objective": str,
    "lambda": float,
    "seed": int,
    "model": str,
    "corpus": str,
    "max_len": int,
    "predictor_missing": str,
    "p_cross": float,
    "max_heavy_atoms": int,
    "retry_budget": int,
}

_KEY_TO_FIELD = {"lambda": "fine_tune_weight", "model": "model_path",
                 "corpus": "corpus_path"}


def load_config(path) -> RunConfig:
    """Flat key=value file.  'profile=desk|paper' expands batch defaults;
    'predictor.<prop>=', 'scaler.<prop>=' and 'weight.<mutation>=' set the
    corresponding tables.  Unknown keys are errors."""
    entries: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            entries.append((key.strip(), value.strip()))
    config = RunConfig()
    profile = [v for k, v in entries if k == "profile"]
    if profile:
        name = profile[-1]
        if name == "desk":
            defaults = DESK_PROFILE
        elif name == "paper":
            defaults = PAPER_PROFILE
        else:
            raise ConfigError(f"unknown profile {name!r}")
        for key, value in defaults.items():
            setattr(config, key, value)
    explicit_batch_total = None
    for key, value in entries:
        if key == "profile":
            continue
        if key == "batch_total":
            explicit_batch_total = int(value)
            continue
        if key.startswith("predictor."):
            config.predictors[key[len("predictor."):]] = value
            continue
        if key.startswith("scaler."):
            config.scaler_overrides[key[len("scaler."):]] = value
            continue
        if key.startswith("weight."):
            config.mutation_weights[key[len("weight."):]] = float(value)
            continue
        if key not in _SCALAR_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        caster = _SCALAR_KEYS[key]
        setattr(config, _KEY_TO_FIELD.get(key, key), caster(value))
    if explicit_batch_total is not None \
            and explicit_batch_total != config.batch_total():
        raise ConfigError(
            f"batch_total={explicit_batch_total} does not equal "
            f"generator_batch+ga_batch={config.batch_total()}")
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if config.iterations < 0:
        raise ConfigError("iterations must be >= 0")
    if config.generator_batch < 0 or config.ga_batch < 0:
        raise ConfigError("batch sizes must be >= 0")
    if config.buffer_size <= 0:
        raise ConfigError("buffer_size must be > 0")
    if config.predictor_missing not in ("error", "skip"):
        raise ConfigError("predictor_missing must be 'error' or 'skip'")
    if config.ga_batch > 0 and config.generator_batch == 0 \
            and not config.corpus_path:
        raise ConfigError("GA-only mode needs corpus= for initial seeding")
    config.restriction_enum()
    _parse_objective_kind(config.objective)


def _parse_objective_kind(text: str):
    if text == "mpo":
        return ("mpo", None)
    if text.startswith("similarity:"):
        target = text.split(":", 1)[1]
        if not target:
            raise ConfigError("similarity objective needs a target SMILES")
        return ("similarity", target)
    try:
        return ("spo", scoring.SpoObjective(text))
    except ValueError:
        raise ConfigError(f"unknown objective {text!r}") from None


# -- predictors -------------------------------------------------------------


_PREDICTOR_CACHE: dict = {}


def _load_predictor(spec: str):
    """Spec syntax kind:path[?key=value,...] with kind in lookup|knn|ridge.

    Loads are cached by (spec, file content hash), so repeated runs over
    the same table skip the parse."""
    kind, _, rest = spec.partition(":")
    if not rest:
        raise PredictorLoadError(f"bad predictor spec {spec!r}")
    if kind not in ("lookup", "knn", "ridge"):
        raise PredictorLoadError(f"unknown predictor kind {kind!r}")
    path, _, params_text = rest.partition("?")
    params = {}
    if params_text:
        for pair in params_text.split(","):
            key, _, value = pair.partition("=")
            params[key] = value
    try:
        cache_key = (spec, _file_hash(path))
        cached = _PREDICTOR_CACHE.get(cache_key)
        if cached is not None:
            return cached
        if kind == "lookup":
            predictor = scoring.load_lookup_csv(
                path, value_column=params.pop("column", "value"))
        elif kind == "knn":
            predictor = scoring.build_knn_from_csv(path,
                                                   k=int(params.pop("k", 5)))
        else:
            predictor = scoring.build_ridge_from_csv(
                path, l2=float(params.pop("l2", 1.0)))
        _PREDICTOR_CACHE[cache_key] = predictor
        return predictor
    except (OSError, ValueError, ParseError) as exc:
        raise PredictorLoadError(f"{spec}: {exc}") from exc


def _build_scalers(config: RunConfig) -> dict:
    scalers = scoring.default_scalers()
    for prop, text in config.scaler_overrides.items():
        if prop not in scalers:
            raise ConfigError(f"unknown scaler property {prop!r}")
        scalers[prop] = scoring.parse_scaler_override(text)
    return scalers


def _build_objective(config: RunConfig):
    """Returns (score_fn, predictors) where score_fn(mol) gives
    (score, components) and may raise MissingKeyError."""
    kind, detail = _parse_objective_kind(config.objective)
    restriction = config.restriction_enum()
    scalers = _build_scalers(config)
    predictors = {prop: _load_predictor(spec)
                  for prop, spec in config.predictors.items()}

    if kind == "similarity":
        try:
            target_fp = fingerprint.ecfp(parse_smiles(detail))
        except ParseError as exc:
            raise ConfigError(f"objective target does not parse: {exc}") from exc

        def score_similarity(mol: Molecule):
            sim = fingerprint.tanimoto(fingerprint.ecfp(mol), target_fp)
            return sim, {"similarity": sim}

        return score_similarity, predictors

    if kind == "spo":
        prop = {scoring.SpoObjective.MAX_PKA: "pka",
                scoring.SpoObjective.MIN_VISCOSITY: "viscosity",
                scoring.SpoObjective.MIN_VAPOR_PRESSURE: "vapor_pressure"}[detail]
        if prop not in predictors:
            raise ConfigError(f"objective {config.objective} needs predictor.{prop}")

        def score_spo(mol: Molecule):
            value = scoring.spo_score(mol, detail, restriction, predictors,
                                      scalers)
            return value, {prop: value}

        return score_spo, predictors

    missing = [p for p in scoring.PROPERTIES if p not in predictors]
    if missing:
        raise ConfigError(f"mpo objective needs predictors for {missing}")

    def score_mpo(mol: Molecule):
        result = scoring.mpo_score(mol, restriction, predictors, scalers)
        return result.score, result.components

    return score_mpo, predictors


# -- state -------------------------------------------------------------------


@dataclass
class BufferEntry:
    smiles: str
    score: float
    components: dict


@dataclass
class IterationStats:
    iteration: int
    generated: int
    valid: int
    amine: int
    restriction_pass: int
    score_min: float
    score_q1: float
    score_median: float
    score_q3: float
    score_max: float
    buffer_best: float


@dataclass
class RunState:
    config: RunConfig
    iteration: int = 0
    buffer: list = field(default_factory=list)  # list[BufferEntry], sorted
    stats: list = field(default_factory=list)  # list[IterationStats]
    model: ngramgen.GeneratorModel | None = None

    def best_score(self) -> float:
        return self.buffer[0].score if self.buffer else 0.0


def _rng(seed: int, iteration: int, stream: str) -> random.Random:
    return random.Random(f"{seed}:{iteration}:{stream}")


def _merge_buffer(buffer, scored, buffer_size: int):
    """Global top-K by (score desc, canonical asc), unique canonicals."""
    combined = {}
    for entry in buffer:
        combined[entry.smiles] = entry
    for entry in scored:
        combined.setdefault(entry.smiles, entry)
    ranked = sorted(combined.values(), key=lambda e: (-e.score, e.smiles))
    return ranked[:buffer_size]


def _quartiles(values):
    if not values:
        return (0.0, 0.0, 0.0, 0.0, 0.0)
    q = np.percentile(np.asarray(values, dtype=np.float64),
                      [0, 25, 50, 75, 100])
    return tuple(float(x) for x in q)


def run(config: RunConfig, out_dir=None,
        model: ngramgen.GeneratorModel | None = None,
        stop_condition=None) -> RunState:
    """Execute the configured number of iterations from scratch.

    ``stop_condition(state)``, when given, is checked after each iteration
    and ends the run early without affecting per-iteration results."""
    if model is None and config.model_path:
        model = ngramgen.load_model(config.model_path)
    if model is None and config.generator_batch > 0:
        raise ConfigError("generator_batch > 0 requires a model")
    state = RunState(config=config, model=model)
    return _run_from(state, out_dir, stop_condition)


def _run_from(state: RunState, out_dir=None, stop_condition=None) -> RunState:
    if out_dir is not None:
        import os
        os.makedirs(out_dir, exist_ok=True)
    config = state.config
    score_fn, predictors = _build_objective(config)
    restriction = config.restriction_enum()
    mutation_config = config.mutation_config()
    corpus_mols: list[Molecule] | None = None
    score_cache: dict[str, tuple] = {
        e.smiles: (e.score, e.components) for e in state.buffer}

    def corpus() -> list[Molecule]:
        nonlocal corpus_mols
        if corpus_mols is None:
            if not config.corpus_path:
                raise ConfigError("GA seeding requires corpus= in the config")
            corpus_mols = []
            for s in read_smiles_file(config.corpus_path):
                try:
                    corpus_mols.append(parse_smiles(s))
                except ParseError:
                    continue
        return corpus_mols

    while state.iteration < config.iterations:
        it = state.iteration
        generated = 0
        parsed: list[Molecule] = []

        if config.generator_batch > 0 and state.model is not None:
            raw = ngramgen.sample(state.model, config.generator_batch,
                                  _rng(config.seed, it, "sample"),
                                  max_len=config.max_len)
            generated += len(raw)
            for s in raw:
                try:
                    mol = parse_smiles(s, allow_radicals=True)
                except ParseError:
                    continue
                if not is_radical_free(mol):
                    continue
                parsed.append(mol)

        amine_mols: list[Molecule] = []
        amine_types: list[AmineType] = []
        for mol in parsed:
            amine_type = classify_amine(mol)
            if amine_type is not AmineType.NOT_AMINE:
                amine_mols.append(mol)
                amine_types.append(amine_type)

        if config.ga_batch > 0:
            pool = [parse_smiles(e.smiles) for e in state.buffer]
            pool.extend(amine_mols)
            if not pool and config.corpus_path:
                pool_rng = _rng(config.seed, it, "pool")
                pool_corpus = corpus()
                take = min(len(pool_corpus), config.batch_total())
                pool = pool_rng.sample(pool_corpus, take) if take else []
            if pool:
                stats = genops.OpStats()
                offspring = genops.diversify_batch(
                    pool, config.ga_batch, _rng(config.seed, it, "ga"),
                    mutation_config, stats=stats)
                generated += stats.attempted
                for mol in offspring:
                    amine_type = classify_amine(mol)
                    parsed.append(mol)
                    if amine_type is not AmineType.NOT_AMINE:
                        amine_mols.append(mol)
                        amine_types.append(amine_type)

        restriction_pass = sum(
            1 for t in amine_types if matches_restriction(t, restriction))

        scored: list[BufferEntry] = []
        seen_this_iter = set()
        scores_this_iter: list[float] = []
        for mol in amine_mols:
            key = canonical_smiles(mol)
            if key in seen_this_iter:
                continue
            seen_this_iter.add(key)
            cached = score_cache.get(key)
            if cached is None:
                try:
                    cached = score_fn(mol)
                except scoring.MissingKeyError:
                    if config.predictor_missing == "skip":
                        continue
                    raise
                score_cache[key] = cached
            scored.append(BufferEntry(key, cached[0], dict(cached[1])))
            scores_this_iter.append(cached[0])

        state.buffer = _merge_buffer(state.buffer, scored, config.buffer_size)

        q = _quartiles(scores_this_iter)
        state.stats.append(IterationStats(
            iteration=it, generated=generated, valid=len(parsed),
            amine=len(amine_mols), restriction_pass=restriction_pass,
            score_min=q[0], score_q1=q[1], score_median=q[2],
            score_q3=q[3], score_max=q[4], buffer_best=state.best_score()))

        if state.model is not None and config.fine_tune_weight > 0 \
                and state.buffer:
            state.model = ngramgen.fine_tune(
                state.model, [(e.smiles, e.score) for e in state.buffer],
                config.fine_tune_weight)

        state.iteration = it + 1
        if out_dir is not None:
            save_state(state, _state_path(out_dir))
        if stop_condition is not None and stop_condition(state):
            break

    if out_dir is not None:
        save_state(state, _state_path(out_dir))
        emit_reports(state, out_dir, predictors)
    return state


# -- checkpointing ------------------------------------------------------------


def _state_path(out_dir):
    import os
    return os.path.join(out_dir, "state.json")


def save_state(state: RunState, path) -> None:
    payload = {
        "format": STATE_FORMAT,
        "config": state.config.to_dict(),
        "iteration": state.iteration,
        "buffer": [[e.smiles, e.score, e.components] for e in state.buffer],
        "stats": [asdict(s) for s in state.stats],
        "model_b64": (base64.b64encode(
            ngramgen.model_to_bytes(state.model)).decode("ascii")
            if state.model is not None else None),
    }
    text = json.dumps(payload, sort_keys=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_state(path) -> RunState:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: {exc}") from exc
    if payload.get("format") != STATE_FORMAT:
        raise CorruptCheckpointError(f"{path}: unknown state format")
    try:
        config = RunConfig(**payload["config"])
        buffer = [BufferEntry(s, score, comps)
                  for s, score, comps in payload["buffer"]]
        stats = [IterationStats(**row) for row in payload["stats"]]
        model = None
        if payload.get("model_b64") is not None:
            model = ngramgen.model_from_bytes(
                base64.b64decode(payload["model_b64"]))
        return RunState(config=config, iteration=int(payload["iteration"]),
                        buffer=buffer, stats=stats, model=model)
    except (KeyError, TypeError, ValueError,
            ngramgen.ModelFormatError) as exc:
        raise CorruptCheckpointError(f"{path}: {exc}") from exc


def resume(state_path, out_dir=None) -> tuple[RunState, bool]:
    """Continue a checkpointed run; returns (state, was_finished)."""
    state = load_state(state_path)
    if state.iteration >= state.config.iterations:
        return state, True
    return _run_from(state, out_dir), False


# -- reports ------------------------------------------------------------------


def _format_float(x: float) -> str:
    return f"{x:.6f}"


def emit_reports(state: RunState, out_dir, predictors: dict | None = None) -> None:
    """stats.csv (per-iteration), buffer.csv (ranked), manifest.json."""
    import os
    os.makedirs(out_dir, exist_ok=True)
    stats_lines = ["iteration,generated,valid,amine,restriction_pass,"
                   "score_min,score_q1,score_median,score_q3,score_max,"
                   "buffer_best"]
    for s in state.stats:
        stats_lines.append(",".join([
            str(s.iteration), str(s.generated), str(s.valid), str(s.amine),
            str(s.restriction_pass), _format_float(s.score_min),
            _format_float(s.score_q1), _format_float(s.score_median),
            _format_float(s.score_q3), _format_float(s.score_max),
            _format_float(s.buffer_best)]))
    with open(os.path.join(out_dir, "stats.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(stats_lines) + "\n")

    component_names = sorted({name for e in state.buffer
                              for name in e.components})
    buffer_lines = ["rank,smiles,score" +
                    ("," + ",".join(component_names) if component_names else "")]
    for rank, entry in enumerate(state.buffer, start=1):
        row = [str(rank), entry.smiles, _format_float(entry.score)]
        for name in component_names:
            value = entry.components.get(name)
            row.append(_format_float(value) if value is not None else "")
        buffer_lines.append(",".join(row))
    with open(os.path.join(out_dir, "buffer.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(buffer_lines) + "\n")

    manifest = {
        "format": STATE_FORMAT,
        "config": state.config.to_dict(),
        "model_format": ngramgen.MODEL_MAGIC.decode("ascii"),
        "fine_tune": "counts += lambda * counts(buffer) after each iteration",
        "predictor_hashes": {},
    }
    if predictors:
        for prop in sorted(predictors):
            pred = predictors[prop]
            manifest["predictor_hashes"][prop] = getattr(pred, "source_hash", None)
    if state.config.model_path:
        try:
            manifest["model_hash"] = _file_hash(state.config.model_path)
        except OSError:
            manifest["model_hash"] = None
    text = json.dumps(manifest, sort_keys=True, indent=2)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def _file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
