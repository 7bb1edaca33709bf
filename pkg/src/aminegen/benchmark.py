"""Goal-directed benchmark tasks: rediscovery, similarity, median
similarity, and isomer generation, with suite-level reporting.

Candidates are deduplicated by canonical SMILES before any aggregation,
so repeats never inflate a score.
"""

from __future__ import annotations

import csv
import enum
import importlib.resources
from dataclasses import dataclass, field

from . import fingerprint
from .molgraph import Molecule, ParseError, canonical_smiles, molecular_formula, \
    parse_formula, parse_smiles

__all__ = [
    "TaskKind",
    "BenchmarkTask",
    "TaskScore",
    "SuiteReport",
    "score_task",
    "score_rediscovery",
    "score_similarity",
    "score_median_similarity",
    "score_isomer",
    "run_suite",
    "reference_amines",
    "default_suite",
    "load_tasks",
    "replay_pipeline",
    "suite_report_csv",
]

TOP_N = 100
SIM_THRESHOLD = 0.7


class TaskKind(enum.Enum):
    REDISCOVERY = "rediscovery"
    SIMILARITY = "similarity"
    MEDIAN_SIMILARITY = "median_similarity"
    ISOMER = "isomer"


@dataclass(frozen=True)
class BenchmarkTask:
    kind: TaskKind
    name: str
    targets: tuple[str, ...] = ()  # canonical SMILES
    formula: str = ""
    amine_type: str = ""
    top_n: int = TOP_N
    sim_threshold: float = SIM_THRESHOLD

    def __post_init__(self):
        if self.kind is TaskKind.MEDIAN_SIMILARITY and len(self.targets) != 2:
            raise ValueError("median similarity needs exactly two targets")
        if self.kind is TaskKind.ISOMER and not self.formula:
            raise ValueError("isomer task needs a molecular formula")
        if self.kind in (TaskKind.REDISCOVERY, TaskKind.SIMILARITY) \
                and len(self.targets) != 1:
            raise ValueError(f"{self.kind.value} needs exactly one target")


@dataclass
class TaskScore:
    value: float
    contributors: list = field(default_factory=list)  # (canonical, score)


def _distinct_candidates(candidates) -> list[Molecule]:
    """Parse and deduplicate candidates; unparseable entries are skipped."""
    seen = set()
    out = []
    for item in candidates:
        if isinstance(item, Molecule):
            mol = item
        else:
            try:
                mol = parse_smiles(item)
            except ParseError:
                continue
        key = canonical_smiles(mol)
        if key in seen:
            continue
        seen.add(key)
        out.append(mol)
    return out


def score_rediscovery(task: BenchmarkTask, candidates) -> TaskScore:
    """Maximum Tanimoto to the target; an exact canonical match scores 1."""
    target = parse_smiles(task.targets[0])
    target_key = canonical_smiles(target)
    target_fp = fingerprint.ecfp(target)
    mols = _distinct_candidates(candidates)
    best = 0.0
    best_key = None
    for mol in mols:
        key = canonical_smiles(mol)
        if key == target_key:
            return TaskScore(1.0, [(key, 1.0)])
        sim = fingerprint.tanimoto(fingerprint.ecfp(mol), target_fp)
        if sim > best:
            best = sim
            best_key = key
    contributors = [(best_key, best)] if best_key else []
    return TaskScore(best, contributors)


def _top_similarity(per_mol: list[tuple[str, float]], top_n: int,
                    threshold: float) -> TaskScore:
    """Candidates above the threshold, top N by score; mean over the
    selected set, 0 when none qualify."""
    qualifying = [(key, s) for key, s in per_mol if s > threshold]
    qualifying.sort(key=lambda t: (-t[1], t[0]))
    chosen = qualifying[:top_n]
    if not chosen:
        return TaskScore(0.0, [])
    return TaskScore(sum(s for _, s in chosen) / len(chosen), chosen)


def score_similarity(task: BenchmarkTask, candidates) -> TaskScore:
    target_fp = fingerprint.ecfp(parse_smiles(task.targets[0]))
    per_mol = []
    for mol in _distinct_candidates(candidates):
        sim = fingerprint.tanimoto(fingerprint.ecfp(mol), target_fp)
        per_mol.append((canonical_smiles(mol), sim))
    return _top_similarity(per_mol, task.top_n, task.sim_threshold)


def score_median_similarity(task: BenchmarkTask, candidates) -> TaskScore:
    """Per-candidate score is the arithmetic mean of the Tanimoto to each
    of the two targets, then the same top-N aggregation as similarity."""
    fps = [fingerprint.ecfp(parse_smiles(t)) for t in task.targets]
    per_mol = []
    for mol in _distinct_candidates(candidates):
        fp = fingerprint.ecfp(mol)
        sims = [fingerprint.tanimoto(fp, t) for t in fps]
        per_mol.append((canonical_smiles(mol), sum(sims) / len(sims)))
    return _top_similarity(per_mol, task.top_n, task.sim_threshold)


def score_isomer(task: BenchmarkTask, candidates) -> TaskScore:
    """Binary formula match per candidate; mean over the top N distinct
    candidates ranked by score then canonical order."""
    want = parse_formula(task.formula)
    per_mol = []
    for mol in _distinct_candidates(candidates):
        match = 1.0 if molecular_formula(mol) == want else 0.0
        per_mol.append((canonical_smiles(mol), match))
    per_mol.sort(key=lambda t: (-t[1], t[0]))
    chosen = per_mol[:task.top_n]
    if not chosen:
        return TaskScore(0.0, [])
    return TaskScore(sum(s for _, s in chosen) / len(chosen), chosen)


_SCORERS = {
    TaskKind.REDISCOVERY: score_rediscovery,
    TaskKind.SIMILARITY: score_similarity,
    TaskKind.MEDIAN_SIMILARITY: score_median_similarity,
    TaskKind.ISOMER: score_isomer,
}


def score_task(task: BenchmarkTask, candidates) -> TaskScore:
    return _SCORERS[task.kind](task, candidates)


def reference_amines() -> list[dict]:
    """The packaged table of reference amines (name, smiles, amine_type,
    benchmark)."""
    path = importlib.resources.files("aminegen.data") / "reference_amines.csv"
    with path.open("r", encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(rows))


ISOMER_FORMULAS = ("C4H11NO", "C4H11NO2", "C5H12N2", "C6H15NO")


def default_suite() -> list[BenchmarkTask]:
    """The full 27-task suite: 10 rediscovery, 10 similarity, 3 median
    similarity pairs, 4 isomer formulas."""
    refs = reference_amines()
    tasks = []
    for row in refs:
        canon = canonical_smiles(parse_smiles(row["smiles"]))
        if row["benchmark"] == "rediscovery":
            tasks.append(BenchmarkTask(TaskKind.REDISCOVERY, row["name"],
                                       (canon,), amine_type=row["amine_type"]))
        elif row["benchmark"] == "similarity":
            tasks.append(BenchmarkTask(TaskKind.SIMILARITY, row["name"],
                                       (canon,), amine_type=row["amine_type"]))
    med = [r for r in refs if r["benchmark"] == "median_similarity"]
    for i in range(len(med)):
        for j in range(i + 1, len(med)):
            a, b = med[i], med[j]
            tasks.append(BenchmarkTask(
                TaskKind.MEDIAN_SIMILARITY, f"{a['name']} and {b['name']}",
                (canonical_smiles(parse_smiles(a["smiles"])),
                 canonical_smiles(parse_smiles(b["smiles"])))))
    for formula in ISOMER_FORMULAS:
        tasks.append(BenchmarkTask(TaskKind.ISOMER, formula, formula=formula))
    return tasks


def load_tasks(path) -> list[BenchmarkTask]:
    """Task file: one task per line, 'kind;targets;params'.  Targets are
    comma-separated SMILES, or a molecular formula for isomer tasks;
    params are comma-separated key=value pairs (name, top_n,
    sim_threshold, amine_type)."""
    tasks = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(";")
            if len(parts) < 2:
                raise ValueError(f"line {lineno}: expected kind;targets[;params]")
            kind = TaskKind(parts[0].strip())
            params: dict = {}
            if len(parts) > 2 and parts[2].strip():
                for pair in parts[2].split(","):
                    key, _, value = pair.partition("=")
                    params[key.strip()] = value.strip()
            name = params.pop("name", parts[1].strip())
            kwargs = {}
            if "top_n" in params:
                kwargs["top_n"] = int(params.pop("top_n"))
            if "sim_threshold" in params:
                kwargs["sim_threshold"] = float(params.pop("sim_threshold"))
            if "amine_type" in params:
                kwargs["amine_type"] = params.pop("amine_type")
            if params:
                raise ValueError(f"line {lineno}: unknown params {sorted(params)}")
            if kind is TaskKind.ISOMER:
                tasks.append(BenchmarkTask(kind, name, formula=parts[1].strip(),
                                           **kwargs))
            else:
                targets = tuple(canonical_smiles(parse_smiles(t.strip()))
                                for t in parts[1].split(","))
                tasks.append(BenchmarkTask(kind, name, targets, **kwargs))
    return tasks


@dataclass
class SuiteReport:
    rows: list  # (task, TaskScore)
    total: float

    def subtotal(self, kind: TaskKind) -> float:
        return sum(score.value for task, score in self.rows if task.kind is kind)


def run_suite(tasks, pipeline, budget: int) -> SuiteReport:
    """Score every task on candidates from ``pipeline(task, budget)``."""
    rows = []
    for task in tasks:
        candidates = pipeline(task, budget)
        rows.append((task, score_task(task, candidates)))
    total = sum(score.value for _, score in rows)
    return SuiteReport(rows, total)


def replay_pipeline(candidates):
    """A pipeline that replays a fixed candidate list for every task."""
    candidates = list(candidates)

    def pipeline(task, budget):
        return candidates if budget <= 0 else candidates[:budget]

    return pipeline


def suite_report_csv(report: SuiteReport) -> str:
    lines = ["Task,Name,AmineType,Score"]
    for task, score in report.rows:
        lines.append(",".join([
            task.kind.value, task.name, task.amine_type,
            f"{score.value:.3f}"]))
    lines.append(f"Total,,,{report.total:.3f}")
    return "\n".join(lines) + "\n"
