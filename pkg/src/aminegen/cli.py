"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error (bad SMILES, bad
files), 3 runtime error.  Data goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import random
import sys

from . import __version__, benchmark, explore, fingerprint, ngramgen, qspr, scoring
from .chemclass import classify_amine
from .molgraph import ParseError, canonical_smiles, format_formula, \
    molecular_formula, molecular_weight, parse_smiles, read_smiles_file

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _version_text() -> str:
    return (f"aminegen {__version__} "
            f"(model format {ngramgen.MODEL_MAGIC.decode()}, "
            f"state format {explore.STATE_FORMAT}, "
            f"kernels {fingerprint.kernels.BACKEND})")


def build_parser() -> _Parser:
    parser = _Parser(prog="sage", description=__doc__)
    parser.add_argument("--version", action="version", version=_version_text())
    parser.add_argument("--threads", type=int, default=None,
                        help="cap kernel parallelism (numba threading layer)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("canonical", help="canonicalize SMILES")
    p.add_argument("smiles", nargs="*")
    p.add_argument("--input", help="file with one SMILES per line")

    p = sub.add_parser("classify", help="amine class of each molecule")
    p.add_argument("smiles", nargs="*")
    p.add_argument("--input")

    p = sub.add_parser("fingerprint", help="hex fingerprint and popcount")
    p.add_argument("smiles", nargs="*")
    p.add_argument("--input")
    p.add_argument("--radius", type=int, default=fingerprint.DEFAULT_RADIUS)
    p.add_argument("--width", type=int, default=fingerprint.DEFAULT_WIDTH)

    p = sub.add_parser("formula", help="molecular formula and weight")
    p.add_argument("smiles", nargs="*")
    p.add_argument("--input")

    p = sub.add_parser("metrics", help="distribution metrics of a sample")
    p.add_argument("--samples", required=True)
    p.add_argument("--training", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("pretrain", help="train the n-gram generator")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=6)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--val-fraction", type=float, default=0.0,
                   help="hold out this fraction and report its perplexity")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("sample", help="sample SMILES from a model")
    p.add_argument("--model", required=True)
    p.add_argument("-n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-len", type=int, default=80)

    p = sub.add_parser("qspr-train", help="cross-validate a property model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=("knn", "ridge"), required=True)
    p.add_argument("--grid", default="",
                   help="e.g. 'k=1,3,5' or 'l2=0.1,1.0'")
    p.add_argument("--out", help="write the fitted predictor (npz)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=5)

    p = sub.add_parser("qspr-predict", help="predict with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("smiles", nargs="*")
    p.add_argument("--input")

    p = sub.add_parser("benchmark", help="score the goal-directed suite")
    p.add_argument("--candidates", required=True,
                   help="replay file, one SMILES per line")
    p.add_argument("--tasks", help="task file; defaults to the full suite")
    p.add_argument("--budget", type=int, default=0,
                   help="truncate candidates per task (0 = all)")
    p.add_argument("--out", help="write the report CSV here as well")

    p = sub.add_parser("run", help="run the exploration loop")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("resume", help="continue a checkpointed run")
    p.add_argument("--state", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="re-emit reports from a checkpoint")
    p.add_argument("--state", required=True)
    p.add_argument("--out", required=True)
    return parser


def _gather_smiles(args) -> list[str]:
    items = list(args.smiles)
    if args.input:
        items.extend(read_smiles_file(args.input))
    if not items:
        raise _UsageError("no SMILES given (positional or --input)")
    return items


def _cmd_canonical(args) -> int:
    for s in _gather_smiles(args):
        print(canonical_smiles(parse_smiles(s)))
    return EXIT_OK


def _cmd_classify(args) -> int:
    for s in _gather_smiles(args):
        print(classify_amine(parse_smiles(s)).value)
    return EXIT_OK


def _cmd_fingerprint(args) -> int:
    for s in _gather_smiles(args):
        fp = fingerprint.ecfp(parse_smiles(s), args.radius, args.width)
        print(f"{fp.hex()} {fp.popcount}")
    return EXIT_OK


def _cmd_formula(args) -> int:
    for s in _gather_smiles(args):
        mol = parse_smiles(s)
        print(f"{format_formula(molecular_formula(mol))} "
              f"{molecular_weight(mol):.3f}")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    samples = read_smiles_file(args.samples)
    training = set()
    for s in read_smiles_file(args.training):
        try:
            training.add(canonical_smiles(parse_smiles(s)))
        except ParseError:
            continue
    m = ngramgen.distribution_metrics(samples, training, seed=args.seed)
    row = m.as_row()
    writer = csv.writer(sys.stdout)
    writer.writerow(row.keys())
    writer.writerow(f"{v:.3f}" if isinstance(v, float) else v
                    for v in row.values())
    return EXIT_OK


def _cmd_pretrain(args) -> int:
    corpus = read_smiles_file(args.corpus)
    val: list[str] = []
    if args.val_fraction > 0:
        corpus, val = ngramgen.split_corpus(corpus, args.val_fraction, args.seed)
    model = ngramgen.train(corpus, order=args.order, alpha=args.alpha)
    ngramgen.save_model(model, args.out)
    print(f"trained order-{args.order} model on {len(corpus)} molecules "
          f"-> {args.out}", file=sys.stderr)
    if val:
        print(f"validation perplexity ({len(val)} held out): "
              f"{ngramgen.perplexity(model, val):.3f}", file=sys.stderr)
    return EXIT_OK


def _cmd_sample(args) -> int:
    model = ngramgen.load_model(args.model)
    for s in ngramgen.sample(model, args.n, random.Random(args.seed),
                             max_len=args.max_len):
        print(s)
    return EXIT_OK


def _parse_grid(text: str) -> dict:
    grid: dict = {}
    if not text:
        return grid
    for part in text.split(";"):
        key, _, values = part.partition("=")
        if not values:
            raise _UsageError(f"bad grid spec {part!r}")
        grid[key.strip()] = [float(v) for v in values.split(",")]
    return grid


def _cmd_qspr_train(args) -> int:
    ds = qspr.load_dataset(args.data)
    for warning in ds.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    grid = _parse_grid(args.grid)
    if grid:
        report, _all = qspr.grid_search(ds, args.model, grid, k=args.folds,
                                        seed=args.seed)
    else:
        report = qspr.cross_validate(ds, args.model, {}, k=args.folds,
                                     seed=args.seed)
    task = ds.property_name + (f" [{ds.unit}]" if ds.unit else "")
    sys.stdout.write(qspr.cv_report_csv(report, task, f"ECFP/{args.model}"))
    if args.out:
        _save_predictor(args, ds, report)
        print(f"saved {args.model} predictor -> {args.out}", file=sys.stderr)
    return EXIT_OK


def _save_predictor(args, ds, report) -> None:
    import numpy as np

    hyper = report.hyperparams
    if args.model == "ridge":
        X = qspr.featurize_bits([r.mol for r in ds.rows])
        weights, bias = qspr.train_ridge(X, ds.values(),
                                         l2=float(hyper.get("l2", 1.0)))
        np.savez(args.out, kind="ridge", weights=weights, bias=bias,
                 width=fingerprint.DEFAULT_WIDTH,
                 property_name=ds.property_name)
    else:
        fps = [fingerprint.ecfp(r.mol) for r in ds.rows]
        np.savez(args.out, kind="knn",
                 matrix=fingerprint.pack_matrix(fps),
                 values=ds.values(), k=int(hyper.get("k", 5)),
                 width=fingerprint.DEFAULT_WIDTH,
                 property_name=ds.property_name)


def _load_saved_predictor(path):
    import numpy as np

    data = np.load(path, allow_pickle=False)
    kind = str(data["kind"])
    if kind == "ridge":
        return scoring.RidgeFingerprintPredictor(
            data["weights"], float(data["bias"]), int(data["width"]),
            str(data["property_name"]))
    if kind == "knn":
        pred = scoring.KnnFingerprintPredictor.__new__(
            scoring.KnnFingerprintPredictor)
        pred.matrix = data["matrix"]
        pred.values = data["values"]
        pred.k = int(data["k"])
        pred.width = int(data["width"])
        pred.property_name = str(data["property_name"])
        pred.source_hash = None
        return pred
    raise ValueError(f"unknown predictor kind {kind!r} in {path}")


def _cmd_qspr_predict(args) -> int:
    predictor = _load_saved_predictor(args.model)
    for s in _gather_smiles(args):
        value = scoring.predict(predictor, parse_smiles(s))
        print(f"{value:.6f}")
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    tasks = benchmark.load_tasks(args.tasks) if args.tasks \
        else benchmark.default_suite()
    candidates = read_smiles_file(args.candidates)
    pipeline = benchmark.replay_pipeline(candidates)
    report = benchmark.run_suite(tasks, pipeline, args.budget)
    text = benchmark.suite_report_csv(report)
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def _cmd_run(args) -> int:
    config = explore.load_config(args.config)
    import os
    os.makedirs(args.out, exist_ok=True)
    state = explore.run(config, out_dir=args.out)
    print(f"finished {state.iteration} iterations; "
          f"best score {state.best_score():.6f}", file=sys.stderr)
    return EXIT_OK


def _cmd_resume(args) -> int:
    import os
    os.makedirs(args.out, exist_ok=True)
    state, finished = explore.resume(args.state, out_dir=args.out)
    if finished:
        print("run already finished; nothing to do", file=sys.stderr)
    else:
        print(f"resumed to iteration {state.iteration}; "
              f"best score {state.best_score():.6f}", file=sys.stderr)
    return EXIT_OK


def _cmd_report(args) -> int:
    state = explore.load_state(args.state)
    explore.emit_reports(state, args.out)
    print(f"reports written to {args.out}", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "canonical": _cmd_canonical,
    "classify": _cmd_classify,
    "fingerprint": _cmd_fingerprint,
    "formula": _cmd_formula,
    "metrics": _cmd_metrics,
    "pretrain": _cmd_pretrain,
    "sample": _cmd_sample,
    "qspr-train": _cmd_qspr_train,
    "qspr-predict": _cmd_qspr_predict,
    "benchmark": _cmd_benchmark,
    "run": _cmd_run,
    "resume": _cmd_resume,
    "report": _cmd_report,
}

_DATA_ERRORS = (ParseError, ngramgen.TokenizeError, ngramgen.EmptyCorpusError,
                ngramgen.ModelFormatError, qspr.SchemaError,
                qspr.DuplicateKeyError, qspr.TooFewRowsError,
                qspr.DegenerateFoldError, qspr.LengthMismatchError,
                qspr.ZeroVarianceError, scoring.MissingKeyError,
                explore.ConfigError, explore.PredictorLoadError,
                explore.CorruptCheckpointError, fingerprint.WidthMismatchError,
                fingerprint.EmptyInputError, OSError, ValueError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is not None:
        try:
            import numba
            numba.set_num_threads(max(1, args.threads))
        except ImportError:
            pass
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
