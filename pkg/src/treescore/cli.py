"""Command-line frontend: data generation, training, scoring, evaluation and
hyperparameter tuning, with versioned model files.

Subcommands: ``gen-data``, ``train``, ``predict``, ``evaluate``, ``tune``.
Exit codes: 0 success, 1 usage, 2 data error, 3 model error.  All randomness
flows from explicit --seed flags; re-running any pipeline with the same seeds
reproduces every output byte for byte (set SOURCE_DATE_EPOCH to also pin the
creation timestamp embedded in model files).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boosting import BoostParams, fit_boosted, predict_proba_boosted
from .dataset import (
    DEFAULT_LABEL_COLUMN,
    SourceSchema,
    SplitSpec,
    drop_missing,
    encode,
    apply_encoding,
    join_sources,
    load_source_csv,
    read_schema,
    train_test_split,
    write_batch_csv,
    write_schema,
)
from .errors import EvaluationError, IngestError, TreescoreError, UsageError
from .forest import ForestModel, ForestParams, fit_forest, predict_proba_forest
from .metrics import ScoredSet, evaluate_scores, pr_curve
from .model_io import load_model, save_model
from .report import render_figures, render_pr_overlay, write_curve_tables, write_summary
from .synthetic import GeneratorConfig, generate_synthetic, read_generator_config, synthetic_schema
from .tuning import best_trial, read_grid, run_grid, write_trial_table


def _timestamp() -> str:
    """Creation timestamp; SOURCE_DATE_EPOCH overrides the wall clock so
    builds can be reproduced byte for byte."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        t = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        t = datetime.datetime.now(tz=datetime.timezone.utc)
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


def _resolve_data_paths(paths: list[str], source_names: list[str]) -> list[Path]:
    """Match data files to schema sections: either one directory holding
    <section>.csv per section, or explicit files matched by stem."""
    parsed = [Path(p) for p in paths]
    if len(parsed) == 1 and parsed[0].is_dir():
        base = parsed[0]
        out = []
        for name in source_names:
            p = base / f"{name}.csv"
            if not p.exists():
                raise IngestError(f"{p}: expected data file for source '{name}'")
            out.append(p)
        return out
    by_stem = {p.stem: p for p in parsed}
    out = []
    for name in source_names:
        if name not in by_stem:
            raise IngestError(f"no data file named '{name}.csv' among the inputs")
        out.append(by_stem[name])
    return out


def _resolve_schema_path(args) -> Path:
    if args.schema:
        return Path(args.schema)
    parsed = [Path(p) for p in args.data]
    if len(parsed) == 1 and parsed[0].is_dir() and (parsed[0] / "schema.cfg").exists():
        return parsed[0] / "schema.cfg"
    raise UsageError("--schema is required (no schema.cfg found next to the data)")


def _load_joined(args):
    sources = read_schema(_resolve_schema_path(args))
    paths = _resolve_data_paths(args.data, [s.name for s in sources])
    batches = [load_source_csv(p, s.fields, s.id_column) for p, s in zip(paths, sources)]
    return sources, join_sources(batches)


def _importance_table(model, top: int = 10) -> list[tuple[str, float]]:
    names = [m.spec.name for m in model.col_meta]
    order = np.argsort(-model.importance, kind="stable")[:top]
    return [(names[i], float(model.importance[i])) for i in order]


def cmd_gen_data(args) -> int:
    n, seed, rate = args.n, args.seed, args.missing_rate
    config = GeneratorConfig()
    if args.config:
        cfg_n, cfg_seed, config = read_generator_config(args.config)
        n = n if n is not None else cfg_n
        seed = seed if seed is not None else cfg_seed
        if rate is not None:
            config = GeneratorConfig(
                missing_rate=rate, intercept=config.intercept, weights=config.weights
            )
    n = 5000 if n is None else n
    seed = 7 if seed is None else seed
    if args.config is None:
        config = GeneratorConfig(missing_rate=0.0 if rate is None else rate)

    batch, truth = generate_synthetic(n, seed, config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    sources = synthetic_schema()
    for src in sources:
        write_batch_csv(batch, outdir / f"{src.name}.csv", src.id_column, fields=src.fields)
        print(f"wrote {src.name}.csv ({batch.n_records} rows)")
    write_schema(sources, outdir / "schema.cfg")
    truth_doc = {
        "n": n,
        "seed": seed,
        "missing_rate": config.missing_rate,
        "truth": truth.to_dict(),
    }
    (outdir / "generator.json").write_text(
        json.dumps(truth_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    complete = drop_missing(batch)
    dropped = batch.n_records - complete.n_records
    print("wrote schema.cfg and generator.json")
    print(f"complete records after drop_missing: {complete.n_records} of {batch.n_records} ({dropped} dropped)")
    return 0


def _train_params(args):
    if args.model == "forest":
        mf = args.max_features
        if mf != "sqrt":
            try:
                mf = int(mf)
            except ValueError:
                raise UsageError(f"--max-features must be an integer or 'sqrt', got {mf!r}") from None
        return ForestParams(
            no_trees=args.no_trees,
            sample_split=args.sample_split,
            sample_leaf=args.sample_leaf,
            max_features=mf,
            seed=args.seed,
        )
    return BoostParams(
        n_rounds=args.rounds,
        max_depth=args.max_depth,
        eta=args.eta,
        colsample_bytree=args.colsample,
        subsample=args.subsample,
        min_child_weight=args.min_child_weight,
        gamma=args.gamma,
        alpha=args.alpha,
        reg_lambda=args.reg_lambda,
        base_score=args.base_score,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    sources, joined = _load_joined(args)
    complete = drop_missing(joined)
    dropped = joined.n_records - complete.n_records
    matrix = encode(complete, label_column=args.label_column)
    train, test = train_test_split(matrix, SplitSpec(args.train_fraction, args.seed))
    params = _train_params(args)

    if args.model == "forest":
        model = fit_forest(train, params, threads=args.threads)
        predict = predict_proba_forest
    else:
        model = fit_boosted(train, params)
        predict = predict_proba_boosted

    train_rep = evaluate_scores(ScoredSet(predict(model, train), train.labels))
    test_rep = evaluate_scores(ScoredSet(predict(model, test), test.labels))

    print(f"rows: {joined.n_records} loaded, {complete.n_records} complete ({dropped} dropped), "
          f"{train.n_rows} train / {test.n_rows} test")
    print(f"train: auc {train_rep.auc:.5f}  ks {train_rep.ks:.5f}")
    print(f"test:  auc {test_rep.auc:.5f}  ks {test_rep.ks:.5f} "
          f"(at sample fraction {test_rep.ks_at_fraction:.5f})")
    print("top features by importance:")
    for name, share in _importance_table(model):
        print(f"  {name:<32s} {share:.4f}")

    meta = {
        "seed": args.seed,
        "n_rows": train.n_rows,
        "created": _timestamp(),
        "label_column": args.label_column,
        "train_fraction": args.train_fraction,
        "sources": [
            {"name": s.name, "id_column": s.id_column,
             "fields": [f.name for f in s.fields if f.name != args.label_column]}
            for s in sources
        ],
    }
    size = save_model(model, args.out, meta)
    print(f"model: {args.out} ({size} bytes, {args.model}, {len(model.trees)} trees)")
    return 0


def cmd_predict(args) -> int:
    model, meta = load_model(args.model)
    if model.col_meta is None:
        raise EvaluationError("model carries no column metadata")
    col_by_name = {m.spec.name: m.spec for m in model.col_meta}
    source_meta = meta.get("sources")
    if not source_meta:
        raise EvaluationError("model carries no source layout; cannot map data files")

    sources = []
    for s in source_meta:
        fields = [col_by_name[n] for n in s["fields"] if n in col_by_name]
        sources.append(SourceSchema(name=s["name"], id_column=s["id_column"], fields=fields))

    paths = _resolve_data_paths(args.data, [s.name for s in sources])
    batches = [load_source_csv(p, s.fields, s.id_column) for p, s in zip(paths, sources)]
    joined = join_sources(batches)
    complete = drop_missing(joined)
    dropped = joined.n_records - complete.n_records

    matrix = apply_encoding(complete, model.col_meta)
    if matrix.n_rows:
        if isinstance(model, ForestModel):
            scores = predict_proba_forest(model, matrix)
        else:
            scores = predict_proba_boosted(model, matrix)
    else:
        scores = np.empty(0)

    out = Path(args.out)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([sources[0].id_column, "score"])
        for cid, score in zip(complete.client_ids, scores):
            writer.writerow([cid, repr(float(score))])
    print(f"scored {matrix.n_rows} rows ({dropped} dropped as incomplete) -> {out}")
    return 0


def _read_scores_csv(path: Path, id_column: str) -> tuple[list[str], np.ndarray]:
    if not path.exists():
        raise EvaluationError(f"{path}: scores file not found")
    ids: list[str] = []
    scores: list[float] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "score" not in reader.fieldnames:
            raise EvaluationError(f"{path}: expected a 'score' column")
        if id_column not in reader.fieldnames:
            raise EvaluationError(f"{path}: expected an '{id_column}' column")
        for lineno, row in enumerate(reader, start=2):
            try:
                scores.append(float(row["score"]))
            except ValueError:
                raise EvaluationError(
                    f"{path}: line {lineno}: bad score {row['score']!r}"
                ) from None
            ids.append(row[id_column])
    return ids, np.asarray(scores)


def _read_labels_csv(path: Path, id_column: str, label_column: str) -> dict[str, int]:
    if not path.exists():
        raise EvaluationError(f"{path}: labels file not found")
    labels: dict[str, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or label_column not in reader.fieldnames:
            raise EvaluationError(f"{path}: expected a '{label_column}' column")
        if id_column not in reader.fieldnames:
            raise EvaluationError(f"{path}: expected an '{id_column}' column")
        for lineno, row in enumerate(reader, start=2):
            text = row[label_column]
            try:
                value = float(text)
            except ValueError:
                raise EvaluationError(
                    f"{path}: line {lineno}: bad label {text!r}"
                ) from None
            if value not in (0.0, 1.0):
                raise EvaluationError(f"{path}: line {lineno}: non-binary label {text!r}")
            labels[row[id_column]] = int(value)
    return labels


def cmd_evaluate(args) -> int:
    ids, scores = _read_scores_csv(Path(args.scores), args.id_column)
    label_map = _read_labels_csv(Path(args.labels), args.id_column, args.label_column)
    labels = np.empty(len(ids), dtype=np.int64)
    for i, cid in enumerate(ids):
        if cid not in label_map:
            raise EvaluationError(f"no label for client id '{cid}'")
        labels[i] = label_map[cid]

    rep = evaluate_scores(ScoredSet(scores, labels))
    outdir = Path(args.out)
    write_curve_tables(rep, outdir)
    write_summary(rep, outdir / "summary.json")
    render_figures(rep, outdir)
    print(f"n={rep.n} positives={rep.positives} auc={rep.auc:.5f} "
          f"ks={rep.ks:.5f} ks_at_fraction={rep.ks_at_fraction:.5f}")
    print(f"report written to {outdir}")
    return 0


def cmd_tune(args) -> int:
    spec = read_grid(args.grid, default_seed=args.seed)
    sources, joined = _load_joined(args)
    complete = drop_missing(joined)
    matrix = encode(complete, label_column=args.label_column)
    train, test = train_test_split(matrix, SplitSpec(args.train_fraction, args.seed))

    results = run_grid(spec, train, test, threads=args.threads)
    columns = write_trial_table(results, spec.model_kind, spec.metric, args.out)
    best = best_trial(results)
    shown = {k: best.params[k] for k in columns[:-1] if k in best.params}
    print(f"{len(results)} trials -> {args.out}")
    print(f"best {spec.metric}: {best.test_metric:.5f} with {shown}")

    if args.curves:
        curves_dir = Path(args.curves)
        curves_dir.mkdir(parents=True, exist_ok=True)
        varied = [
            k for k in columns[:-1]
            if len({repr(r.params.get(k)) for r in results}) > 1
        ]
        overlay = []
        for r in results:
            points = pr_curve(ScoredSet(r.test_scores, test.labels))
            path = curves_dir / f"trial_{r.index:02d}_pr.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["recall", "precision", "threshold"])
                for row in points:
                    writer.writerow([repr(float(v)) for v in row])
            label = ", ".join(f"{k}={r.params[k]}" for k in varied) or f"trial {r.index}"
            overlay.append((label, points))
        render_pr_overlay(overlay, curves_dir / "pr_overlay.png")
        print(f"curve files written to {curves_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treescore",
        description="Tree-ensemble credit default scoring: generate data, train, "
                    "score, evaluate, tune.",
    )
    parser.add_argument("--version", action="version", version=f"treescore {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate synthetic multi-source borrower data")
    p.add_argument("--n", type=int, default=None, help="number of records (default 5000)")
    p.add_argument("--seed", type=int, default=None, help="generator seed (default 7)")
    p.add_argument("--missing-rate", type=float, default=None,
                   help="per-cell missing probability (default 0)")
    p.add_argument("--config", default=None, help="generator config file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model on multi-source CSV data")
    p.add_argument("--model", choices=("forest", "boosted"), required=True)
    p.add_argument("--data", nargs="+", required=True,
                   help="data directory or one CSV per schema section")
    p.add_argument("--schema", default=None, help="schema file (default: data dir's schema.cfg)")
    p.add_argument("--label-column", default=DEFAULT_LABEL_COLUMN)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--no-trees", type=int, default=500)
    p.add_argument("--sample-split", type=int, default=2)
    p.add_argument("--sample-leaf", type=int, default=1)
    p.add_argument("--max-features", default="sqrt")
    p.add_argument("--rounds", type=int, default=200)
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--colsample", type=float, default=1.0)
    p.add_argument("--subsample", type=float, default=1.0)
    p.add_argument("--min-child-weight", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--lambda", dest="reg_lambda", type=float, default=1.0)
    p.add_argument("--base-score", type=float, default=0.5)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score new data with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--out", required=True, help="scores CSV to write")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="evaluate a scores file against labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True, help="CSV holding the id and label columns")
    p.add_argument("--label-column", default=DEFAULT_LABEL_COLUMN)
    p.add_argument("--id-column", default="client_id")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="run a hyperparameter grid from a grid file")
    p.add_argument("--grid", required=True)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--label-column", default=DEFAULT_LABEL_COLUMN)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="trial table CSV to write")
    p.add_argument("--curves", default=None, help="directory for per-trial PR curves")
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except TreescoreError as exc:
        print(f"treescore: error: {exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"treescore: error: io: {exc}", file=sys.stderr)
        return 2


def console_entry() -> None:
    sys.exit(main())
