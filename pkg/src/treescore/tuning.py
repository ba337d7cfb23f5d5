"""Grid-search harness over the two learners.

Three sweep modes: ``ofat`` (default; the baseline row plus one trial per
axis value, the way published tuning tables usually vary one factor around a
chosen row), ``cartesian`` (full product of the axes), and ``rows`` (explicit
trial rows, for tables whose rows move two or three knobs together).  A
grouped axis key like ``colsample_bytree,subsample`` applies each value to
every member in lockstep.

Every trial reuses the shared seed so metric differences are attributable to
the varied parameters.  No cross-validation: one fixed train/test split.
"""

from __future__ import annotations

import configparser
import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field, fields as dc_fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .boosting import BoostParams, fit_boosted, predict_proba_boosted
from .dataset import EncodedMatrix
from .errors import GridError
from .forest import ForestParams, fit_forest, predict_proba_forest
from .metrics import auc_score, avg_precision_score, ks_score

MODEL_KINDS = ("forest", "boosted")
METRICS: dict[str, Callable] = {
    "auc": auc_score,
    "ks": ks_score,
    "avg_precision": avg_precision_score,
}

# table column order mirrors the published tuning tables: params then metric
PARAM_ORDER = {
    "boosted": ["max_depth", "eta", "colsample_bytree", "subsample",
                "min_child_weight", "gamma", "alpha"],
    "forest": ["no_trees", "sample_split", "sample_leaf", "max_features"],
}

_PARAM_ALIASES = {"lambda": "reg_lambda", "lambda_": "reg_lambda", "rounds": "n_rounds"}


@dataclass
class GridSpec:
    model_kind: str
    axes: dict = dc_field(default_factory=dict)
    rows: list = dc_field(default_factory=list)
    fixed: dict = dc_field(default_factory=dict)
    metric: str = "auc"
    seed: int = 0
    mode: str = "ofat"

    def __post_init__(self) -> None:
        if self.model_kind not in MODEL_KINDS:
            raise GridError(f"unknown model kind '{self.model_kind}'")
        if self.metric not in METRICS:
            raise GridError(f"unknown metric '{self.metric}'")
        if self.mode not in ("ofat", "cartesian", "rows"):
            raise GridError(f"unknown sweep mode '{self.mode}'")
        if self.mode == "rows":
            if not self.rows:
                raise GridError("rows mode requires at least one row")
        elif not self.axes:
            raise GridError("axes must be non-empty")
        valid = {f.name for f in dc_fields(_params_type(self.model_kind))}
        for name in self._all_param_names():
            if _PARAM_ALIASES.get(name, name) not in valid:
                raise GridError(f"unknown parameter '{name}' for {self.model_kind}")

    def _all_param_names(self):
        for key in self.axes:
            yield from (k.strip() for k in key.split(","))
        for row in self.rows:
            yield from row.keys()
        yield from self.fixed.keys()


@dataclass
class TrialResult:
    params: dict
    train_metric: float
    test_metric: float
    fit_seconds: float
    index: int = 0                          # position in the resolved grid
    test_scores: np.ndarray | None = None   # in-memory only, never serialized


def _params_type(model_kind: str):
    return ForestParams if model_kind == "forest" else BoostParams


def _canonical(overrides: dict) -> dict:
    return {_PARAM_ALIASES.get(k, k): v for k, v in overrides.items()}


def resolve_cells(spec: GridSpec) -> list[dict]:
    """Expand the grid into one override dict per trial, in input order."""
    base = _canonical(spec.fixed)
    if spec.mode == "rows":
        return [{**base, **_canonical(row)} for row in spec.rows]

    axes: list[tuple[list[str], list]] = []
    for key, values in spec.axes.items():
        members = [_PARAM_ALIASES.get(k.strip(), k.strip()) for k in key.split(",")]
        axes.append((members, list(values)))

    if spec.mode == "ofat":
        cells = [dict(base)]
        for members, values in axes:
            for v in values:
                cell = dict(base)
                for m in members:
                    cell[m] = v
                cells.append(cell)
        return cells

    cells = [dict(base)]
    for members, values in axes:
        nxt = []
        for cell in cells:
            for v in values:
                c = dict(cell)
                for m in members:
                    c[m] = v
                nxt.append(c)
        cells = nxt
    return cells


def _build_params(spec: GridSpec, cell: dict):
    merged = dict(cell)
    merged.setdefault("seed", spec.seed)
    try:
        return _params_type(spec.model_kind)(**merged)
    except TypeError as exc:
        raise GridError(f"bad grid cell {cell}: {exc}") from None


def run_trial(spec: GridSpec, cell: dict, train: EncodedMatrix, test: EncodedMatrix) -> TrialResult:
    params = _build_params(spec, cell)
    metric = METRICS[spec.metric]
    t0 = time.perf_counter()
    if spec.model_kind == "forest":
        model = fit_forest(train, params)
        predict = predict_proba_forest
    else:
        model = fit_boosted(train, params)
        predict = predict_proba_boosted
    elapsed = time.perf_counter() - t0
    train_scores = predict(model, train)
    test_scores = predict(model, test)
    return TrialResult(
        params=asdict(params),
        train_metric=float(metric(train_scores, train.labels)),
        test_metric=float(metric(test_scores, test.labels)),
        fit_seconds=elapsed,
        test_scores=test_scores,
    )


def run_grid(
    spec: GridSpec,
    train: EncodedMatrix,
    test: EncodedMatrix,
    threads: int = 1,
) -> list[TrialResult]:
    """One trial per grid cell; results sorted by test metric descending,
    ties by input order.  Each trial is internally deterministic, so the
    output is identical for any thread count."""
    cells = resolve_cells(spec)

    def one(i: int) -> TrialResult:
        try:
            result = run_trial(spec, cells[i], train, test)
        except GridError:
            raise
        except Exception as exc:
            raise GridError(f"trial {i} with params {cells[i]} failed: {exc}") from exc
        result.index = i
        return result

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(len(cells))))
    else:
        results = [one(i) for i in range(len(cells))]

    order = sorted(range(len(results)), key=lambda i: (-results[i].test_metric, i))
    return [results[i] for i in order]


def best_trial(results: Sequence[TrialResult]) -> TrialResult:
    """Maximal test metric; ties keep the earliest listed."""
    if not results:
        raise GridError("no trial results")
    best = results[0]
    for r in results[1:]:
        if r.test_metric > best.test_metric:
            best = r
    return best


def _format_value(v) -> str:
    if isinstance(v, float):
        return str(int(v)) if v == int(v) and abs(v) < 1e15 else repr(v)
    return str(v)


def write_trial_table(
    results: Sequence[TrialResult],
    model_kind: str,
    metric: str,
    path: str | Path,
) -> list[str]:
    """Delimited trial table: param columns in the published order, then the
    validation metric.  (Timings stay in memory; the file is reproducible.)"""
    columns = PARAM_ORDER[model_kind] + [f"val_{metric}"]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in results:
            row = [_format_value(r.params[c]) for c in PARAM_ORDER[model_kind]]
            row.append(repr(r.test_metric))
            writer.writerow(row)
    return columns


def read_grid(path: str | Path, default_seed: int = 0) -> GridSpec:
    """Parse a grid file: [grid] model/metric/mode/seed, [fixed], [axes],
    and [row.*] sections for explicit rows (applied over [fixed])."""
    path = Path(path)
    if not path.exists():
        raise GridError(f"{path}: grid file not found")
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise GridError(f"{path}: {exc}") from None
    if not parser.has_section("grid"):
        raise GridError(f"{path}: missing [grid] section")

    g = parser["grid"]
    model_kind = g.get("model", fallback="")
    metric = g.get("metric", fallback="auc")
    mode = g.get("mode", fallback=None)
    seed = g.getint("seed", fallback=default_seed)

    fixed = {}
    if parser.has_section("fixed"):
        fixed = {k: _parse_scalar(v) for k, v in parser.items("fixed")}
    axes = {}
    if parser.has_section("axes"):
        for key, raw in parser.items("axes"):
            axes[key] = [_parse_scalar(p.strip()) for p in raw.split(",")]
    rows = []
    for section in parser.sections():
        if section.startswith("row"):
            rows.append({k: _parse_scalar(v) for k, v in parser.items(section)})

    if mode is None:
        mode = "rows" if rows else "ofat"
    return GridSpec(
        model_kind=model_kind, axes=axes, rows=rows, fixed=fixed,
        metric=metric, seed=seed, mode=mode,
    )


def _parse_scalar(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text
