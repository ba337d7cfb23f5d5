"""Schema-faithful synthetic borrower records.

The real multi-source lending data is proprietary, so this generator emits a
representative 25-feature subset of the production schema across the three
source groupings (platform app, carrier call records, credit bureaus).
Default labels are drawn from a documented logistic ground truth that loads
on five planted signal fields: the bureau score, two multi-platform
loan-stacking measures, the device contact count and the total call-contact
count.  The truth (intercept plus per-field center/scale/weight) is returned
with the batch so the Bayes-optimal score of any generated row can be
recomputed, and it is written to disk by the CLI for the same reason.

Generation is bit-reproducible: every field, the labels and the missing-cell
mask each draw from their own seeded stream.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import EncodedMatrix, FieldSpec, RecordBatch, SourceSchema
from .errors import IngestError, UsageError
from .rng import stream

LABEL_COLUMN = "is_default"
ID_COLUMN = "client_id"

_LABEL_STREAM = 0x10
_MISSING_STREAM = 0x11
_FIELD_STREAM = 0x1000

_CATEGORIES = {
    "Income": ["0-3k", "3k-5k", "5k-8k", "8k-15k", "15k+"],
    "Education": ["primary", "high_school", "college", "bachelor", "master"],
    "MarryStatus": ["single", "married", "divorced", "widowed"],
    "PositionName": ["none", "staff", "senior", "manager", "owner"],
    "MainContact1Relation": ["parent", "spouse", "sibling", "friend", "colleague"],
}

_CATEGORY_PROBS = {
    "Income": [0.18, 0.30, 0.27, 0.17, 0.08],
    "Education": [0.12, 0.38, 0.24, 0.21, 0.05],
    "MarryStatus": [0.45, 0.42, 0.10, 0.03],
    "PositionName": [0.15, 0.45, 0.20, 0.14, 0.06],
    "MainContact1Relation": [0.35, 0.25, 0.15, 0.15, 0.10],
}


def _categorical(name):
    cats = np.array(_CATEGORIES[name], dtype=object)
    probs = np.array(_CATEGORY_PROBS[name])

    def draw(rng, n):
        return cats[rng.choice(cats.size, size=n, p=probs)]

    return draw


def _log_count(mu, sigma):
    def draw(rng, n):
        return np.floor(np.exp(mu + sigma * rng.standard_normal(n)))

    return draw


def _log_amount(mu, sigma, decimals=1):
    def draw(rng, n):
        return np.round(np.exp(mu + sigma * rng.standard_normal(n)), decimals)

    return draw


def _poisson(lam):
    def draw(rng, n):
        return rng.poisson(lam, size=n).astype(np.float64)

    return draw


def _score(mean, sd, lo, hi):
    def draw(rng, n):
        return np.round(np.clip(mean + sd * rng.standard_normal(n), lo, hi))

    return draw


def _percent(a, b):
    def draw(rng, n):
        return np.round(100.0 * rng.beta(a, b, size=n), 2)

    return draw


def _uniform_int(lo, hi):
    def draw(rng, n):
        return rng.integers(lo, hi + 1, size=n).astype(np.float64)

    return draw


# (name, kind, source, file group, sampler); 25 features total.
_FIELDS = [
    # platform app data
    ("Income", "categorical", "app", "app", _categorical("Income")),
    ("Education", "categorical", "app", "app", _categorical("Education")),
    ("MarryStatus", "categorical", "app", "app", _categorical("MarryStatus")),
    ("PositionName", "categorical", "app", "app", _categorical("PositionName")),
    ("MainContact1Relation", "categorical", "app", "app", _categorical("MainContact1Relation")),
    ("deviceContactCount", "numerical", "app", "app", _log_count(5.1, 0.6)),
    ("deviceCallRecordCount", "numerical", "app", "app", _log_count(5.8, 0.8)),
    ("MainContact1CallLength", "numerical", "app", "app", _log_amount(4.0, 1.0)),
    # carrier call-record data
    ("contact_count_total", "numerical", "call_records", "call_records", _log_count(4.7, 0.7)),
    ("contact_call_count_total", "numerical", "call_records", "call_records", _log_count(5.4, 0.8)),
    ("contact_receive_count_total", "numerical", "call_records", "call_records", _log_count(5.1, 0.8)),
    ("contact_min_total", "numerical", "call_records", "call_records", _log_amount(6.0, 0.9)),
    ("contact_min_call_total", "numerical", "call_records", "call_records", _log_amount(5.5, 0.9)),
    ("bill_count", "numerical", "call_records", "call_records", _log_count(1.8, 0.5)),
    ("net_count", "numerical", "call_records", "call_records", _log_count(2.3, 0.7)),
    # credit reference agencies
    ("zhimaScore", "numerical", "zhima", "credit_bureau", _score(640.0, 70.0, 350.0, 950.0)),
    ("zhima_record_count", "numerical", "zhima", "credit_bureau", _log_count(1.6, 0.9)),
    ("td_fraud_medium", "numerical", "tongdun", "credit_bureau", _poisson(0.8)),
    ("td_no_interloan_blacklist", "numerical", "tongdun", "credit_bureau", _poisson(0.15)),
    ("td_multi_platform_1mon_perc", "numerical", "tongdun", "credit_bureau", _percent(1.3, 5.5)),
    ("td_multi_platform_6mon_cnt", "numerical", "tongdun", "credit_bureau", _poisson(3.0)),
    ("td_multi_platform_12mon_cnt", "numerical", "tongdun", "credit_bureau", _poisson(5.0)),
    ("cr91_loan_count", "numerical", "credit91", "credit_bureau", _poisson(2.0)),
    ("cr91_repayState", "numerical", "credit91", "credit_bureau", _uniform_int(0, 3)),
    ("qhrisk_record_count", "numerical", "qianhai", "credit_bureau", _poisson(1.5)),
]

FILE_GROUPS = ("app", "call_records", "credit_bureau")

# Planted logistic signal: (field, center, scale, weight) on standardized values.
_DEFAULT_INTERCEPT = -1.25
_DEFAULT_TERMS = [
    ("zhimaScore", 640.0, 70.0, -1.5),
    ("td_multi_platform_6mon_cnt", 3.0, 1.73, 1.1),
    ("td_multi_platform_1mon_perc", 19.0, 14.0, 0.8),
    ("deviceContactCount", 196.0, 129.0, -0.7),
    ("contact_count_total", 141.0, 112.0, -0.55),
]


@dataclass
class SignalTerm:
    field: str
    center: float
    scale: float
    weight: float


@dataclass
class GeneratorTruth:
    """Logistic ground truth: margin = intercept + sum of weighted z-scores."""

    intercept: float
    terms: list[SignalTerm]
    label_column: str = LABEL_COLUMN

    @property
    def signal_fields(self) -> list[str]:
        return [t.field for t in self.terms]

    def margin_for_columns(self, columns: dict) -> np.ndarray:
        acc = None
        for t in self.terms:
            z = (np.asarray(columns[t.field], dtype=np.float64) - t.center) / t.scale
            acc = t.weight * z if acc is None else acc + t.weight * z
        return self.intercept + acc

    def margin_for_matrix(self, m: EncodedMatrix) -> np.ndarray:
        cols = {t.field: m.X[:, m.col_index(t.field)] for t in self.terms}
        return self.margin_for_columns(cols)

    def margin_for_batch(self, batch: RecordBatch) -> np.ndarray:
        cols = {
            t.field: np.array([row[t.field] for row in batch.rows], dtype=np.float64)
            for t in self.terms
        }
        return self.margin_for_columns(cols)

    def probability_for_matrix(self, m: EncodedMatrix) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.margin_for_matrix(m)))

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "label_column": self.label_column,
            "terms": [
                {"field": t.field, "center": t.center, "scale": t.scale, "weight": t.weight}
                for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorTruth":
        return cls(
            intercept=float(d["intercept"]),
            terms=[
                SignalTerm(t["field"], float(t["center"]), float(t["scale"]), float(t["weight"]))
                for t in d["terms"]
            ],
            label_column=d.get("label_column", LABEL_COLUMN),
        )


@dataclass
class GeneratorConfig:
    missing_rate: float = 0.0
    intercept: float | None = None
    weights: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.missing_rate < 1.0:
            raise UsageError(f"missing_rate must be in [0, 1), got {self.missing_rate}")
        known = {name for name, *_ in _FIELDS}
        for name in self.weights:
            if name not in known:
                raise UsageError(f"coefficient override for unknown field '{name}'")


def synthetic_schema() -> list[SourceSchema]:
    """Source schemas for the three generated files; the label rides with app."""
    sources = []
    for group in FILE_GROUPS:
        fields = [
            FieldSpec(name=name, kind=kind, source=source)
            for name, kind, source, g, _ in _FIELDS
            if g == group
        ]
        if group == "app":
            fields.append(FieldSpec(name=LABEL_COLUMN, kind="numerical", source="app"))
        sources.append(SourceSchema(name=group, id_column=ID_COLUMN, fields=fields))
    return sources


def _resolve_truth(config: GeneratorConfig) -> GeneratorTruth:
    terms = [SignalTerm(f, c, s, config.weights.get(f, w)) for f, c, s, w in _DEFAULT_TERMS]
    # an override can also plant a brand-new field (center/scale from its docs
    # are unknown, so fall back to raw value with unit scale)
    for name, w in config.weights.items():
        if name not in {t.field for t in terms}:
            terms.append(SignalTerm(name, 0.0, 1.0, w))
    terms = [t for t in terms if t.weight != 0.0]
    intercept = _DEFAULT_INTERCEPT if config.intercept is None else config.intercept
    return GeneratorTruth(intercept=intercept, terms=terms)


def generate_synthetic(
    n: int, seed: int, config: GeneratorConfig | None = None
) -> tuple[RecordBatch, GeneratorTruth]:
    """Generate n complete-schema records plus the generating truth."""
    if n < 1:
        raise UsageError(f"n must be >= 1, got {n}")
    config = config or GeneratorConfig()
    truth = _resolve_truth(config)

    columns: dict = {}
    for idx, (name, kind, source, group, sampler) in enumerate(_FIELDS):
        columns[name] = sampler(stream(seed, _FIELD_STREAM + idx), n)

    margin = truth.margin_for_columns(columns)
    p_default = 1.0 / (1.0 + np.exp(-margin))
    labels = (stream(seed, _LABEL_STREAM).random(n) < p_default).astype(np.float64)

    feature_names = [name for name, *_ in _FIELDS]
    if config.missing_rate > 0.0:
        mask = stream(seed, _MISSING_STREAM).random((n, len(feature_names))) < config.missing_rate
    else:
        mask = None

    schema = [FieldSpec(name=name, kind=kind, source=source) for name, kind, source, _, _ in _FIELDS]
    schema.append(FieldSpec(name=LABEL_COLUMN, kind="numerical", source="app"))

    rows: list[dict] = []
    for i in range(n):
        row: dict = {}
        for j, name in enumerate(feature_names):
            if mask is not None and mask[i, j]:
                row[name] = None
            else:
                v = columns[name][i]
                row[name] = str(v) if isinstance(v, str) else float(v)
        row[LABEL_COLUMN] = float(labels[i])
        rows.append(row)

    client_ids = [f"C{i:07d}" for i in range(n)]
    return RecordBatch(schema=schema, client_ids=client_ids, rows=rows), truth


def read_generator_config(path: str | Path) -> tuple[int | None, int | None, GeneratorConfig]:
    """Parse a generator config file: [generator] n/seed/missing_rate plus an
    optional [coefficients] section of field = weight overrides."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{path}: generator config not found")
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise IngestError(f"{path}: {exc}") from None

    n = seed = None
    missing_rate = 0.0
    intercept = None
    if parser.has_section("generator"):
        g = parser["generator"]
        n = g.getint("n") if "n" in g else None
        seed = g.getint("seed") if "seed" in g else None
        missing_rate = g.getfloat("missing_rate", fallback=0.0)
        intercept = g.getfloat("intercept") if "intercept" in g else None
    weights = {}
    if parser.has_section("coefficients"):
        for name, raw in parser.items("coefficients"):
            try:
                weights[name] = float(raw)
            except ValueError:
                raise IngestError(f"{path}: coefficient '{name}': bad value '{raw}'") from None
    return n, seed, GeneratorConfig(missing_rate=missing_rate, intercept=intercept, weights=weights)
