"""Multi-source borrower records: CSV ingestion, per-client joins, label
encoding, and deterministic train/test splitting.

Missing-value policy is row dropping, never imputation: a missing cell is an
explicit None, ``drop_missing`` removes any record touching one, and the
encoders refuse incomplete batches.  Categorical columns are label-encoded
with codes assigned in lexicographic order of the category strings, which is
deterministic and locale-independent; scoring-time data must map through the
stored tables and an unseen category is a hard error, not a silent bucket.

CSV convention: UTF-8, comma separated, first row is the header, an empty
cell or the token ``NA`` is missing.  Schema files are INI-style text, one
section per source file (see ``read_schema``).
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EncodeError, IngestError, JoinError, SplitError
from .rng import stream

KIND_CATEGORICAL = "categorical"
KIND_NUMERICAL = "numerical"
KINDS = (KIND_CATEGORICAL, KIND_NUMERICAL)
SOURCES = ("app", "call_records", "zhima", "tongdun", "credit91", "qianhai", "derived")
MISSING_TOKENS = ("", "NA")
DEFAULT_LABEL_COLUMN = "is_default"

_SPLIT_STREAM = 0x51


@dataclass(frozen=True)
class FieldSpec:
    name: str
    kind: str
    source: str = "derived"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise IngestError(f"field '{self.name}': unknown kind '{self.kind}'")
        if self.source not in SOURCES:
            raise IngestError(f"field '{self.name}': unknown source '{self.source}'")


@dataclass
class RecordBatch:
    """Per-client raw records; a cell value of None is a missing cell."""

    schema: list[FieldSpec]
    client_ids: list[str]
    rows: list[dict]

    @property
    def n_records(self) -> int:
        return len(self.client_ids)

    @property
    def field_names(self) -> list[str]:
        return [f.name for f in self.schema]


@dataclass
class ColumnMeta:
    """Encoded-column metadata; categories[code] is the original string."""

    spec: FieldSpec
    categories: list[str] | None = None


@dataclass
class EncodedMatrix:
    """Dense numeric feature matrix; labels is None for unlabeled data."""

    X: np.ndarray
    col_meta: list[ColumnMeta]
    labels: np.ndarray | None = None

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.X.shape[1])

    def col_index(self, name: str) -> int:
        for i, meta in enumerate(self.col_meta):
            if meta.spec.name == name:
                return i
        raise KeyError(name)


@dataclass
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0


@dataclass
class SourceSchema:
    """One source file: its id column plus the fields it carries."""

    name: str
    id_column: str
    fields: list[FieldSpec] = field(default_factory=list)


def floor_fraction(fraction: float, n: int) -> int:
    """floor(fraction * n) with decimal semantics (0.29 * 100 -> 29)."""
    return int(math.floor(Fraction(str(fraction)) * n))


def load_source_csv(path: str | Path, schema: Sequence[FieldSpec], id_column: str) -> RecordBatch:
    """Read one source CSV into a RecordBatch.

    Empty cells and the ``NA`` sentinel become missing; numerical cells must
    parse to finite reals.  Malformed rows raise IngestError with the line
    number.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file, header row required") from None
        col_of = {name: i for i, name in enumerate(header)}
        if id_column not in col_of:
            raise IngestError(f"{path}: id column '{id_column}' not in header")
        for spec in schema:
            if spec.name not in col_of:
                raise IngestError(f"{path}: schema field '{spec.name}' not in header")

        client_ids: list[str] = []
        rows: list[dict] = []
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(header):
                raise IngestError(
                    f"{path}: line {lineno}: expected {len(header)} columns, got {len(raw)}"
                )
            cells: dict = {}
            for spec in schema:
                text = raw[col_of[spec.name]]
                if text in MISSING_TOKENS:
                    cells[spec.name] = None
                elif spec.kind == KIND_NUMERICAL:
                    try:
                        value = float(text)
                    except ValueError:
                        raise IngestError(
                            f"{path}: line {lineno}: field '{spec.name}': "
                            f"cannot parse '{text}' as a number"
                        ) from None
                    if not math.isfinite(value):
                        raise IngestError(
                            f"{path}: line {lineno}: field '{spec.name}': non-finite value"
                        )
                    cells[spec.name] = value
                else:
                    cells[spec.name] = text
            client_ids.append(raw[col_of[id_column]])
            rows.append(cells)
    return RecordBatch(schema=list(schema), client_ids=client_ids, rows=rows)


def join_sources(batches: Sequence[RecordBatch]) -> RecordBatch:
    """Left join on the first (platform) batch's client ids.

    Output has one record per first-batch id; fields from side batches that
    lack the id become missing cells.
    """
    if not batches:
        raise JoinError("no batches to join")
    seen: set[str] = set()
    schema: list[FieldSpec] = []
    for batch in batches:
        for spec in batch.schema:
            if spec.name in seen:
                raise JoinError(f"field '{spec.name}' appears in more than one batch")
            seen.add(spec.name)
            schema.append(spec)

    maps: list[dict] = []
    for bi, batch in enumerate(batches):
        id_map: dict = {}
        for cid, row in zip(batch.client_ids, batch.rows):
            if cid in id_map:
                raise JoinError(f"batch {bi}: duplicate client id '{cid}'")
            id_map[cid] = row
        maps.append(id_map)

    rows: list[dict] = []
    for cid in batches[0].client_ids:
        merged: dict = {}
        for batch, id_map in zip(batches, maps):
            side = id_map.get(cid)
            for spec in batch.schema:
                merged[spec.name] = None if side is None else side[spec.name]
        rows.append(merged)
    return RecordBatch(schema=schema, client_ids=list(batches[0].client_ids), rows=rows)


def drop_missing(batch: RecordBatch) -> RecordBatch:
    """Keep exactly the records with zero missing cells, order preserved."""
    names = batch.field_names
    keep = [
        i for i, row in enumerate(batch.rows)
        if all(row.get(name) is not None for name in names)
    ]
    return RecordBatch(
        schema=list(batch.schema),
        client_ids=[batch.client_ids[i] for i in keep],
        rows=[batch.rows[i] for i in keep],
    )


def _binary_label(value, column: str) -> int:
    if isinstance(value, str):
        if value in ("0", "1"):
            return int(value)
        raise EncodeError(f"label column '{column}': non-binary value '{value}'")
    if value in (0.0, 1.0):
        return int(value)
    raise EncodeError(f"label column '{column}': non-binary value {value!r}")


def encode(batch: RecordBatch, label_column: str = DEFAULT_LABEL_COLUMN) -> EncodedMatrix:
    """Label-encode a complete batch into a numeric matrix.

    Categorical codes are assigned 0..k-1 in sorted order of the distinct
    category strings; the label column is removed from the features into the
    binary label vector.
    """
    if label_column not in batch.field_names:
        raise EncodeError(f"label column '{label_column}' absent from batch")
    feature_specs = [f for f in batch.schema if f.name != label_column]
    n = batch.n_records

    for name in batch.field_names:
        for i, row in enumerate(batch.rows):
            if row.get(name) is None:
                raise EncodeError(
                    f"missing cell in field '{name}' at record {i}; drop_missing first"
                )

    X = np.empty((n, len(feature_specs)), dtype=np.float64)
    col_meta: list[ColumnMeta] = []
    for j, spec in enumerate(feature_specs):
        values = [row[spec.name] for row in batch.rows]
        if spec.kind == KIND_CATEGORICAL:
            cats = sorted({str(v) for v in values})
            code = {c: k for k, c in enumerate(cats)}
            X[:, j] = [code[str(v)] for v in values]
            col_meta.append(ColumnMeta(spec=spec, categories=cats))
        else:
            X[:, j] = values
            col_meta.append(ColumnMeta(spec=spec, categories=None))

    labels = np.array(
        [_binary_label(row[label_column], label_column) for row in batch.rows],
        dtype=np.int64,
    )
    return EncodedMatrix(X=X, col_meta=col_meta, labels=labels)


def apply_encoding(batch: RecordBatch, col_meta: Sequence[ColumnMeta]) -> EncodedMatrix:
    """Encode scoring-time data through stored category tables.

    An unseen category string is an error: silently bucketing it would
    misprice the applicant.  Output is unlabeled.
    """
    names = set(batch.field_names)
    for meta in col_meta:
        if meta.spec.name not in names:
            raise EncodeError(f"batch lacks required field '{meta.spec.name}'")

    n = batch.n_records
    X = np.empty((n, len(col_meta)), dtype=np.float64)
    for j, meta in enumerate(col_meta):
        name = meta.spec.name
        if meta.spec.kind == KIND_CATEGORICAL:
            code = {c: k for k, c in enumerate(meta.categories or [])}
            for i, row in enumerate(batch.rows):
                v = row.get(name)
                if v is None:
                    raise EncodeError(f"missing cell in field '{name}' at record {i}")
                if str(v) not in code:
                    raise EncodeError(f"field '{name}': unseen category '{v}'")
                X[i, j] = code[str(v)]
        else:
            for i, row in enumerate(batch.rows):
                v = row.get(name)
                if v is None:
                    raise EncodeError(f"missing cell in field '{name}' at record {i}")
                X[i, j] = v
    return EncodedMatrix(X=X, col_meta=list(col_meta), labels=None)


def train_test_split(m: EncodedMatrix, spec: SplitSpec) -> tuple[EncodedMatrix, EncodedMatrix]:
    """Deterministic seeded permutation split; floor(fraction * n) train rows."""
    n = m.n_rows
    if n < 2:
        raise SplitError(f"cannot split {n} row(s)")
    k = floor_fraction(spec.train_fraction, n)
    if k < 1 or k >= n:
        raise SplitError(
            f"train fraction {spec.train_fraction} leaves an empty side for n={n}"
        )
    perm = stream(spec.seed, _SPLIT_STREAM).permutation(n)
    tr, te = perm[:k], perm[k:]
    labels = m.labels
    return (
        EncodedMatrix(X=m.X[tr], col_meta=m.col_meta, labels=None if labels is None else labels[tr]),
        EncodedMatrix(X=m.X[te], col_meta=m.col_meta, labels=None if labels is None else labels[te]),
    )


def read_schema(path: str | Path) -> list[SourceSchema]:
    """Parse a schema file: one INI section per source file, in join order.

    Reserved keys: ``id_column`` (default client_id) and ``source`` (default
    source tag for the section's fields).  Every other key is a field:
    ``name = kind`` or ``name = kind, source``.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{path}: schema file not found")
    parser = configparser.ConfigParser()
    parser.optionxform = str  # field names are case-sensitive
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise IngestError(f"{path}: {exc}") from None

    sources: list[SourceSchema] = []
    for section in parser.sections():
        id_column = parser.get(section, "id_column", fallback="client_id")
        default_source = parser.get(section, "source", fallback=None)
        fields: list[FieldSpec] = []
        for key, raw in parser.items(section):
            if key in ("id_column", "source"):
                continue
            parts = [p.strip() for p in raw.split(",")]
            kind = parts[0]
            source = parts[1] if len(parts) > 1 else default_source
            if source is None:
                source = section if section in SOURCES else "derived"
            fields.append(FieldSpec(name=key, kind=kind, source=source))
        sources.append(SourceSchema(name=section, id_column=id_column, fields=fields))
    if not sources:
        raise IngestError(f"{path}: schema file has no sections")
    return sources


def write_schema(sources: Iterable[SourceSchema], path: str | Path) -> None:
    lines: list[str] = []
    for src in sources:
        lines.append(f"[{src.name}]")
        lines.append(f"id_column = {src.id_column}")
        for spec in src.fields:
            lines.append(f"{spec.name} = {spec.kind}, {spec.source}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def format_cell(value) -> str:
    """Deterministic CSV cell text; missing -> empty string."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    v = float(value)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def write_batch_csv(
    batch: RecordBatch,
    path: str | Path,
    id_column: str,
    fields: Sequence[FieldSpec] | None = None,
) -> None:
    """Write (a subset of) a batch to CSV with deterministic formatting."""
    specs = list(batch.schema) if fields is None else list(fields)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([id_column] + [f.name for f in specs])
        for cid, row in zip(batch.client_ids, batch.rows):
            writer.writerow([cid] + [format_cell(row.get(f.name)) for f in specs])
