"""Versioned, checksummed binary model container.

Layout (all integers little-endian, fixed width):

    bytes 0..7   magic "TSCMODEL"
    u32          format version (currently 1)
    u32          section count
    sections     4-byte ASCII tag, u64 payload length, payload
    u32          CRC32 of every preceding byte

Sections: ``META`` (JSON: model kind, params, training metadata), ``COLS``
(JSON column metadata with category tables), ``TREE`` (packed node arrays),
``IMPT`` (f64 importance vector).  The TREE payload is u32 tree count, then
per tree: u32 node count, u32 root id, and the five node arrays feature
(i32), threshold (f64), left (i32), right (i32), value (f64).

Loads are validated end to end: bad magic, unknown version, truncation and
checksum mismatch each raise ModelFormatError.  A loaded model reproduces
predictions bit-exactly because the float arrays round-trip untouched.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .boosting import BoostedModel, BoostParams
from .dataset import ColumnMeta, FieldSpec
from .errors import ModelFormatError
from .forest import ForestModel, ForestParams
from .tree import Tree

MAGIC = b"TSCMODEL"
VERSION = 1


def _pack_trees(trees: list[Tree]) -> bytes:
    out = [struct.pack("<I", len(trees))]
    for t in trees:
        out.append(struct.pack("<II", t.n_nodes, t.root))
        out.append(t.feature.astype("<i4").tobytes())
        out.append(t.threshold.astype("<f8").tobytes())
        out.append(t.left.astype("<i4").tobytes())
        out.append(t.right.astype("<i4").tobytes())
        out.append(t.value.astype("<f8").tobytes())
    return b"".join(out)


def _unpack_trees(payload: bytes) -> list[Tree]:
    view = memoryview(payload)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise ModelFormatError("model file truncated inside TREE section")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    (n_trees,) = struct.unpack("<I", take(4))
    trees = []
    for _ in range(n_trees):
        n_nodes, root = struct.unpack("<II", take(8))
        feature = np.frombuffer(take(4 * n_nodes), dtype="<i4").astype(np.int32)
        threshold = np.frombuffer(take(8 * n_nodes), dtype="<f8").astype(np.float64)
        left = np.frombuffer(take(4 * n_nodes), dtype="<i4").astype(np.int32)
        right = np.frombuffer(take(4 * n_nodes), dtype="<i4").astype(np.int32)
        value = np.frombuffer(take(8 * n_nodes), dtype="<f8").astype(np.float64)
        trees.append(Tree(feature, threshold, left, right, value, root=int(root)))
    if pos != len(view):
        raise ModelFormatError("trailing bytes in TREE section")
    return trees


def _json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _cols_payload(col_meta) -> bytes:
    cols = []
    for meta in col_meta or []:
        cols.append({
            "name": meta.spec.name,
            "kind": meta.spec.kind,
            "source": meta.spec.source,
            "categories": meta.categories,
        })
    return _json_bytes(cols)


def _cols_from_payload(payload: bytes) -> list[ColumnMeta]:
    cols = json.loads(payload.decode("utf-8"))
    return [
        ColumnMeta(
            spec=FieldSpec(name=c["name"], kind=c["kind"], source=c["source"]),
            categories=c["categories"],
        )
        for c in cols
    ]


def save_model(model: ForestModel | BoostedModel, path: str | Path, meta: dict | None = None) -> int:
    """Write the model container; returns the file size in bytes."""
    if isinstance(model, ForestModel):
        kind = "forest"
    elif isinstance(model, BoostedModel):
        kind = "boosted"
    else:
        raise ModelFormatError(f"cannot serialize {type(model).__name__}")

    meta_obj = {"model_kind": kind, "params": asdict(model.params), "training": meta or {}}
    sections = [
        (b"META", _json_bytes(meta_obj)),
        (b"COLS", _cols_payload(model.col_meta)),
        (b"TREE", _pack_trees(model.trees)),
        (b"IMPT", np.asarray(model.importance, dtype="<f8").tobytes()),
    ]
    body = [MAGIC, struct.pack("<II", VERSION, len(sections))]
    for tag, payload in sections:
        body.append(tag)
        body.append(struct.pack("<Q", len(payload)))
        body.append(payload)
    blob = b"".join(body)
    blob += struct.pack("<I", zlib.crc32(blob))
    Path(path).write_bytes(blob)
    return len(blob)


def load_model(path: str | Path) -> tuple[ForestModel | BoostedModel, dict]:
    """Read and validate a model container; returns (model, training meta)."""
    path = Path(path)
    if not path.exists():
        raise ModelFormatError(f"{path}: model file not found")
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + 12:
        raise ModelFormatError(f"{path}: file too short to be a model")
    if blob[:len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{path}: bad magic {blob[:len(MAGIC)]!r}, expected {MAGIC!r}")

    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise ModelFormatError(f"{path}: checksum mismatch, file corrupted")

    version, n_sections = struct.unpack("<II", blob[len(MAGIC):len(MAGIC) + 8])
    if version != VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version} (expected {VERSION})")

    pos = len(MAGIC) + 8
    end = len(blob) - 4
    payloads: dict[bytes, bytes] = {}
    for _ in range(n_sections):
        if pos + 12 > end:
            raise ModelFormatError(f"{path}: truncated section header")
        tag = blob[pos:pos + 4]
        (length,) = struct.unpack("<Q", blob[pos + 4:pos + 12])
        pos += 12
        if pos + length > end:
            raise ModelFormatError(f"{path}: truncated section {tag!r}")
        payloads[tag] = blob[pos:pos + length]
        pos += length
    if pos != end:
        raise ModelFormatError(f"{path}: trailing bytes after sections")
    for required in (b"META", b"COLS", b"TREE", b"IMPT"):
        if required not in payloads:
            raise ModelFormatError(f"{path}: missing section {required!r}")

    try:
        meta_obj = json.loads(payloads[b"META"].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: bad META section: {exc}") from None
    kind = meta_obj.get("model_kind")
    params_dict = meta_obj.get("params", {})
    col_meta = _cols_from_payload(payloads[b"COLS"])
    trees = _unpack_trees(payloads[b"TREE"])
    importance = np.frombuffer(payloads[b"IMPT"], dtype="<f8").astype(np.float64)

    if kind == "forest":
        model: ForestModel | BoostedModel = ForestModel(
            trees=trees, params=ForestParams(**params_dict),
            col_meta=col_meta, importance=importance,
        )
    elif kind == "boosted":
        model = BoostedModel(
            trees=trees, params=BoostParams(**params_dict),
            col_meta=col_meta, importance=importance,
        )
    else:
        raise ModelFormatError(f"{path}: unknown model kind {kind!r}")
    return model, meta_obj.get("training", {})
