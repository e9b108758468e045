"""Binary checkpoint container for embedding tables and heads.

Layout (little-endian):

    magic     4 bytes  b"CMOW"
    version   u32      1
    kind      u32      index into embeddings.KINDS
    d         u32
    d_vec     u32
    n_vocab   u32
    dirs      u32      1 or 2
    blocks    float32  [forward | backward | vectors], only the parts the
                       kind has, each in C order
    sections  0+ of    { tag 4 bytes, length u64, payload }

Head sections:

    b"MLMH": u32 n_vocab, u32 in_dim, f32 weight (n_vocab * in_dim), f32 bias
    b"CLSF": u32 variant (0 linear, 1 mlp), u32 in_dim, u32 n_classes,
             u32 hidden, then f32 w1, b1 [, w2, b2]

Weights are stored as float32 regardless of the in-memory precision; load
casts to the requested precision.
"""

from __future__ import annotations

import struct

import numpy as np

from .embeddings import KINDS, EmbeddingTable
from .errors import DataError
from .heads import ClassifierHead, MlmHead
from .linalg import dtype_for

MAGIC = b"CMOW"
VERSION = 1

_HEADER = struct.Struct("<4sIIIIII")
_SECTION = struct.Struct("<4sQ")


def _f32_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def save_checkpoint(path, table: EmbeddingTable, mlm_head: MlmHead | None = None, classifier: ClassifierHead | None = None) -> None:
    with open(path, "wb") as f:
        f.write(
            _HEADER.pack(
                MAGIC, VERSION, KINDS.index(table.kind), table.d, table.d_vec, table.n_vocab, table.dirs
            )
        )
        if table.forward is not None:
            f.write(_f32_bytes(table.forward))
        if table.backward is not None:
            f.write(_f32_bytes(table.backward))
        if table.vectors is not None:
            f.write(_f32_bytes(table.vectors))
        if mlm_head is not None:
            payload = struct.pack("<II", mlm_head.n_vocab, mlm_head.in_dim)
            payload += _f32_bytes(mlm_head.weight) + _f32_bytes(mlm_head.bias)
            f.write(_SECTION.pack(b"MLMH", len(payload)))
            f.write(payload)
        if classifier is not None:
            variant = 0 if classifier.variant == "linear" else 1
            payload = struct.pack(
                "<IIII", variant, classifier.in_dim, classifier.n_classes, classifier.hidden_dim
            )
            payload += _f32_bytes(classifier.w1) + _f32_bytes(classifier.b1)
            if classifier.variant == "mlp":
                payload += _f32_bytes(classifier.w2) + _f32_bytes(classifier.b2)
            f.write(_SECTION.pack(b"CLSF", len(payload)))
            f.write(payload)


def _read_f32(blob: bytes, offset: int, shape, dtype) -> tuple[np.ndarray, int]:
    count = int(np.prod(shape))
    arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    return arr.reshape(shape).astype(dtype), offset + 4 * count


def load_checkpoint(path, precision: str = "narrow"):
    """Returns (table, mlm_head or None, classifier or None)."""
    dtype = dtype_for(precision)
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise DataError(f"{path}: truncated checkpoint")
    magic, version, kind_idx, d, d_vec, n_vocab, dirs = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    if kind_idx >= len(KINDS):
        raise DataError(f"{path}: unknown kind index {kind_idx}")
    kind = KINDS[kind_idx]
    offset = _HEADER.size
    forward = backward = vectors = None
    if d > 0:
        forward, offset = _read_f32(blob, offset, (n_vocab, d, d), dtype)
        if dirs == 2:
            backward, offset = _read_f32(blob, offset, (n_vocab, d, d), dtype)
    if d_vec > 0:
        vectors, offset = _read_f32(blob, offset, (n_vocab, d_vec), dtype)
    table = EmbeddingTable(
        kind=kind, d=d, d_vec=d_vec, n_vocab=n_vocab,
        forward=forward, backward=backward, vectors=vectors,
    )
    mlm_head = classifier = None
    while offset < len(blob):
        if offset + _SECTION.size > len(blob):
            raise DataError(f"{path}: truncated section header")
        tag, length = _SECTION.unpack_from(blob, offset)
        offset += _SECTION.size
        if offset + length > len(blob):
            raise DataError(f"{path}: section {tag!r} overruns the file")
        payload = blob[offset : offset + length]
        offset += length
        if tag == b"MLMH":
            nv, in_dim = struct.unpack_from("<II", payload, 0)
            w, pos = _read_f32(payload, 8, (nv, in_dim), dtype)
            b, _ = _read_f32(payload, pos, (nv,), dtype)
            mlm_head = MlmHead(weight=w, bias=b)
        elif tag == b"CLSF":
            variant, in_dim, n_classes, hidden = struct.unpack_from("<IIII", payload, 0)
            pos = 16
            if variant == 0:
                w1, pos = _read_f32(payload, pos, (n_classes, in_dim), dtype)
                b1, _ = _read_f32(payload, pos, (n_classes,), dtype)
                classifier = ClassifierHead(variant="linear", w1=w1, b1=b1)
            else:
                w1, pos = _read_f32(payload, pos, (hidden, in_dim), dtype)
                b1, pos = _read_f32(payload, pos, (hidden,), dtype)
                w2, pos = _read_f32(payload, pos, (n_classes, hidden), dtype)
                b2, _ = _read_f32(payload, pos, (n_classes,), dtype)
                classifier = ClassifierHead(variant="mlp", w1=w1, b1=b1, w2=w2, b2=b2)
        else:
            raise DataError(f"{path}: unknown section tag {tag!r}")
    return table, mlm_head, classifier
