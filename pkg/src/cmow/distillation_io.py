"""Teacher-record files: the "TDR1" wire format and its in-memory store.

A record carries the teacher's top-K probability mass for one prediction
site.  Sites are keyed by (corpus line, token position) for MLM exports
and by (task row, 0) for task exports, so the student never needs the
teacher at training time — only these files.

Wire format (little-endian throughout):

    magic      4 bytes  b"TDR1"
    kind       u32      0 = mlm, 1 = task
    n          u32      n_vocab (mlm) or n_classes (task)
    K          u32      maximum support size per record
    mask_seed  u64      seed of the mask derivation (0 for task exports)
    mask_frac  f32      mask fraction (0.0 for task exports)
    temp       f32      softmax temperature used at export
    count      u64      number of records
    records    count *  { key0 u64, key1 u64, n_entries u32,
                          n_entries * (id u32, prob f32) }
    crc32      u32      zlib CRC-32 of every preceding byte

Truncated-support records (fewer entries than the full class/vocab axis)
may sum to anything in (0, 1]: the tail mass was cut at export and the
reader renormalizes.  Full-support records must sum to 1 within 1e-4
(float32 accumulation slack); after loading, every distribution sums to
1 within 1e-9.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, StructuralError

MAGIC = b"TDR1"
KIND_CODES = {"mlm": 0, "task": 1}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}

_HEADER = struct.Struct("<4sIIIQffQ")
_KEY = struct.Struct("<QQI")
_ENTRY = struct.Struct("<If")


@dataclass
class RecordStore:
    """Immutable map from site key to a renormalized top-K distribution."""

    kind: str
    n: int  # n_vocab or n_classes
    K: int
    mask_seed: int
    mask_fraction: float
    temperature: float
    records: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)


def write_records(
    path,
    kind: str,
    n: int,
    K: int,
    records,
    mask_seed: int = 0,
    mask_fraction: float = 0.0,
    temperature: float = 1.0,
) -> None:
    """Serialize records to a TDR1 file.

    `records` is an iterable of (key, ids, probs) where key is an
    (int, int) pair, ids are support indices, probs parallel floats.
    """
    if kind not in KIND_CODES:
        raise StructuralError(f"unknown record kind {kind!r}")
    items = list(records)
    payload = bytearray()
    payload += _HEADER.pack(
        MAGIC, KIND_CODES[kind], n, K, mask_seed, mask_fraction, temperature, len(items)
    )
    for key, ids, probs in items:
        ids = np.asarray(ids, dtype=np.uint32)
        probs = np.asarray(probs, dtype=np.float32)
        if ids.shape != probs.shape or ids.ndim != 1:
            raise StructuralError(f"record {key}: ids/probs must be parallel 1-D arrays")
        if ids.size > K:
            raise StructuralError(f"record {key}: {ids.size} entries exceeds K={K}")
        payload += _KEY.pack(int(key[0]), int(key[1]), ids.size)
        for i, p in zip(ids.tolist(), probs.tolist()):
            payload += _ENTRY.pack(i, p)
    payload += struct.pack("<I", zlib.crc32(bytes(payload)))
    with open(path, "wb") as f:
        f.write(bytes(payload))


def load_records(path, expected_kind: str) -> RecordStore:
    """Read and validate a TDR1 file into a RecordStore.

    Checksum failures, duplicate site keys, out-of-range ids, and badly
    normalized probabilities are data errors naming the offending record.
    """
    if expected_kind not in KIND_CODES:
        raise StructuralError(f"unknown record kind {expected_kind!r}")
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size + 4:
        raise DataError(f"{path}: truncated teacher-record file")
    body, crc_bytes = blob[:-4], blob[-4:]
    (expected_crc,) = struct.unpack("<I", crc_bytes)
    if zlib.crc32(body) != expected_crc:
        raise DataError(f"{path}: CRC-32 mismatch; file is corrupt")
    magic, kind_code, n, K, mask_seed, mask_fraction, temperature, count = _HEADER.unpack_from(body, 0)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if kind_code not in KIND_NAMES:
        raise DataError(f"{path}: unknown kind code {kind_code}")
    kind = KIND_NAMES[kind_code]
    if kind != expected_kind:
        raise DataError(f"{path}: contains {kind} records, expected {expected_kind}")
    store = RecordStore(
        kind=kind, n=n, K=K, mask_seed=mask_seed,
        mask_fraction=mask_fraction, temperature=temperature,
    )
    offset = _HEADER.size
    for _ in range(count):
        key0, key1, n_entries = _KEY.unpack_from(body, offset)
        offset += _KEY.size
        key = (key0, key1)
        if key in store.records:
            raise DataError(f"{path}: duplicate site key {key}")
        if n_entries == 0 or n_entries > K:
            raise DataError(f"{path}: record {key} has {n_entries} entries (K={K})")
        raw = np.frombuffer(body, dtype=np.dtype([("id", "<u4"), ("p", "<f4")]), count=n_entries, offset=offset)
        offset += n_entries * _ENTRY.size
        ids = raw["id"].astype(np.int64)
        probs = raw["p"].astype(np.float64)
        if len(np.unique(ids)) != len(ids):
            raise DataError(f"{path}: record {key} has duplicate support ids")
        if (ids >= n).any():
            raise DataError(f"{path}: record {key} has id >= {n}")
        if (probs <= 0).any():
            raise DataError(f"{path}: record {key} has non-positive probabilities")
        total = probs.sum()
        full_support = n_entries == n
        low = 1.0 - 1e-4 if full_support else 0.0
        if not (low < total <= 1.0 + 1e-5):
            raise DataError(f"{path}: record {key} probabilities sum to {total:.6f}")
        store.records[key] = (ids, probs / total)
    if offset != len(body):
        raise DataError(f"{path}: {len(body) - offset} trailing bytes after {count} records")
    return store


def lookup_record(store: RecordStore, site: tuple[int, int]):
    """Exact-key lookup; returns (ids, probs) or None.  Absence is a
    signal, not an error — the caller decides per training mode."""
    return store.records.get((int(site[0]), int(site[1])))
